use std::process::{Command, Output};

fn kbpcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbpcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_exit_codes_follow_verdicts() {
    let ok = kbpcheck(&["check", "--spec", "1s"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("spec 1s: HOLDS"));

    let fails = kbpcheck(&["check", "--spec", "2"]);
    assert_eq!(fails.status.code(), Some(1));
    let text = stdout(&fails);
    assert!(text.contains("spec 2: FAILS"));
    assert!(text.contains("rr |"));

    let bad = kbpcheck(&["check", "--spec", "bogus"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
}

#[test]
fn check_json_report() {
    let o = kbpcheck(&[
        "check", "--spec", "4a", "--agent", "C2", "--slot", "3", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["spec"], "4a");
    assert_eq!(v["verdict"], "holds");
    assert_eq!(v["instances"].as_array().unwrap().len(), 1);
    assert_eq!(v["instances"][0]["agent"], "C2");
}

#[test]
fn refine_chain_stops_at_first_pass() {
    let o = kbpcheck(&["refine", "--chain", "cf1,cf2,cf3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("knowledge-true-candidate-false"));
    assert_eq!(
        kbpcheck(&["refine", "--chain", "cf1"]).status.code(),
        Some(1)
    );
}

#[test]
fn refine_from_predicate_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("preds.json");
    std::fs::write(
        &path,
        r#"[{"name":"mine","target":"rcvd1","expr":"rcvd1_final"}]"#,
    )
    .unwrap();
    let arg = format!("file:{}", path.display());
    let o = kbpcheck(&["refine", "--predicates", &arg]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    std::fs::write(&path, "[]").unwrap();
    assert_eq!(
        kbpcheck(&["refine", "--predicates", &arg]).status.code(),
        Some(2)
    );
}

#[test]
fn synthesize_and_trace() {
    let o = kbpcheck(&[
        "synthesize",
        "--formula",
        "K[C1](C1.msg == 1)",
        "--at",
        "end",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("msg"));

    let t = kbpcheck(&[
        "trace",
        "--assign",
        "slot_request=[2,2,2];msg=[1,1,1]",
        "--format",
        "json",
    ]);
    assert_eq!(t.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&t)).unwrap();
    assert_eq!(v["rr"], serde_json::json!([0, 1, 0, 0, 1, 0]));
}

#[test]
fn conservative_mode_with_synthesized_kc() {
    let o = kbpcheck(&[
        "check",
        "--spec",
        "1c",
        "--mode",
        "conservative",
        "--predicates",
        "synthesized",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
