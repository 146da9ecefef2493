//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`. Golden files under
//! `tests/golden` are rewritten when `UPDATE_GOLDEN=1`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kbpcheck::dc::{
    builtin_predicate, candidate_system, check_spec, dc_system, refine_predicates, spec,
    spec_instances, synthesize_kc, synthesize_target, target_formula, DcParams, Implementation,
    Library, Mode, PredicateSet, ScenarioKind, SpecId, Target, AGENTS,
};
use kbpcheck::engine::{
    contributions, key_name, label_local, round_results, said_name, verify_kbp_fixpoint, EngineMode,
};
use kbpcheck::formula::{Direction, Evaluator};
use kbpcheck::model::{AgentId, InterpretedSystem, Point, Value};
use kbpcheck::reduction::{blocks_refine, compare_systems, random_suite};
use kbpcheck::{eval_at, parse_formula, Formula};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: kbpcheck::Error) -> String {
    e.to_string()
}

fn reference_system(params: &DcParams) -> Result<InterpretedSystem, String> {
    candidate_system(
        params,
        &PredicateSet::reference(params.slots).map_err(err)?,
        EngineMode::Reduced,
    )
    .map_err(err)
}

/// Run whose initial values are the given vectors, found by reading the
/// system rather than assuming an enumeration order.
fn find_run(sys: &InterpretedSystem, sr: [Value; 3], msg: [Value; 3]) -> Result<usize, String> {
    (0..sys.run_count())
        .find(|&r| {
            AGENTS.iter().enumerate().all(|(a, name)| {
                let p = Point::new(r, 0);
                sys.value_of(p, &format!("{name}.slot_request")).ok() == Some(sr[a])
                    && sys.value_of(p, &format!("{name}.msg")).ok() == Some(msg[a])
            })
        })
        .ok_or_else(|| format!("no run with slot_request={sr:?} msg={msg:?}"))
}

/// Round results computed by hand from the protocol description: reserve
/// slot `sr` in round `sr`, then transmit `msg` in slot `sr` unless the
/// reservation round came out 0.
fn expected_rr(sr: [Value; 3], msg: [Value; 3], slots: usize) -> Vec<u8> {
    let mut rr = vec![0u8; 2 * slots];
    for s in 1..=slots {
        rr[s - 1] = sr.iter().filter(|&&x| x == s as Value).count() as u8 % 2;
    }
    for s in 1..=slots {
        let mut x = 0;
        for a in 0..3 {
            if sr[a] == s as Value && rr[s - 1] == 1 {
                x ^= msg[a] as u8;
            }
        }
        rr[slots + s - 1] = x;
    }
    rr
}

fn golden(name: &str, actual: &str) -> Result<(), String> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name]
        .iter()
        .collect();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure(expected == actual, || {
        format!("{name} differs from golden:\n{actual}")
    })
}

fn spec_1s() -> Outcome {
    let start = Instant::now();
    let params = DcParams::default();
    let sys = reference_system(&params)?;
    let report = check_spec(&sys, &params, SpecId::S1s, None, None).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(report.holds(), || report.to_text())?;
    ensure(report.instances.len() == 9, || {
        format!("{} instances", report.instances.len())
    })?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    // The other placement of the negation does not satisfy it.
    let mut literal = PredicateSet::reference(3).map_err(err)?;
    literal
        .define(
            &builtin_predicate("kc_literal", 3).map_err(err)?,
            3,
            &Library::builtin(3),
        )
        .map_err(err)?;
    let lsys = candidate_system(&params, &literal, EngineMode::Reduced).map_err(err)?;
    ensure(
        !check_spec(&lsys, &params, SpecId::S1s, None, None)
            .map_err(err)?
            .holds(),
        || "kc_literal holds".into(),
    )?;
    Ok(format!(
        "9 instances hold in {elapsed:.2?}; kc_literal fails"
    ))
}

fn spec_2() -> Outcome {
    let params = DcParams::default();
    let sys = reference_system(&params)?;
    let report = check_spec(&sys, &params, SpecId::S2, None, None).map_err(err)?;
    ensure(!report.holds(), || "spec 2 holds".into())?;
    let a = find_run(&sys, [2, 2, 2], [1, 1, 1])?;
    let b = find_run(&sys, [2, 0, 0], [1, 1, 1])?;
    for t in 0..=params.horizon() {
        let same = sys.partition(AgentId(0), t).map_err(err)?.same_block(a, b);
        ensure(same, || format!("C1 distinguishes the pair at time {t}"))?;
    }
    let conflict = parse_formula("conflict(2)", &params.vocabulary().map_err(err)?).map_err(err)?;
    let end = params.end_time();
    ensure(
        eval_at(&sys, &conflict, Point::new(a, end)).map_err(err)?,
        || "no conflict(2) in first run".into(),
    )?;
    ensure(
        !eval_at(&sys, &conflict, Point::new(b, end)).map_err(err)?,
        || "conflict(2) in second run".into(),
    )?;
    let collision_rr = vec![0, 1, 0, 0, 1, 0];
    let (ra, rb) = (
        round_results(&sys, a).map_err(err)?,
        round_results(&sys, b).map_err(err)?,
    );
    ensure(ra == collision_rr && rb == collision_rr, || {
        format!("rr {ra:?} / {rb:?}")
    })?;
    ensure(
        expected_rr([2, 2, 2], [1, 1, 1], 3) == collision_rr
            && expected_rr([2, 0, 0], [1, 1, 1], 3) == collision_rr,
        || "hand-computed rr differs".into(),
    )?;
    let (f, t) = spec(SpecId::S2, &params, 0, Some(2)).map_err(err)?;
    ensure(!eval_at(&sys, &f, Point::new(a, t)).map_err(err)?, || {
        "C1 slot 2 instance true at the pair".into()
    })?;
    Ok(format!(
        "pair runs {a}/{b} share C1 blocks at all times, rr = {collision_rr:?}"
    ))
}

fn spec_3() -> Outcome {
    let params = DcParams::default();
    let sys = reference_system(&params)?;
    let report = check_spec(&sys, &params, SpecId::S3, None, None).map_err(err)?;
    ensure(!report.holds(), || "spec 3 holds".into())?;
    let a = find_run(&sys, [2, 2, 2], [1, 1, 1])?;
    let (f, t) = spec(SpecId::S3, &params, 0, Some(2)).map_err(err)?;
    ensure(!eval_at(&sys, &f, Point::new(a, t)).map_err(err)?, || {
        "instance true at the collision run".into()
    })?;
    Ok(format!("C1 slot 2 instance false at run {a}"))
}

/// `predicate` false and the knowledge formula true at this run.
fn knowledge_without_candidate(
    sys: &InterpretedSystem,
    params: &DcParams,
    name: &str,
    run: usize,
    agent: usize,
    slot: usize,
) -> Result<(), String> {
    let (know, time) = target_formula(Target::ConflictFree, params, agent, slot).map_err(err)?;
    let pred = builtin_predicate(name, 3)
        .map_err(err)?
        .instantiate(slot, 3, &Library::builtin(3))
        .map_err(err)?;
    let cand = label_local(sys, &pred, AgentId(agent), time).map_err(err)?;
    ensure(
        eval_at(sys, &know, Point::new(run, time)).map_err(err)?,
        || format!("{name}: knowledge false at run {run}"),
    )?;
    ensure(!cand.get(run), || {
        format!("{name}: candidate true at run {run}")
    })
}

fn cf_chain() -> Outcome {
    let params = DcParams::default();
    let base = PredicateSet::reference(3).map_err(err)?;
    let defs: Vec<_> = ["cf1", "cf2", "cf3"]
        .iter()
        .map(|n| builtin_predicate(n, 3))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let r =
        refine_predicates(&params, EngineMode::Reduced, &base, &defs, None, None).map_err(err)?;
    let seq: Vec<bool> = r.entries.iter().map(|e| e.verdict.holds()).collect();
    ensure(seq == [false, false, true], || format!("sequence {seq:?}"))?;
    for e in &r.entries[..2] {
        let d = e.verdict.counterexample.as_ref().and_then(|c| c.direction);
        ensure(d == Some(Direction::KnowledgeTrueCandidateFalse), || {
            format!("{}: direction {d:?}", e.name)
        })?;
    }
    let sys = reference_system(&params)?;
    let w1 = find_run(&sys, [3, 1, 3], [0, 0, 0])?;
    let rr = round_results(&sys, w1).map_err(err)?;
    ensure(rr[..3] == [1, 0, 0], || {
        format!("reservation rr {:?}", &rr[..3])
    })?;
    knowledge_without_candidate(&sys, &params, "cf1", w1, 0, 1)?;
    // One agent requests slot 1, the evaluating agent requests nothing.
    let w2 = find_run(&sys, [0, 0, 1], [0, 0, 0])?;
    knowledge_without_candidate(&sys, &params, "cf2", w2, 0, 1)?;
    Ok("fail/fail/hold; witnesses [3,1,3] and [0,0,1] validated for C1 slot 1".into())
}

fn rcvd() -> Outcome {
    let params = DcParams::default();
    let lib = Library::builtin(3);
    let with = |name: &str| -> Result<InterpretedSystem, String> {
        let mut set = PredicateSet::reference(3).map_err(err)?;
        set.define(&builtin_predicate(name, 3).map_err(err)?, 3, &lib)
            .map_err(err)?;
        candidate_system(&params, &set, EngineMode::Reduced).map_err(err)
    };
    let g1 = with("rcvd1_g1")?;
    ensure(
        !check_spec(&g1, &params, SpecId::S4b, None, None)
            .map_err(err)?
            .holds(),
        || "rcvd1_g1 holds".into(),
    )?;
    let run = find_run(&g1, [1, 1, 1], [1, 1, 0])?;
    let (know, time) = target_formula(Target::Rcvd1, &params, 0, 1).map_err(err)?;
    let spec4b = spec(SpecId::S4b, &params, 0, Some(1)).map_err(err)?.0;
    ensure(
        eval_at(&g1, &know, Point::new(run, time)).map_err(err)?,
        || "C1 does not know a 1 was sent".into(),
    )?;
    ensure(
        g1.value_of(Point::new(run, time), "C1.rcvd1[1]")
            .map_err(err)?
            == 0,
        || "rcvd1_g1 true".into(),
    )?;
    ensure(
        !eval_at(&g1, &spec4b, Point::new(run, time)).map_err(err)?,
        || "4b instance true at witness".into(),
    )?;

    let sys = reference_system(&params)?;
    for id in [SpecId::S4a, SpecId::S4b] {
        ensure(
            check_spec(&sys, &params, id, None, None)
                .map_err(err)?
                .holds(),
            || format!("spec {id} fails with final predicates"),
        )?;
    }

    let literal = with("rcvd1_literal")?;
    let lit_report = check_spec(&literal, &params, SpecId::S4b, None, None).map_err(err)?;
    ensure(!lit_report.holds(), || "rcvd1_literal holds".into())?;
    let mut synthesized = PredicateSet::reference(3).map_err(err)?;
    let mut divergence = None;
    for a in 0..3 {
        for s in 1..=3 {
            let syn = synthesize_target(
                &params,
                EngineMode::Reduced,
                &synthesized,
                Target::Rcvd1,
                a,
                s,
            )
            .map_err(err)?;
            let expr = syn.expr.clone().ok_or("no closed form")?;
            if divergence.is_none() {
                let lit = builtin_predicate("rcvd1_literal", 3)
                    .map_err(err)?
                    .instantiate(s, 3, &lib)
                    .map_err(err)?;
                let lit_bits = label_local(&sys, &lit, AgentId(a), syn.time).map_err(err)?;
                let exact = syn.label(&sys).map_err(err)?;
                if let Some(r) = lit_bits.xor(&exact).first_one() {
                    let block = sys.partition(AgentId(a), syn.time).map_err(err)?.block(r);
                    let class = syn
                        .classes
                        .iter()
                        .find(|c| c.block == block)
                        .ok_or("run outside classes")?;
                    let observed: Vec<String> = syn
                        .features
                        .iter()
                        .enumerate()
                        .filter_map(|(k, f)| {
                            match (class.features >> k & 1 == 1, f.contains("==")) {
                                (true, _) => Some(f.clone()),
                                (false, false) => Some(format!("!{f}")),
                                (false, true) => None,
                            }
                        })
                        .collect();
                    divergence = Some(format!(
                        "{} slot {s}, class [{}]: literal {} vs exact {}",
                        AGENTS[a],
                        observed.join(" && "),
                        lit_bits.get(r),
                        exact.get(r)
                    ));
                }
            }
            synthesized.set(Target::Rcvd1, a, s, expr, "rcvd1_synthesized");
        }
    }
    let ssys = candidate_system(&params, &synthesized, EngineMode::Reduced).map_err(err)?;
    ensure(
        check_spec(&ssys, &params, SpecId::S4b, None, None)
            .map_err(err)?
            .holds(),
        || "synthesized rcvd1 fails 4b".into(),
    )?;
    let divergence = divergence.ok_or("literal agrees with the exact predicate")?;
    Ok(format!("g1 witness [1,1,1]/[1,1,0] validated; final 4a/4b hold; literal fails, synthesized holds; first difference {divergence}"))
}

fn specs_5_6() -> Outcome {
    let start = Instant::now();
    let params = DcParams::default();
    let sys = reference_system(&params)?;
    for id in [SpecId::S5, SpecId::S6] {
        let r = check_spec(&sys, &params, id, None, None).map_err(err)?;
        ensure(r.holds(), || r.to_text())?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("both hold in {elapsed:.2?}"))
}

struct TwoSlot {
    params: DcParams,
    naive: InterpretedSystem,
    reduced: InterpretedSystem,
    build_time: Duration,
}

fn two_slot() -> Result<TwoSlot, String> {
    let start = Instant::now();
    let params = DcParams::new(2, Mode::Speculative, ScenarioKind::Unknown);
    let set = PredicateSet::reference(2).map_err(err)?;
    let naive = candidate_system(&params, &set, EngineMode::Naive).map_err(err)?;
    let reduced = candidate_system(&params, &set, EngineMode::Reduced).map_err(err)?;
    Ok(TwoSlot {
        params,
        naive,
        reduced,
        build_time: start.elapsed(),
    })
}

fn oracle(t: &TwoSlot) -> Outcome {
    let start = Instant::now();
    ensure(t.naive.run_count() == 884_736, || {
        format!("{} naive runs", t.naive.run_count())
    })?;
    let mut suite = Vec::new();
    for id in SpecId::ALL {
        for (a, s) in spec_instances(id, &t.params) {
            suite.push(spec(id, &t.params, a, s).map_err(err)?.0);
        }
    }
    let analogues = suite.len();
    suite.extend(random_suite(t.reduced.signature(), 0, 200, 3));
    let report = compare_systems(&t.naive, &t.reduced, &suite).map_err(err)?;
    let elapsed = t.build_time + start.elapsed();
    ensure(report.agree(), || {
        format!(
            "{} divergences, {} verdict mismatches",
            report.divergences.len(),
            report.verdict_mismatches
        )
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{analogues} spec analogues + 200 random formulas, {} checks agree in {elapsed:.1?}",
        report.checks
    ))
}

fn kbp_fixpoint() -> Outcome {
    let params = DcParams::default();
    let (model, kbp) =
        dc_system(&params, &Implementation::Kbp, EngineMode::Reduced).map_err(err)?;
    let cand = reference_system(&params)?;
    ensure(kbp.run_count() == 512 && cand.run_count() == 512, || {
        format!("{} / {} runs", kbp.run_count(), cand.run_count())
    })?;
    for r in 0..512 {
        let c = cand
            .find_run(kbp.origin(r))
            .ok_or_else(|| format!("run {r} missing from candidate system"))?;
        ensure(
            contributions(&kbp, r).map_err(err)? == contributions(&cand, c).map_err(err)?,
            || format!("contribution matrices differ at run {r}"),
        )?;
    }
    let mismatches = verify_kbp_fixpoint(&model, &kbp).map_err(err)?;
    ensure(mismatches.is_empty(), || {
        format!("{} fixpoint mismatches", mismatches.len())
    })?;
    Ok("512 contribution matrices identical".into())
}

fn conservative_and_referendum() -> Outcome {
    let mut text = String::new();
    let cons = DcParams {
        mode: Mode::Conservative,
        ..DcParams::default()
    };
    let (set, syn) = synthesize_kc(
        &cons,
        EngineMode::Reduced,
        &PredicateSet::reference(3).map_err(err)?,
    )
    .map_err(err)?;
    for (k, s) in syn.iter().enumerate() {
        let _ = writeln!(
            text,
            "{} kc[{}] := {}",
            AGENTS[k % 3],
            k / 3 + 1,
            s.text().unwrap_or_default()
        );
    }
    let csys = candidate_system(&cons, &set, EngineMode::Reduced).map_err(err)?;
    ensure(
        check_spec(&csys, &cons, SpecId::S1c, None, None)
            .map_err(err)?
            .holds(),
        || "spec 1c fails".into(),
    )?;
    golden("conservative_kc.txt", &text)?;

    let referendum = DcParams {
        scenario: ScenarioKind::Referendum,
        ..DcParams::default()
    };
    let rsys = reference_system(&referendum)?;
    let mut summary = String::new();
    for id in [
        SpecId::S2,
        SpecId::S3,
        SpecId::S4a,
        SpecId::S4b,
        SpecId::S5,
        SpecId::S6,
    ] {
        let r = check_spec(&rsys, &referendum, id, None, None).map_err(err)?;
        let _ = writeln!(
            summary,
            "spec {id}: {}",
            if r.holds() { "holds" } else { "fails" }
        );
    }
    golden("referendum_specs.txt", &summary)?;
    Ok(format!(
        "1c holds with synthesized kc; referendum {}",
        summary.trim().replace('\n', ", ")
    ))
}

fn properties(t: &TwoSlot) -> Outcome {
    let params = DcParams::default();
    let sys = reference_system(&params)?;
    let mut ev = Evaluator::new(&sys);
    let suite = random_suite(sys.signature(), 7, 1000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for phi in &suite {
        let agent = AGENTS[rng.gen_range(0..3)];
        let latest = sys.horizon() - phi.temporal_depth();
        let p = Point::new(rng.gen_range(0..sys.run_count()), rng.gen_range(0..=latest));
        let k = Formula::know(agent, phi.clone());
        let truth = Formula::implies(k.clone(), phi.clone());
        let intro = Formula::implies(k.clone(), Formula::know(agent, k));
        ensure(ev.eval(&truth, p).map_err(err)?, || {
            format!("truth fails for {agent} at {p}: {phi}")
        })?;
        ensure(ev.eval(&intro, p).map_err(err)?, || {
            format!("introspection fails for {agent} at {p}: {phi}")
        })?;
    }
    for s in [&sys, &t.naive] {
        for a in 0..3 {
            for time in 0..s.horizon() {
                let (now, next) = (
                    s.partition(AgentId(a), time).map_err(err)?,
                    s.partition(AgentId(a), time + 1).map_err(err)?,
                );
                let mut image = vec![None; next.num_blocks()];
                for r in 0..s.run_count() {
                    let b = &mut image[next.block(r) as usize];
                    match *b {
                        None => *b = Some(now.block(r)),
                        Some(x) => ensure(x == now.block(r), || {
                            format!("{} block splits backwards at {time}", AGENTS[a])
                        })?,
                    }
                }
            }
        }
    }
    for a in 0..3 {
        for time in 0..=t.naive.horizon() {
            ensure(
                blocks_refine(&t.naive, &t.reduced, AgentId(a), time).map_err(err)?,
                || "naive blocks straddle reduced ones".to_string(),
            )?;
        }
    }
    let sig = t.naive.signature();
    let keys: Vec<_> = (0..3)
        .map(|e| sig.var_id(&key_name(e, 3)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let said: Vec<_> = (0..3)
        .map(|i| sig.var_id(&said_name(i)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let contrib: Vec<_> = AGENTS
        .iter()
        .map(|a| sig.var_id(&format!("{a}.contrib")))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let rr: Vec<_> = (1..=t.naive.horizon())
        .map(|u| sig.var_id(&format!("rr[{u}]")))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    for r in 0..t.naive.run_count() {
        for u in 1..=t.naive.horizon() {
            let p = Point::new(r, u);
            let v = |id| t.naive.value(p, id);
            let mut xor_said = 0;
            let mut xor_contrib = 0;
            for i in 0..3 {
                let announced = v(keys[(i + 2) % 3]) ^ v(keys[i]) ^ v(contrib[i]);
                ensure(v(said[i]) == announced, || {
                    format!("announcement mismatch at run {r} step {u}")
                })?;
                xor_said ^= v(said[i]);
                xor_contrib ^= v(contrib[i]);
            }
            ensure(xor_said == xor_contrib && xor_said == v(rr[u - 1]), || {
                format!("keys do not cancel at run {r} step {u}")
            })?;
        }
    }
    Ok(format!(
        "1000 samples, partitions refine, keys cancel on {} naive runs",
        t.naive.run_count()
    ))
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut record = |n: usize, title: &str, outcome: Outcome| {
        let line = match &outcome {
            Ok(detail) => format!("criterion {n:>2} PASS  {title}: {detail}"),
            Err(why) => format!("criterion {n:>2} FAIL  {title}: {why}"),
        };
        println!("{line}");
        lines.push(outcome.is_ok());
    };
    record(1, "spec 1s holds", spec_1s());
    record(
        2,
        "spec 2 fails with an indistinguishable collision pair",
        spec_2(),
    );
    record(3, "spec 3 fails at the three-way collision run", spec_3());
    record(4, "conflict-free refinement chain", cf_chain());
    record(5, "reception predicates", rcvd());
    record(6, "specs 5 and 6 hold", specs_5_6());
    let two = two_slot();
    match &two {
        Ok(t) => {
            record(7, "engine equivalence oracle", oracle(t));
            record(8, "KBP fixpoint", kbp_fixpoint());
            record(
                9,
                "conservative and referendum",
                conservative_and_referendum(),
            );
            record(10, "property suites", properties(t));
        }
        Err(e) => {
            record(7, "engine equivalence oracle", Err(e.clone()));
            record(8, "KBP fixpoint", kbp_fixpoint());
            record(
                9,
                "conservative and referendum",
                conservative_and_referendum(),
            );
            record(10, "property suites", Err(e.clone()));
        }
    }
    let failed = lines.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
