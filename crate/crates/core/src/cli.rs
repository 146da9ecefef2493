//! Command-line front end. Exit status: 0 holds, 1 fails, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use crate::dc::{
    build_cdc, builtin_predicate, candidate_system, check_spec, dc_system, model_slots,
    parse_predicate_file, refine_predicates, spec, spec_instances, synthesize_kc,
    synthesize_target, DcParams, Implementation, Library, Mode, PredicateDef, PredicateSet,
    ScenarioFile, ScenarioKind, SpecId, Target, AGENTS,
};
use crate::engine::EngineMode;
use crate::error::{Error, Result};
use crate::formula::{parse_formula, Formula};
use crate::model::{Point, Value};
use crate::reduction::{engines_agree, random_suite, Fault};
use crate::refine::{
    direction_text, render_witnesses, synthesize_predicate, RefinementReport, SynthesizedPredicate,
    Witness,
};

#[derive(Debug, Parser)]
#[command(
    name = "kbpcheck",
    version,
    about = "Epistemic model checking of knowledge-based programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Reduced,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImplKind {
    /// Knowledge tests replaced by the selected predicates.
    Candidate,
    /// The knowledge-based program, executed to its fixpoint.
    Kbp,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// dc3 (three slots) or dc2 (two slots).
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// unknown | referendum | pinned | custom:EXPR | file:PATH
    #[arg(long, global = true, default_value = "unknown")]
    pub scenario: String,
    /// Initial vectors for a pinned scenario, e.g. "slot_request=[2,2,2];msg=[1,1,1]".
    #[arg(long, global = true)]
    pub assign: Option<String>,
    #[arg(long, global = true, default_value = "speculative")]
    pub mode: String,
    #[arg(long, global = true, value_enum, default_value = "reduced")]
    pub engine: Engine,
    #[arg(long = "impl", global = true, value_enum, default_value = "candidate")]
    pub implementation: ImplKind,
    /// reference | synthesized | file:PATH (definitions layered over the reference set).
    #[arg(long, global = true, default_value = "reference")]
    pub predicates: String,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a specification (or `all`) at its scheduled times.
    Check {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long)]
        slot: Option<usize>,
    },
    /// Check a sequence of candidate predicates for one target, in order.
    Refine {
        /// Builtin predicate names, comma separated (alternative to a predicate file).
        #[arg(long, value_delimiter = ',')]
        chain: Vec<String>,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long)]
        slot: Option<usize>,
    },
    /// Exact local predicate for a knowledge formula or a predicate target.
    Synthesize {
        #[arg(long, conflicts_with = "target")]
        formula: Option<String>,
        /// kc | conflict_free | rcvd0 | rcvd1 | dlvrd
        #[arg(long)]
        target: Option<String>,
        /// res:S | pre:S | tx:S | end | INT
        #[arg(long)]
        at: Option<String>,
        #[arg(long)]
        agent: Option<String>,
        #[arg(long)]
        slot: Option<usize>,
    },
    /// Contribution table of a pinned run.
    Trace,
    /// Compare the reduced engine against exhaustive key enumeration.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random formulas.
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Let C1 also observe C2's contribution in the reduced engine.
        #[arg(long)]
        inject_fault: bool,
    },
}

/// Parse arguments, run, write the report to `out`, return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok((holds, report)) => {
            let _ = out.write_all(report.as_bytes());
            if holds {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn execute(cli: &Cli) -> Result<(bool, String)> {
    let c = &cli.common;
    let default_model = if matches!(cli.command, Command::Oracle { .. }) {
        "dc2"
    } else {
        "dc3"
    };
    let params = params(c, default_model)?;
    let engine = match c.engine {
        Engine::Reduced => EngineMode::Reduced,
        Engine::Naive => EngineMode::Naive,
    };
    match &cli.command {
        Command::Check { spec, agent, slot } => {
            cmd_check(c, &params, engine, spec, agent.as_deref(), *slot)
        }
        Command::Refine { chain, agent, slot } => {
            cmd_refine(c, &params, engine, chain, agent.as_deref(), *slot)
        }
        Command::Synthesize {
            formula,
            target,
            at,
            agent,
            slot,
        } => cmd_synthesize(
            c,
            &params,
            engine,
            formula.as_deref(),
            target.as_deref(),
            at.as_deref(),
            agent.as_deref(),
            *slot,
        ),
        Command::Trace => cmd_trace(c, &params, engine),
        Command::Oracle {
            seed,
            count,
            depth,
            inject_fault,
        } => cmd_oracle(c, &params, *seed, *count, *depth, *inject_fault),
    }
}

fn params(c: &Common, default_model: &str) -> Result<DcParams> {
    let slots = model_slots(c.model.as_deref().unwrap_or(default_model))?;
    let mode: Mode = c.mode.parse()?;
    let scenario = match c.scenario.as_str() {
        "unknown" if c.assign.is_none() => ScenarioKind::Unknown,
        "referendum" => ScenarioKind::Referendum,
        // An explicit assignment pins the default scenario.
        "pinned" | "unknown" => {
            let text = c
                .assign
                .as_deref()
                .ok_or_else(|| Error::usage("--scenario pinned needs --assign"))?;
            parse_assign(text)?
        }
        s if s.starts_with("custom:") => ScenarioKind::Custom(s["custom:".len()..].to_string()),
        s if s.starts_with("file:") => {
            if c.assign.is_some() {
                return Err(Error::usage("--assign only applies to --scenario pinned"));
            }
            let text = std::fs::read_to_string(&s["file:".len()..])?;
            let from_file = ScenarioFile::parse(&text)?.params(slots, mode)?;
            return Ok(from_file);
        }
        other => return Err(Error::usage(format!("unknown scenario `{other}`"))),
    };
    if c.assign.is_some() && !matches!(scenario, ScenarioKind::Pinned { .. }) {
        return Err(Error::usage("--assign only applies to --scenario pinned"));
    }
    let p = DcParams {
        slots,
        mode,
        scenario,
    };
    p.scenario()?;
    Ok(p)
}

/// `slot_request=[2,2,2];msg=[1,1,1]`
pub fn parse_assign(text: &str) -> Result<ScenarioKind> {
    let mut sr = None;
    let mut msg = None;
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, list) = part
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("bad assignment `{part}`")))?;
        let list = list.trim();
        let inner = list
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| Error::usage(format!("expected [..] in `{part}`")))?;
        let values: Vec<Value> = inner
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<Value>()
                    .map_err(|_| Error::usage(format!("bad value `{v}` in `{part}`")))
            })
            .collect::<Result<_>>()?;
        if values.len() != AGENTS.len() {
            return Err(Error::usage(format!(
                "`{}` needs {} values",
                name.trim(),
                AGENTS.len()
            )));
        }
        match name.trim() {
            "slot_request" => sr = Some(values),
            "msg" => msg = Some(values),
            other => {
                return Err(Error::usage(format!(
                    "unknown variable `{other}` in --assign"
                )))
            }
        }
    }
    match (sr, msg) {
        (Some(slot_request), Some(msg)) => Ok(ScenarioKind::Pinned { slot_request, msg }),
        _ => Err(Error::usage("--assign needs both slot_request and msg")),
    }
}

fn agent_index(name: Option<&str>) -> Result<Option<usize>> {
    name.map(|n| {
        AGENTS
            .iter()
            .position(|a| *a == n)
            .ok_or_else(|| Error::UnknownAgent(n.to_string()))
    })
    .transpose()
}

fn predicate_defs(spec: &str) -> Result<Option<Vec<PredicateDef>>> {
    match spec {
        "reference" | "synthesized" => Ok(None),
        s if s.starts_with("file:") => {
            let text = std::fs::read_to_string(&s["file:".len()..])?;
            Ok(Some(parse_predicate_file(&text)?))
        }
        other => Err(Error::usage(format!("unknown predicate source `{other}`"))),
    }
}

/// Predicate set selected by `--predicates`.
fn predicate_set(c: &Common, params: &DcParams, engine: EngineMode) -> Result<PredicateSet> {
    let mut set = PredicateSet::reference(params.slots)?;
    match predicate_defs(&c.predicates)? {
        None if c.predicates == "synthesized" => Ok(synthesize_kc(params, engine, &set)?.0),
        None => Ok(set),
        Some(defs) => {
            let mut lib = Library::builtin(params.slots);
            for d in defs {
                lib.add(d.clone());
                set.define(&d, params.slots, &lib)?;
            }
            Ok(set)
        }
    }
}

fn implementation(c: &Common, params: &DcParams, engine: EngineMode) -> Result<Implementation> {
    Ok(match c.implementation {
        ImplKind::Kbp => Implementation::Kbp,
        ImplKind::Candidate => Implementation::Candidate(predicate_set(c, params, engine)?),
    })
}

fn json_text(v: &Json) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn cmd_check(
    c: &Common,
    params: &DcParams,
    engine: EngineMode,
    spec_name: &str,
    agent: Option<&str>,
    slot: Option<usize>,
) -> Result<(bool, String)> {
    let ids: Vec<SpecId> = if spec_name == "all" {
        SpecId::ALL.to_vec()
    } else {
        vec![spec_name.parse()?]
    };
    let agent = agent_index(agent)?;
    let (_, sys) = dc_system(params, &implementation(c, params, engine)?, engine)?;
    let mut reports = Vec::new();
    for id in ids {
        if c.implementation == ImplKind::Kbp && matches!(id, SpecId::S1s | SpecId::S1c) {
            if spec_name == "all" {
                continue;
            }
            return Err(Error::usage(format!(
                "spec {id} constrains kc, which the knowledge-based program does not have"
            )));
        }
        reports.push(check_spec(&sys, params, id, agent, slot)?);
    }
    let holds = reports.iter().all(|r| r.holds());
    let text = match c.format {
        Format::Json if reports.len() == 1 => json_text(&reports[0].to_json()),
        Format::Json => json_text(&json!({
            "verdict": if holds { "holds" } else { "fails" },
            "specs": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        })),
        Format::Text if reports.len() == 1 => reports[0].to_text(),
        Format::Text => reports
            .iter()
            .map(|r| {
                format!(
                    "spec {}: {}\n",
                    r.spec,
                    if r.holds() { "HOLDS" } else { "FAILS" }
                )
            })
            .collect(),
    };
    Ok((holds, text))
}

fn refinement_json(target: Target, r: &RefinementReport) -> Json {
    json!({
        "target": target.name(),
        "verdict": if r.holds() { "holds" } else { "fails" },
        "candidates": r.entries.iter().map(|e| {
            let mut v = json!({
                "name": e.name,
                "verdict": if e.verdict.holds() { "holds" } else { "fails" },
                "witnesses": e.witnesses.iter().map(Witness::to_json).collect::<Vec<_>>(),
            });
            if let Some((agent, time)) = &e.failed {
                v["agent"] = json!(agent);
                v["time"] = json!(time);
            }
            if let Some(d) = e.verdict.counterexample.as_ref().and_then(|cx| cx.direction) {
                v["direction"] = json!(direction_text(d));
            }
            v
        }).collect::<Vec<_>>(),
        "warnings": r.warnings,
    })
}

fn refinement_text(target: Target, r: &RefinementReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "target {target}");
    for e in &r.entries {
        match (&e.failed, &e.verdict.counterexample) {
            (Some((agent, time)), Some(cx)) => {
                let _ = writeln!(out, "\n{}: FAILS ({agent} at time {time})", e.name);
                out.push_str(&render_witnesses(cx, &e.witnesses));
            }
            _ => {
                let _ = writeln!(out, "\n{}: HOLDS", e.name);
            }
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(
        out,
        "\nfinal: {}",
        if r.holds() { "HOLDS" } else { "FAILS" }
    );
    out
}

fn cmd_refine(
    c: &Common,
    params: &DcParams,
    engine: EngineMode,
    chain: &[String],
    agent: Option<&str>,
    slot: Option<usize>,
) -> Result<(bool, String)> {
    let defs = match (chain.is_empty(), predicate_defs(&c.predicates)?) {
        (false, None) => chain
            .iter()
            .map(|n| builtin_predicate(n, params.slots))
            .collect::<Result<Vec<_>>>()?,
        (true, Some(defs)) => defs,
        (false, Some(_)) => {
            return Err(Error::usage(
                "give either --chain or --predicates file:PATH, not both",
            ))
        }
        (true, None) => {
            return Err(Error::usage(
                "refine needs --chain or --predicates file:PATH",
            ))
        }
    };
    let Some(target) = defs.first().map(|d| d.target) else {
        return Err(Error::usage("the predicate file is empty"));
    };
    let base = PredicateSet::reference(params.slots)?;
    let report = refine_predicates(params, engine, &base, &defs, agent_index(agent)?, slot)?;
    let text = match c.format {
        Format::Json => json_text(&refinement_json(target, &report)),
        Format::Text => refinement_text(target, &report),
    };
    Ok((report.holds(), text))
}

/// `res:S`, `pre:S`, `tx:S`, `end` or a plain time.
pub fn parse_at(text: &str, params: &DcParams) -> Result<usize> {
    let slot = |s: &str| -> Result<usize> {
        let v: usize = s
            .parse()
            .map_err(|_| Error::usage(format!("bad slot in `--at {text}`")))?;
        if v == 0 || v > params.slots {
            return Err(Error::usage(format!(
                "slot {v} outside 1..={}",
                params.slots
            )));
        }
        Ok(v)
    };
    let t = match text.split_once(':') {
        Some(("res", s)) => params.reservation_time(slot(s)?),
        Some(("pre", s)) => params.pre_transmission_time(slot(s)?),
        Some(("tx", s)) => params.transmission_time(slot(s)?),
        None if text == "end" => params.end_time(),
        None => text
            .parse()
            .map_err(|_| Error::usage(format!("bad time `{text}`")))?,
        Some(_) => return Err(Error::usage(format!("bad time `{text}`"))),
    };
    if t > params.horizon() {
        return Err(Error::usage(format!(
            "time {t} exceeds horizon {}",
            params.horizon()
        )));
    }
    Ok(t)
}

/// The agent of an outermost `K` (possibly negated).
fn formula_agent(f: &Formula) -> Option<&str> {
    match f {
        Formula::Know(a, _) => Some(a),
        Formula::Not(x) => formula_agent(x),
        _ => None,
    }
}

fn synthesis_json(s: &SynthesizedPredicate) -> Json {
    json!({
        "target": s.formula.to_string(),
        "agent": s.agent,
        "time": s.time,
        "features": s.features,
        "classes": s.classes.iter().map(|c| json!({
            "run": c.representative.run,
            "runs": c.runs,
            "features": (0..s.features.len()).map(|k| c.features >> k & 1).collect::<Vec<_>>(),
            "value": c.value,
        })).collect::<Vec<_>>(),
        "predicate": s.text(),
    })
}

fn synthesis_text(s: &SynthesizedPredicate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} at time {}: {}", s.agent, s.time, s.formula);
    let trues = s.classes.iter().filter(|c| c.value).count();
    let _ = writeln!(out, "{} observation classes, {trues} true", s.classes.len());
    let _ = writeln!(out, "features:");
    for (k, f) in s.features.iter().enumerate() {
        let _ = writeln!(out, "  f{k}: {f}");
    }
    let _ = writeln!(
        out,
        "{:>6} {:>5}  {}  value",
        "run",
        "runs",
        (0..s.features.len())
            .map(|k| format!("f{k:<2}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for c in &s.classes {
        let bits: Vec<String> = (0..s.features.len())
            .map(|k| format!("{:<3}", c.features >> k & 1))
            .collect();
        let _ = writeln!(
            out,
            "{:>6} {:>5}  {}  {}",
            c.representative.run,
            c.runs,
            bits.join(" "),
            c.value as u8
        );
    }
    let _ = writeln!(
        out,
        "predicate: {}",
        s.text()
            .unwrap_or_else(|| "(not expressible over the features)".into())
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_synthesize(
    c: &Common,
    params: &DcParams,
    engine: EngineMode,
    formula: Option<&str>,
    target: Option<&str>,
    at: Option<&str>,
    agent: Option<&str>,
    slot: Option<usize>,
) -> Result<(bool, String)> {
    let base = predicate_set(c, params, engine)?;
    let results: Vec<SynthesizedPredicate> = match (formula, target) {
        (Some(text), None) => {
            let f = parse_formula(text, &params.vocabulary()?)?;
            let agent = match agent {
                Some(a) => a.to_string(),
                None => formula_agent(&f)
                    .ok_or_else(|| Error::usage("give --agent or a formula K[agent](..)"))?
                    .to_string(),
            };
            let time = parse_at(
                at.ok_or_else(|| Error::usage("--formula needs --at"))?,
                params,
            )?;
            let (_, sys) = dc_system(params, &implementation(c, params, engine)?, engine)?;
            vec![synthesize_predicate(&sys, &f, &agent, time)?]
        }
        (None, Some(t)) => {
            let target: Target = t.parse()?;
            if at.is_some() {
                return Err(Error::usage("--at is implied by --target"));
            }
            let agent = agent_index(agent)?;
            if target == Target::Kc {
                let synthesized = synthesize_kc(params, engine, &base)?.1;
                synthesized
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| {
                        let (a, s) = (i % AGENTS.len(), i / AGENTS.len() + 1);
                        agent.is_none_or(|x| x == a) && slot.is_none_or(|x| x == s)
                    })
                    .map(|(_, s)| s)
                    .collect()
            } else {
                let slots: Vec<usize> = if target.per_slot() {
                    (1..=params.slots)
                        .filter(|s| slot.is_none_or(|x| x == *s))
                        .collect()
                } else {
                    vec![0]
                };
                let mut out = Vec::new();
                for a in (0..AGENTS.len()).filter(|a| agent.is_none_or(|x| x == *a)) {
                    for s in &slots {
                        out.push(synthesize_target(params, engine, &base, target, a, *s)?);
                    }
                }
                out
            }
        }
        _ => {
            return Err(Error::usage(
                "synthesize needs exactly one of --formula and --target",
            ))
        }
    };
    let text = match c.format {
        Format::Json if results.len() == 1 => json_text(&synthesis_json(&results[0])),
        Format::Json => json_text(&Json::Array(results.iter().map(synthesis_json).collect())),
        Format::Text => results
            .iter()
            .map(synthesis_text)
            .collect::<Vec<_>>()
            .join("\n"),
    };
    Ok((true, text))
}

fn cmd_trace(c: &Common, params: &DcParams, engine: EngineMode) -> Result<(bool, String)> {
    if !matches!(params.scenario, ScenarioKind::Pinned { .. }) {
        return Err(Error::usage("trace needs --assign or a pinned scenario"));
    }
    let sys = candidate_system(params, &predicate_set(c, params, engine)?, engine)?;
    let w = Witness::of(&sys, Point::new(0, params.horizon()))?;
    Ok((
        true,
        match c.format {
            Format::Json => json_text(&w.to_json()),
            Format::Text => w.table(),
        },
    ))
}

fn cmd_oracle(
    c: &Common,
    params: &DcParams,
    seed: u64,
    count: usize,
    depth: usize,
    inject_fault: bool,
) -> Result<(bool, String)> {
    if c.implementation == ImplKind::Kbp {
        return Err(Error::usage(
            "the oracle compares candidate implementations",
        ));
    }
    let start = Instant::now();
    let model = build_cdc(
        params,
        &Implementation::Candidate(predicate_set(c, params, EngineMode::Reduced)?),
    )?;
    let mut suite = Vec::new();
    for id in SpecId::ALL {
        for (a, s) in spec_instances(id, params) {
            suite.push(spec(id, params, a, s)?.0);
        }
    }
    let analogues = suite.len();
    suite.extend(random_suite(
        &model.signature(EngineMode::Reduced)?,
        seed,
        count,
        depth,
    ));
    let fault = inject_fault.then(|| Fault {
        var: "C2.contrib".into(),
        observer: "C1".into(),
    });
    let report = engines_agree(&model, &params.scenario()?, &suite, fault.as_ref())?;
    let elapsed = start.elapsed().as_secs_f64();
    let text = match c.format {
        Format::Json => json_text(&json!({
            "verdict": if report.agree() { "agree" } else { "disagree" },
            "seed": seed,
            "naive_runs": report.naive_runs,
            "reduced_runs": report.reduced_runs,
            "spec_formulas": analogues,
            "random_formulas": count,
            "checks": report.checks,
            "disagreements": report.divergences.len(),
            "verdict_mismatches": report.verdict_mismatches,
            "fault_injected": inject_fault,
            "divergences": report.divergences.iter().map(|d| json!({
                "formula": d.formula, "time": d.time, "naive_run": d.naive_run,
                "reduced_run": d.reduced_run, "naive": d.naive_value, "reduced": d.reduced_value,
            })).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "seed {seed}");
            let _ = writeln!(
                out,
                "naive runs {}, reduced runs {}",
                report.naive_runs, report.reduced_runs
            );
            let _ = writeln!(
                out,
                "formulas: {analogues} spec analogues, {count} random (depth <= {depth})"
            );
            if inject_fault {
                let _ = writeln!(
                    out,
                    "fault injected: C1 observes C2.contrib in the reduced engine"
                );
            }
            let _ = writeln!(
                out,
                "checks {}, disagreements {}",
                report.checks,
                report.divergences.len()
            );
            for d in report.divergences.iter().take(10) {
                let _ = writeln!(
                    out,
                    "  t={} naive run {} = {}, reduced run {} = {}: {}",
                    d.time, d.naive_run, d.naive_value, d.reduced_run, d.reduced_value, d.formula
                );
            }
            let _ = writeln!(
                out,
                "{} in {elapsed:.1}s",
                if report.agree() { "AGREE" } else { "DISAGREE" }
            );
            out
        }
    };
    Ok((report.agree(), text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_and_times_parse() {
        assert_eq!(
            parse_assign("slot_request=[2,0,0]; msg=[1,1,1]").unwrap(),
            ScenarioKind::Pinned {
                slot_request: vec![2, 0, 0],
                msg: vec![1, 1, 1]
            }
        );
        assert!(parse_assign("slot_request=[2,0]").is_err());
        assert!(parse_assign("slot_request=[2,0,0]").is_err());
        assert!(parse_assign("x=[1,1,1];msg=[1,1,1]").is_err());
        let p = DcParams::default();
        assert_eq!(parse_at("res:3", &p).unwrap(), 3);
        assert_eq!(parse_at("pre:1", &p).unwrap(), 3);
        assert_eq!(parse_at("tx:2", &p).unwrap(), 5);
        assert_eq!(parse_at("end", &p).unwrap(), 6);
        assert_eq!(parse_at("4", &p).unwrap(), 4);
        assert!(parse_at("tx:4", &p).is_err());
        assert!(parse_at("7", &p).is_err());
        assert!(parse_at("later", &p).is_err());
    }
}
