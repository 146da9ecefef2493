//! Checking candidate predicates against the knowledge formulas they stand
//! in for, iterating candidate sequences, and synthesizing exact ones.

mod render;
mod sop;
mod synth;

pub use render::{direction_text, render_counterexample, render_witnesses, witnesses, Witness};
pub use sop::{minimize, Cube};
pub use synth::{synthesize_predicate, ObservationClass, SynthesizedPredicate};

use crate::bits::Bits;
use crate::engine::{label_local, LocalExpr};
use crate::error::{Error, Result};
use crate::formula::{
    Counterexample, Direction, Evaluator, Formula, Outcome, PairWitness, Verdict,
};
use crate::model::{InterpretedSystem, Point};

fn know_body<'f>(f: &'f Formula, agent: &str) -> Result<&'f Formula> {
    match f {
        Formula::Know(a, body) if a == agent => Ok(body),
        Formula::Not(x) => match x.as_ref() {
            Formula::Know(a, body) if a == agent => Ok(body),
            _ => Err(Error::usage(format!(
                "expected K[{agent}](..) or its negation, got `{f}`"
            ))),
        },
        _ => Err(Error::usage(format!(
            "expected K[{agent}](..) or its negation, got `{f}`"
        ))),
    }
}

/// Candidate truth set and verdict for one equivalence `predicate <=> know`.
fn check_labelled(
    sys: &InterpretedSystem,
    predicate: &LocalExpr,
    know: &Formula,
    agent: &str,
    time: usize,
) -> Result<(Bits, Verdict)> {
    let body = know_body(know, agent)?;
    let a = sys.signature().agent_id(agent)?;
    let cand = label_local(sys, predicate, a, time)?;
    let mut ev = Evaluator::new(sys);
    let k = ev.label(know, time)?;
    let Some(run) = cand.xor(&k).first_one() else {
        return Ok((cand, Verdict::pass()));
    };
    let primary = Point::new(run, time);
    let direction = if cand.get(run) {
        Direction::CandidateTrueKnowledgeFalse
    } else {
        Direction::KnowledgeTrueCandidateFalse
    };
    let secondary = if k.get(run) {
        ev.explain_false(&Formula::not(know.clone()), primary)?
    } else {
        ev.explain_false(know, primary)?
    };
    // The body failing at the primary point itself needs no second run.
    let secondary = secondary.filter(|w| w.point != primary);
    if let Some(w) = &secondary {
        validate_pair(&mut ev, a, body, primary, w)?;
    }
    let cx = Counterexample {
        formula: know.clone(),
        time,
        primary,
        secondary,
        direction: Some(direction),
    };
    Ok((
        cand,
        Verdict {
            outcome: Outcome::Fails,
            counterexample: Some(cx),
        },
    ))
}

/// Re-check an emitted pair by direct evaluation: one block, and the
/// knowledge body holds at the primary point but fails at the other.
fn validate_pair(
    ev: &mut Evaluator<'_>,
    agent: crate::model::AgentId,
    body: &Formula,
    p: Point,
    w: &PairWitness,
) -> Result<()> {
    let sys = ev.system();
    let same = sys.partition(agent, p.time)?.same_block(p.run, w.point.run);
    if !same || w.point.time != p.time || !ev.eval(body, p)? || ev.eval(body, w.point)? {
        return Err(Error::model(format!(
            "internal: invalid pair witness {p} / {}",
            w.point
        )));
    }
    Ok(())
}

/// `predicate <=> know` at every point at `time`. On failure, the least
/// disagreeing run, the direction, and (where the knowledge operator is
/// false) an indistinguishable run where its body fails.
pub fn check_candidate(
    sys: &InterpretedSystem,
    predicate: &LocalExpr,
    know: &Formula,
    agent: &str,
    time: usize,
) -> Result<Verdict> {
    Ok(check_labelled(sys, predicate, know, agent, time)?.1)
}

/// One equivalence a candidate must satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct Obligation {
    pub agent: String,
    pub time: usize,
    pub know: Formula,
    pub predicate: LocalExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub obligations: Vec<Obligation>,
}

/// Where candidates are checked: one shared system, or one rebuilt per
/// candidate (by index) when the predicate drives behaviour.
pub enum Systems<'a> {
    Fixed(&'a InterpretedSystem),
    PerCandidate(&'a dyn Fn(usize) -> Result<InterpretedSystem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEntry {
    pub name: String,
    pub verdict: Verdict,
    /// Failing obligation (agent, time), if any.
    pub failed: Option<(String, usize)>,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub entries: Vec<RefinementEntry>,
    /// Monotonicity violations between consecutive candidates.
    pub warnings: Vec<String>,
}

impl RefinementReport {
    pub fn holds(&self) -> bool {
        self.entries.last().is_some_and(|e| e.verdict.holds())
    }
}

/// Check candidates in order, stopping at the first that meets all its
/// obligations; warn where a candidate's truth set does not contain its
/// predecessor's.
pub fn refine_sequence(systems: Systems<'_>, candidates: &[Candidate]) -> Result<RefinementReport> {
    if candidates.is_empty() {
        return Err(Error::usage("no candidates to refine"));
    }
    let mut report = RefinementReport {
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    let mut previous: Option<(String, Vec<Bits>)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let owned;
        let sys = match &systems {
            Systems::Fixed(s) => *s,
            Systems::PerCandidate(build) => {
                owned = build(i)?;
                &owned
            }
        };
        let mut truth = Vec::new();
        let mut entry = RefinementEntry {
            name: c.name.clone(),
            verdict: Verdict::pass(),
            failed: None,
            witnesses: Vec::new(),
        };
        for ob in &c.obligations {
            let (cand, verdict) = check_labelled(sys, &ob.predicate, &ob.know, &ob.agent, ob.time)?;
            truth.push(cand);
            if entry.verdict.holds() && !verdict.holds() {
                entry.witnesses = witnesses(
                    sys,
                    verdict.counterexample.as_ref().expect("failing verdict"),
                )?;
                entry.failed = Some((ob.agent.clone(), ob.time));
                entry.verdict = verdict;
            }
        }
        if let Some((name, prev)) = &previous {
            let comparable = prev.len() == truth.len()
                && prev.iter().zip(&truth).all(|(a, b)| a.len() == b.len());
            if comparable && !prev.iter().zip(&truth).all(|(a, b)| a.is_subset(b)) {
                report.warnings.push(format!(
                    "`{}` does not contain the truth set of `{name}`",
                    c.name
                ));
            }
        }
        previous = Some((c.name.clone(), truth));
        let done = entry.verdict.holds();
        report.entries.push(entry);
        if done {
            break;
        }
    }
    Ok(report)
}

/// Single-obligation form: each candidate predicate against `know`.
pub fn refine_single(
    systems: Systems<'_>,
    candidates: &[(String, LocalExpr)],
    know: &Formula,
    agent: &str,
    time: usize,
) -> Result<RefinementReport> {
    let cs: Vec<Candidate> = candidates
        .iter()
        .map(|(name, e)| Candidate {
            name: name.clone(),
            obligations: vec![Obligation {
                agent: agent.to_string(),
                time,
                know: know.clone(),
                predicate: e.clone(),
            }],
        })
        .collect();
    refine_sequence(systems, &cs)
}
