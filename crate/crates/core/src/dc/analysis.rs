//! Spec checks, refinement chains and synthesis over the case-study model.

use std::fmt::Write as _;

use serde_json::{json, Value as Json};

use crate::dc::predicates::{Library, PredicateDef, PredicateSet, Target};
use crate::dc::specs::{kc_knowledge, spec, spec_instances, target_formula, SpecId};
use crate::dc::{dc_system, DcParams, Implementation, AGENTS};
use crate::engine::EngineMode;
use crate::error::{Error, Result};
use crate::formula::{Direction, Evaluator, Verdict};
use crate::model::InterpretedSystem;
use crate::refine::{
    direction_text, refine_sequence, render_witnesses, synthesize_predicate, witnesses, Candidate,
    Obligation, RefinementReport, SynthesizedPredicate, Systems, Witness,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecInstance {
    pub agent: usize,
    pub slot: Option<usize>,
    pub time: usize,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecReport {
    pub spec: SpecId,
    pub instances: Vec<SpecInstance>,
}

fn verdict_word(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "fails"
    }
}

fn instance_name(agent: usize, slot: Option<usize>) -> String {
    match slot {
        Some(s) => format!("{} slot {s}", AGENTS[agent]),
        None => AGENTS[agent].to_string(),
    }
}

impl SpecReport {
    pub fn holds(&self) -> bool {
        self.instances.iter().all(|i| i.verdict.holds())
    }

    pub fn first_failure(&self) -> Option<&SpecInstance> {
        self.instances.iter().find(|i| !i.verdict.holds())
    }

    pub fn to_json(&self) -> Json {
        let mut out = json!({
            "spec": self.spec.name(),
            "verdict": verdict_word(self.holds()),
            "instances": self.instances.iter().map(|i| json!({
                "agent": AGENTS[i.agent],
                "slot": i.slot,
                "time": i.time,
                "verdict": verdict_word(i.verdict.holds()),
            })).collect::<Vec<_>>(),
            "witnesses": self.first_failure().map_or(Vec::new(), |i| i.witnesses.iter().map(Witness::to_json).collect()),
        });
        if let Some(d) = self
            .first_failure()
            .and_then(|i| i.verdict.counterexample.as_ref()?.direction)
        {
            out["direction"] = json!(direction_text(d));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "spec {}: {}",
            self.spec,
            verdict_word(self.holds()).to_uppercase()
        );
        for i in &self.instances {
            let _ = writeln!(
                out,
                "  {} at time {}: {}",
                instance_name(i.agent, i.slot),
                i.time,
                verdict_word(i.verdict.holds())
            );
        }
        if let Some(i) = self.first_failure() {
            let cx = i.verdict.counterexample.as_ref().expect("failing verdict");
            let _ = writeln!(
                out,
                "\ncounterexample for {}:",
                instance_name(i.agent, i.slot)
            );
            out.push_str(&render_witnesses(cx, &i.witnesses));
        }
        out
    }
}

/// The history variable on the left of a spec's equivalence, if it has one.
fn spec_variable(id: SpecId, agent: usize, slot: Option<usize>) -> Option<String> {
    let a = AGENTS[agent];
    let s = slot.unwrap_or(0);
    match id {
        SpecId::S1s | SpecId::S1c => Some(format!("{a}.kc[{s}]")),
        SpecId::S4a => Some(format!("{a}.rcvd0[{s}]")),
        SpecId::S4b => Some(format!("{a}.rcvd1[{s}]")),
        SpecId::S5 => Some(format!("{a}.dlvrd")),
        _ => None,
    }
}

/// Check a spec at every (agent, slot) instance, optionally narrowed.
pub fn check_spec(
    sys: &InterpretedSystem,
    params: &DcParams,
    id: SpecId,
    agent: Option<usize>,
    slot: Option<usize>,
) -> Result<SpecReport> {
    if let Some(s) = slot {
        params.check_slot(s)?;
    }
    let mut ev = Evaluator::new(sys);
    let mut instances = Vec::new();
    for (a, s) in spec_instances(id, params) {
        if agent.is_some_and(|x| x != a) || (slot.is_some() && s.is_some() && s != slot) {
            continue;
        }
        let (f, time) = spec(id, params, a, s)?;
        let mut verdict = ev.check_valid_at(&f, time)?;
        let mut ws = Vec::new();
        if let Some(cx) = verdict.counterexample.as_mut() {
            if let Some(var) = spec_variable(id, a, s) {
                let on = sys.value_of(cx.primary, &var)? != 0;
                cx.direction = Some(if on {
                    Direction::CandidateTrueKnowledgeFalse
                } else {
                    Direction::KnowledgeTrueCandidateFalse
                });
            }
            ws = witnesses(sys, cx)?;
        }
        instances.push(SpecInstance {
            agent: a,
            slot: s,
            time,
            verdict,
            witnesses: ws,
        });
    }
    Ok(SpecReport {
        spec: id,
        instances,
    })
}

pub fn candidate_system(
    params: &DcParams,
    set: &PredicateSet,
    engine: EngineMode,
) -> Result<InterpretedSystem> {
    Ok(dc_system(params, &Implementation::Candidate(set.clone()), engine)?.1)
}

fn instances(
    params: &DcParams,
    target: Target,
    agent: Option<usize>,
    slot: Option<usize>,
) -> Result<Vec<(usize, usize)>> {
    if let Some(s) = slot {
        params.check_slot(s)?;
    }
    if agent.is_some_and(|a| a >= AGENTS.len()) {
        return Err(Error::usage("agent out of range"));
    }
    let slots: Vec<usize> = if target.per_slot() {
        (1..=params.slots)
            .filter(|s| slot.is_none_or(|x| x == *s))
            .collect()
    } else {
        vec![0]
    };
    let mut out = Vec::new();
    for a in (0..AGENTS.len()).filter(|a| agent.is_none_or(|x| x == *a)) {
        out.extend(slots.iter().map(|s| (a, *s)));
    }
    Ok(out)
}

/// Check a sequence of predicate definitions for one target against its
/// knowledge formula. `base` supplies every other predicate; for `kc` the
/// system is rebuilt per candidate since it drives transmission.
pub fn refine_predicates(
    params: &DcParams,
    engine: EngineMode,
    base: &PredicateSet,
    defs: &[PredicateDef],
    agent: Option<usize>,
    slot: Option<usize>,
) -> Result<RefinementReport> {
    let Some(first) = defs.first() else {
        return Err(Error::usage("no candidates to refine"));
    };
    let target = first.target;
    if let Some(d) = defs.iter().find(|d| d.target != target) {
        return Err(Error::usage(format!(
            "`{}` targets {} but the sequence targets {target}",
            d.name, d.target
        )));
    }
    let mut lib = Library::builtin(params.slots);
    let mut sets = Vec::new();
    let mut candidates = Vec::new();
    for d in defs {
        lib.add(d.clone());
        let mut set = base.clone();
        set.define(d, params.slots, &lib)?;
        let mut obligations = Vec::new();
        for (a, s) in instances(params, target, agent, slot)? {
            let (know, time) = target_formula(target, params, a, s)?;
            let predicate = d.instantiate(s.max(1), params.slots, &lib)?;
            obligations.push(Obligation {
                agent: AGENTS[a].to_string(),
                time,
                know,
                predicate,
            });
        }
        candidates.push(Candidate {
            name: d.name.clone(),
            obligations,
        });
        sets.push(set);
    }
    if target == Target::Kc {
        let build = |i: usize| candidate_system(params, &sets[i], engine);
        refine_sequence(Systems::PerCandidate(&build), &candidates)
    } else {
        let sys = candidate_system(params, base, engine)?;
        refine_sequence(Systems::Fixed(&sys), &candidates)
    }
}

/// Exact predicate for `target` at one agent and slot, over the system
/// built from `base`.
pub fn synthesize_target(
    params: &DcParams,
    engine: EngineMode,
    base: &PredicateSet,
    target: Target,
    agent: usize,
    slot: usize,
) -> Result<SynthesizedPredicate> {
    let sys = candidate_system(params, base, engine)?;
    let (know, time) = target_formula(target, params, agent, slot)?;
    synthesize_predicate(
        &sys,
        &know,
        AGENTS
            .get(agent)
            .ok_or_else(|| Error::usage("agent out of range"))?,
        time,
    )
}

/// The `kc` implementation for the parameters' mode, slot by slot: the
/// knowledge at the point before transmission `s` depends only on
/// `kc[1..s-1]`, which are fixed by then.
pub fn synthesize_kc(
    params: &DcParams,
    engine: EngineMode,
    base: &PredicateSet,
) -> Result<(PredicateSet, Vec<SynthesizedPredicate>)> {
    let mut set = base.clone();
    let mut out = Vec::new();
    for s in 1..=params.slots {
        let sys = candidate_system(params, &set, engine)?;
        let time = params.pre_transmission_time(s);
        for (a, name) in AGENTS.iter().enumerate() {
            let syn = synthesize_predicate(
                &sys,
                &kc_knowledge(params.mode, name, s, params.slots)?,
                name,
                time,
            )?;
            let expr = syn.expr.clone().ok_or_else(|| {
                Error::model(format!(
                    "no closed form for kc[{s}] of {name}; use the reduced engine"
                ))
            })?;
            set.set(Target::Kc, a, s, expr, "kc_synthesized");
            out.push(syn);
        }
    }
    Ok((set, out))
}

/// Holds/fails for each spec that applies to the implementation.
pub fn spec_summary(
    sys: &InterpretedSystem,
    params: &DcParams,
    ids: &[SpecId],
) -> Result<Vec<(SpecId, bool)>> {
    ids.iter()
        .map(|id| Ok((*id, check_spec(sys, params, *id, None, None)?.holds())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::builtin_predicate;

    #[test]
    fn cf_chain_fails_fails_holds() {
        let p = DcParams::default();
        let base = PredicateSet::reference(3).unwrap();
        let defs: Vec<_> = ["cf1", "cf2", "cf3"]
            .iter()
            .map(|n| builtin_predicate(n, 3).unwrap())
            .collect();
        let r = refine_predicates(&p, EngineMode::Reduced, &base, &defs, None, None).unwrap();
        let outcomes: Vec<bool> = r.entries.iter().map(|e| e.verdict.holds()).collect();
        assert_eq!(outcomes, vec![false, false, true]);
        assert!(r.warnings.is_empty());
        let cx = r.entries[0].verdict.counterexample.as_ref().unwrap();
        assert_eq!(cx.direction, Some(Direction::KnowledgeTrueCandidateFalse));
    }

    #[test]
    fn synthesized_kc_is_a_fixpoint() {
        let p = DcParams {
            mode: crate::dc::Mode::Conservative,
            ..DcParams::default()
        };
        let base = PredicateSet::reference(3).unwrap();
        let (set, first) = synthesize_kc(&p, EngineMode::Reduced, &base).unwrap();
        let (_, again) = synthesize_kc(&p, EngineMode::Reduced, &set).unwrap();
        let texts = |v: &[SynthesizedPredicate]| v.iter().map(|s| s.text()).collect::<Vec<_>>();
        assert_eq!(texts(&first), texts(&again));
        let sys = candidate_system(&p, &set, EngineMode::Reduced).unwrap();
        assert!(check_spec(&sys, &p, SpecId::S1c, None, None)
            .unwrap()
            .holds());
    }
}
