//! Key elimination for the three-agent ring, and the oracle comparing it
//! with exhaustive key enumeration.
//!
//! An agent sees its two adjacent keys, so the one key it does not see masks
//! the other two agents' announcements down to their XOR. Its view of a
//! step is therefore fully described by its own contribution and the XOR of
//! the others', which is what the reduced engine records.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::engine::EngineMode;
use crate::engine::{
    contrib_var, execute_kbp, execute_step, generate_runs, KeySchedule, ProtocolModel, Scenario,
};
use crate::error::{Error, Result};
use crate::formula::{Evaluator, Formula};
use crate::model::{AgentId, GlobalState, Init, InterpretedSystem, Point, Signature};

/// Per step `1..=time`: (own contribution, XOR of the others').
pub fn invariant_history(
    model: &ProtocolModel,
    initial: &GlobalState,
    agent: AgentId,
    time: usize,
) -> Result<Vec<(bool, bool)>> {
    let sig = model.signature(EngineMode::Reduced)?;
    if agent.0 >= sig.agents().len() {
        return Err(Error::usage(format!("agent #{} not declared", agent.0)));
    }
    if time > sig.horizon() {
        return Err(Error::usage(format!(
            "time {time} exceeds horizon {}",
            sig.horizon()
        )));
    }
    let contrib: Vec<_> = (0..sig.agents().len())
        .map(|a| contrib_var(&sig, AgentId(a)))
        .collect::<Result<_>>()?;
    let no_keys = KeySchedule::zeros(sig.horizon(), sig.agents().len());
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(time);
    for step in 0..time {
        state = execute_step(model, EngineMode::Reduced, &state, &no_keys, step)?;
        let bits: Vec<bool> = contrib.iter().map(|v| state.get(*v) != 0).collect();
        let others = bits
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != agent.0)
            .fold(false, |x, (_, b)| x ^ b);
        out.push((bits[agent.0], others));
    }
    Ok(out)
}

/// Reduced-engine run set: one run per admissible initial assignment.
pub fn reduce(model: &ProtocolModel, scenario: &Scenario) -> Result<InterpretedSystem> {
    build(model, scenario, EngineMode::Reduced)
}

fn build(
    model: &ProtocolModel,
    scenario: &Scenario,
    mode: EngineMode,
) -> Result<InterpretedSystem> {
    if model.has_knowledge() {
        execute_kbp(model, scenario, mode)
    } else {
        generate_runs(model, scenario, mode)
    }
}

/// Deliberate perturbation of the reduced engine, for testing the oracle:
/// `observer` additionally sees `var`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub var: String,
    pub observer: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub formula: String,
    pub time: usize,
    pub naive_run: usize,
    pub reduced_run: usize,
    pub naive_value: bool,
    pub reduced_value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgreementReport {
    pub naive_runs: usize,
    pub reduced_runs: usize,
    pub formulas: usize,
    /// (formula, time) pairs compared.
    pub checks: usize,
    /// First disagreeing point per (formula, time), if any.
    pub divergences: Vec<Divergence>,
    /// Times where the validity verdicts themselves differ.
    pub verdict_mismatches: usize,
}

impl AgreementReport {
    pub fn agree(&self) -> bool {
        self.divergences.is_empty() && self.verdict_mismatches == 0
    }
}

/// Build both engines' run sets and compare every formula at every time it
/// fits in, pointwise under the projection naive run -> initial assignment.
pub fn engines_agree(
    model: &ProtocolModel,
    scenario: &Scenario,
    suite: &[Formula],
    fault: Option<&Fault>,
) -> Result<AgreementReport> {
    let naive = build(model, scenario, EngineMode::Naive)?;
    let mut reduced_model = model.clone();
    if let Some(f) = fault {
        reduced_model
            .extra_observations
            .push((f.var.clone(), f.observer.clone()));
    }
    let reduced = build(&reduced_model, scenario, EngineMode::Reduced)?;
    compare_systems(&naive, &reduced, suite)
}

/// Compare two systems built from the same model and scenario.
pub fn compare_systems(
    naive: &InterpretedSystem,
    reduced: &InterpretedSystem,
    suite: &[Formula],
) -> Result<AgreementReport> {
    let projection: Vec<usize> = (0..naive.run_count())
        .map(|r| {
            reduced.find_run(crate::model::RunOrigin {
                initial: naive.origin(r).initial,
                schedule: 0,
            })
        })
        .collect::<Option<_>>()
        .ok_or_else(|| Error::model("naive run without a reduced counterpart"))?;
    let mut report = AgreementReport {
        naive_runs: naive.run_count(),
        reduced_runs: reduced.run_count(),
        formulas: suite.len(),
        ..Default::default()
    };
    let horizon = naive.horizon().min(reduced.horizon());
    let mut red_eval = Evaluator::new(reduced);
    for f in suite {
        // Naive labels are large; keep one formula's memo at a time.
        let mut naive_eval = Evaluator::new(naive);
        for t in 0..=horizon.saturating_sub(f.temporal_depth()) {
            if t + f.temporal_depth() > horizon {
                break;
            }
            let a = naive_eval.label(f, t)?;
            let b = red_eval.label(f, t)?;
            report.checks += 1;
            if a.all() != b.all() {
                report.verdict_mismatches += 1;
            }
            if let Some(r) = (0..naive.run_count()).find(|r| a.get(*r) != b.get(projection[*r])) {
                report.divergences.push(Divergence {
                    formula: f.to_string(),
                    time: t,
                    naive_run: r,
                    reduced_run: projection[r],
                    naive_value: a.get(r),
                    reduced_value: b.get(projection[r]),
                });
            }
        }
    }
    Ok(report)
}

/// Atoms `var == value` for every variable that exists in the reduced
/// engine and is not a constant.
pub fn key_free_atoms(sig: &Signature) -> Vec<Formula> {
    let mut out = Vec::new();
    for (i, d) in sig.vars().iter().enumerate() {
        if matches!(d.init, Init::Fixed(_))
            && d.assigned_at.is_none()
            && d.name != crate::engine::CONTRIB
        {
            continue;
        }
        let name = sig.qualified_name(crate::model::VarId(i)).to_string();
        if d.domain.is_bool() {
            out.push(Formula::eq(name, 1));
        } else {
            out.extend(
                d.domain
                    .values()
                    .into_iter()
                    .map(|v| Formula::eq(name.clone(), v)),
            );
        }
    }
    out
}

/// Random formula of operator depth at most `depth` over `atoms`, with
/// knowledge operators for `agents` and `X`.
pub fn random_formula(
    rng: &mut impl Rng,
    atoms: &[Formula],
    agents: &[String],
    depth: usize,
) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return atoms.choose(rng).cloned().unwrap_or(Formula::True);
    }
    match rng.gen_range(0..10) {
        0 | 1 => Formula::not(random_formula(rng, atoms, agents, depth - 1)),
        2 | 3 => Formula::and(
            random_formula(rng, atoms, agents, depth - 1),
            random_formula(rng, atoms, agents, depth - 1),
        ),
        4 | 5 => Formula::or(
            random_formula(rng, atoms, agents, depth - 1),
            random_formula(rng, atoms, agents, depth - 1),
        ),
        6..=8 => {
            let a = agents.choose(rng).cloned().unwrap_or_default();
            Formula::know(a, random_formula(rng, atoms, agents, depth - 1))
        }
        _ => Formula::next(random_formula(rng, atoms, agents, depth - 1)),
    }
}

/// `count` seeded random formulas; identical for identical seeds.
pub fn random_suite(sig: &Signature, seed: u64, count: usize, depth: usize) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = key_free_atoms(sig);
    (0..count)
        .map(|_| random_formula(&mut rng, &atoms, sig.agents(), depth))
        .collect()
}

/// The reduced-system block of each naive run's projection, compared with
/// naive blocks: true iff every naive block maps into one reduced block.
pub fn blocks_refine(
    naive: &InterpretedSystem,
    reduced: &InterpretedSystem,
    agent: AgentId,
    time: usize,
) -> Result<bool> {
    let np = naive.partition(agent, time)?;
    let rp = reduced.partition(agent, time)?;
    let mut image = vec![None; np.num_blocks()];
    for r in 0..naive.run_count() {
        let target = rp.block(naive.origin(r).initial);
        match image[np.block(r) as usize] {
            None => image[np.block(r) as usize] = Some(target),
            Some(b) if b != target => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// Point of `sys` corresponding to initial assignment `initial`, schedule 0.
pub fn point_for(sys: &InterpretedSystem, initial: usize, time: usize) -> Option<Point> {
    sys.find_run(crate::model::RunOrigin {
        initial,
        schedule: 0,
    })
    .map(|r| Point::new(r, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::{build_cdc, DcParams, Implementation, PredicateSet};
    use crate::engine::initial_assignments;

    fn model() -> (ProtocolModel, DcParams) {
        let p = DcParams::default();
        (
            build_cdc(
                &p,
                &Implementation::Candidate(PredicateSet::reference(3).unwrap()),
            )
            .unwrap(),
            p,
        )
    }

    fn initial(model: &ProtocolModel, sr: [i64; 3], msg: [i64; 3]) -> GlobalState {
        let scenario = DcParams::pinned(sr, msg).scenario().unwrap();
        initial_assignments(model, &scenario, EngineMode::Reduced)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn invariant_histories_of_example_pair_coincide() {
        let (m, _) = model();
        let left =
            invariant_history(&m, &initial(&m, [2, 2, 2], [1, 1, 1]), AgentId(0), 3).unwrap();
        let right =
            invariant_history(&m, &initial(&m, [2, 0, 0], [1, 1, 1]), AgentId(0), 3).unwrap();
        let expect = vec![(false, false), (true, false), (false, false)];
        assert_eq!(left, expect);
        assert_eq!(right, expect);
        let quiet =
            invariant_history(&m, &initial(&m, [0, 0, 0], [1, 0, 1]), AgentId(2), 3).unwrap();
        assert_eq!(quiet, vec![(false, false); 3]);
        assert!(invariant_history(&m, &initial(&m, [0, 0, 0], [1, 0, 1]), AgentId(2), 9).is_err());
    }

    #[test]
    fn reduced_counts_and_singletons() {
        let (m, p) = model();
        assert_eq!(reduce(&m, &p.scenario().unwrap()).unwrap().run_count(), 512);
        let one = reduce(
            &m,
            &DcParams::pinned([1, 2, 3], [0, 1, 1]).scenario().unwrap(),
        )
        .unwrap();
        let f = Formula::eq("C2.msg", 1);
        let mut ev = Evaluator::new(&one);
        assert_eq!(
            ev.eval(&Formula::know("C1", f.clone()), Point::new(0, 6))
                .unwrap(),
            ev.eval(&f, Point::new(0, 6)).unwrap()
        );
    }

    #[test]
    fn key_formulas_are_rejected_on_reduced_systems() {
        let (m, p) = model();
        let sys = reduce(&m, &p.scenario().unwrap()).unwrap();
        let err =
            crate::formula::eval_at(&sys, &Formula::eq("k12", 1), Point::new(0, 1)).unwrap_err();
        assert!(matches!(err, Error::ElidedVariable(_)));
    }

    #[test]
    fn random_suites_are_reproducible() {
        let (m, _) = model();
        let sig = m.signature(EngineMode::Reduced).unwrap();
        let a = random_suite(&sig, 7, 20, 3);
        assert_eq!(a, random_suite(&sig, 7, 20, 3));
        assert_ne!(a, random_suite(&sig, 8, 20, 3));
        assert!(a.iter().all(|f| f.temporal_depth() <= 3));
        assert!(key_free_atoms(&sig)
            .iter()
            .all(|f| !f.to_string().starts_with('k')));
    }
}
