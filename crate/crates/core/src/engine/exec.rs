//! Lock-step execution: initial assignments, one macro-step per layer, and
//! time-inductive resolution of knowledge tests.

use std::sync::Arc;

use smallvec::SmallVec;

use crate::bits::Bits;
use crate::engine::expr::CompiledExpr;
#[cfg(test)]
use crate::engine::expr::LocalExpr;
use crate::engine::program::{
    rr_name, EngineMode, KeySchedule, ProtocolModel, Scenario, Statement, CONTRIB,
};
use crate::error::{Error, Result};
use crate::formula::{Evaluator, Formula};
use crate::model::{
    AgentId, GlobalState, Init, InterpretedSystem, Owner, Point, RunOrigin, Signature, Value, VarId,
};

/// Largest run set either engine will materialize.
pub const MAX_RUNS: usize = 50_000_000;

type Flags = SmallVec<[bool; 8]>;

enum Announce {
    Expr(CompiledExpr),
    Test {
        test: Formula,
        then: CompiledExpr,
        otherwise: CompiledExpr,
    },
}

enum Post {
    Local(VarId, CompiledExpr),
    Know(VarId, Formula),
}

struct StepPlan {
    announce: Vec<Announce>,
    /// Micro-round k holds every agent's k-th assignment.
    rounds: Vec<Vec<Post>>,
    knowledge_post: bool,
}

struct Ring {
    contrib: Vec<VarId>,
    rr: Vec<VarId>,
    keys: Vec<VarId>,
    said: Vec<VarId>,
}

impl Ring {
    fn new(sig: &Signature, naive: bool) -> Result<Self> {
        let n = sig.agents().len();
        let contrib = (0..n)
            .map(|a| contrib_var(sig, AgentId(a)))
            .collect::<Result<_>>()?;
        let rr = (1..=sig.horizon())
            .map(|u| sig.var_id(&rr_name(u)))
            .collect::<Result<_>>()?;
        let (keys, said) = if naive {
            (
                (0..n)
                    .map(|e| sig.var_id(&super::program::key_name(e, n)))
                    .collect::<Result<_>>()?,
                (0..n)
                    .map(|i| sig.var_id(&super::program::said_name(i)))
                    .collect::<Result<_>>()?,
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Ring {
            contrib,
            rr,
            keys,
            said,
        })
    }
}

pub(crate) fn contrib_var(sig: &Signature, agent: AgentId) -> Result<VarId> {
    sig.var_id(&format!("{}.{CONTRIB}", sig.agent_name(agent)))
}

/// Formulas usable inside an agent's program: boolean combinations of atoms
/// it observes and its own present-time knowledge.
pub(crate) fn check_local_formula(sig: &Signature, agent: AgentId, f: &Formula) -> Result<()> {
    let not_local = |msg: String| Error::NotLocal {
        agent: sig.agent_name(agent).to_string(),
        msg,
    };
    match f {
        Formula::True => Ok(()),
        Formula::Atom(a) => {
            if sig.observable(agent, sig.var_id(&a.var)?) {
                Ok(())
            } else {
                Err(not_local(format!("`{}` is not observable", a.var)))
            }
        }
        Formula::Not(x) => check_local_formula(sig, agent, x),
        Formula::And(x, y) | Formula::Or(x, y) => {
            check_local_formula(sig, agent, x)?;
            check_local_formula(sig, agent, y)
        }
        Formula::Know(who, body) => {
            if sig.agent_id(who)? != agent {
                return Err(not_local(format!(
                    "tests may only use the agent's own knowledge, found K[{who}]"
                )));
            }
            if body.temporal_depth() > 0 {
                return Err(not_local("knowledge tests must be present-time".into()));
            }
            Ok(())
        }
        Formula::Next(_) => Err(not_local("knowledge tests must be present-time".into())),
    }
}

fn write_target(
    model: &ProtocolModel,
    sig: &Signature,
    agent: AgentId,
    var: &str,
    step: usize,
) -> Result<VarId> {
    let q = format!("{}.{var}", sig.agent_name(agent));
    let id = sig.var_id(&q)?;
    let decl = sig.var(id);
    if decl.owner != Owner::Agent(agent)
        || !model
            .vars
            .iter()
            .any(|d| d.name == var && d.owner == decl.owner)
    {
        return Err(Error::model(format!(
            "`{q}` is not a declared local of its writer"
        )));
    }
    if let Some(at) = decl.assigned_at {
        if at != step {
            return Err(Error::model(format!(
                "history variable `{q}` is assigned at step {step}, declared for step {at}"
            )));
        }
    }
    Ok(id)
}

fn compile_step(model: &ProtocolModel, sig: &Signature, u: usize) -> Result<StepPlan> {
    let mut plan = StepPlan {
        announce: Vec::new(),
        rounds: Vec::new(),
        knowledge_post: false,
    };
    for (a, program) in model.programs.iter().enumerate() {
        let agent = AgentId(a);
        let mut k = 0;
        for stmt in &program.phases[u - 1] {
            let post = match stmt {
                Statement::Announce(e) => {
                    plan.announce
                        .push(Announce::Expr(e.compile(sig, agent, u - 1)?));
                    continue;
                }
                Statement::IfKnowledge {
                    test,
                    then,
                    otherwise,
                } => {
                    check_local_formula(sig, agent, test)?;
                    plan.announce.push(Announce::Test {
                        test: test.clone(),
                        then: then.compile(sig, agent, u - 1)?,
                        otherwise: otherwise.compile(sig, agent, u - 1)?,
                    });
                    continue;
                }
                Statement::AssignLocal { var, expr } => Post::Local(
                    write_target(model, sig, agent, var, u)?,
                    expr.compile(sig, agent, u)?,
                ),
                Statement::AssignKnowledge { var, formula } => {
                    check_local_formula(sig, agent, formula)?;
                    plan.knowledge_post = true;
                    Post::Know(write_target(model, sig, agent, var, u)?, formula.clone())
                }
            };
            if plan.rounds.len() <= k {
                plan.rounds.push(Vec::new());
            }
            plan.rounds[k].push(post);
            k += 1;
        }
    }
    Ok(plan)
}

fn key_bit(schedule: usize, bits_total: usize, idx: usize) -> bool {
    (schedule >> (bits_total - 1 - idx)) & 1 == 1
}

/// Compute the state after step `u` from the state before it. Local
/// assignments are applied only when `with_posts` is set.
#[allow(clippy::too_many_arguments)]
fn advance(
    sig: &Signature,
    plan: &StepPlan,
    ring: &Ring,
    u: usize,
    prev: &[u64],
    out: &mut [u64],
    tests: &[bool],
    keys: Option<&[bool]>,
    with_posts: bool,
) {
    out.copy_from_slice(prev);
    let n = ring.contrib.len();
    let mut c: Flags = SmallVec::with_capacity(n);
    for (a, ann) in plan.announce.iter().enumerate() {
        let bit = match ann {
            Announce::Expr(e) => e.truth(sig, prev),
            Announce::Test {
                then, otherwise, ..
            } => {
                if tests[a] {
                    then.truth(sig, prev)
                } else {
                    otherwise.truth(sig, prev)
                }
            }
        };
        sig.set(out, ring.contrib[a], bit as Value);
        c.push(bit);
    }
    let parity = match keys {
        Some(k) => {
            let mut p = false;
            for e in 0..n {
                sig.set(out, ring.keys[e], k[e] as Value);
            }
            for i in 0..n {
                let said = k[(i + n - 1) % n] ^ k[i] ^ c[i];
                sig.set(out, ring.said[i], said as Value);
                p ^= said;
            }
            p
        }
        None => c.iter().fold(false, |p, b| p ^ b),
    };
    sig.set(out, ring.rr[u - 1], parity as Value);
    if with_posts {
        for round in &plan.rounds {
            let writes: SmallVec<[(VarId, Value); 8]> = round
                .iter()
                .map(|p| match p {
                    Post::Local(v, e) => (*v, e.eval(sig, out)),
                    Post::Know(..) => unreachable!("knowledge assignments run at system level"),
                })
                .collect();
            for (v, x) in writes {
                sig.set(out, v, x);
            }
        }
    }
}

/// Admissible initial states in canonical order: free variables enumerated
/// odometer-style, most significant first, values ascending.
pub fn initial_assignments(
    model: &ProtocolModel,
    scenario: &Scenario,
    mode: EngineMode,
) -> Result<Vec<GlobalState>> {
    let sig = model.signature(mode)?;
    Ok(initial_words(model, &sig, scenario)?
        .iter()
        .map(|w| GlobalState::unpack(&sig, w, 0))
        .collect())
}

fn initial_words(
    model: &ProtocolModel,
    sig: &Signature,
    scenario: &Scenario,
) -> Result<Vec<Vec<u64>>> {
    let mut order: Vec<VarId> = Vec::new();
    for name in &model.initial_order {
        let id = sig.var_id(name)?;
        if sig.var(id).init != Init::Free {
            return Err(Error::model(format!(
                "`{name}` is not a free initial variable"
            )));
        }
        if !order.contains(&id) {
            order.push(id);
        }
    }
    for (i, d) in sig.vars().iter().enumerate() {
        if d.init == Init::Free && !order.contains(&VarId(i)) {
            order.push(VarId(i));
        }
    }
    let mut choices: Vec<Vec<Value>> = order.iter().map(|v| sig.var(*v).domain.values()).collect();
    for (name, values) in &scenario.restrictions {
        let id = sig.var_id(name)?;
        let pos = order
            .iter()
            .position(|v| *v == id)
            .ok_or_else(|| Error::model(format!("`{name}` is not a free initial variable")))?;
        if let Some(bad) = values.iter().find(|v| !sig.var(id).domain.contains(**v)) {
            return Err(Error::model(format!(
                "value {bad} outside the domain of `{name}`"
            )));
        }
        let mut vs = values.clone();
        vs.sort_unstable();
        vs.dedup();
        choices[pos].retain(|v| vs.contains(v));
    }
    let total = choices.iter().try_fold(1usize, |acc, c| {
        acc.checked_mul(c.len()).filter(|t| *t <= MAX_RUNS)
    });
    let total = total.ok_or_else(|| Error::usage("too many initial assignments"))?;
    let mut base = vec![0u64; sig.stride()];
    for (i, d) in sig.vars().iter().enumerate() {
        if let Init::Fixed(v) = d.init {
            sig.set(&mut base, VarId(i), v);
        }
    }
    let mut out = Vec::new();
    let mut digits = vec![0usize; order.len()];
    for _ in 0..total {
        let mut w = base.clone();
        for (k, v) in order.iter().enumerate() {
            sig.set(&mut w, *v, choices[k][digits[k]]);
        }
        let admitted = match &scenario.constraint {
            None => true,
            Some(f) => f.eval_propositional(&mut |name| Ok(sig.get(&w, sig.var_id(name)?)))?,
        };
        if admitted {
            out.push(w);
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < choices[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
    if out.is_empty() {
        return Err(Error::Unsatisfiable);
    }
    Ok(out)
}

/// All runs of a concrete (knowledge-free) protocol.
pub fn generate_runs(
    model: &ProtocolModel,
    scenario: &Scenario,
    mode: EngineMode,
) -> Result<InterpretedSystem> {
    if model.has_knowledge() {
        return Err(Error::KnowledgeInProgram);
    }
    build(model, scenario, mode)
}

/// Runs of a knowledge-based program. Knowledge tests at step `u` are
/// resolved in the system built up to time `u - 1`; knowledge assignments
/// in the system up to time `u`. Under perfect recall with present-time
/// tests this construction is unique.
pub fn execute_kbp(
    model: &ProtocolModel,
    scenario: &Scenario,
    mode: EngineMode,
) -> Result<InterpretedSystem> {
    build(model, scenario, mode)
}

fn build(
    model: &ProtocolModel,
    scenario: &Scenario,
    mode: EngineMode,
) -> Result<InterpretedSystem> {
    let sig = Arc::new(model.signature(mode)?);
    let inits = initial_words(model, &sig, scenario)?;
    let n = sig.agents().len();
    let horizon = sig.horizon();
    let naive = mode == EngineMode::Naive;
    let key_bits = if naive { n * horizon } else { 0 };
    let schedules = 1usize
        .checked_shl(key_bits as u32)
        .filter(|s| key_bits < usize::BITS as usize && *s <= MAX_RUNS)
        .ok_or_else(|| Error::usage("key schedule space too large for naive enumeration"))?;
    let total = inits
        .len()
        .checked_mul(schedules)
        .filter(|t| *t <= MAX_RUNS)
        .ok_or_else(|| {
            Error::usage(format!(
                "{} initial states x {schedules} key schedules exceeds {MAX_RUNS} runs",
                inits.len()
            ))
        })?;
    let stride = sig.stride();
    let mut layer0 = Vec::with_capacity(total * stride);
    let mut origins = Vec::with_capacity(total);
    for (i, w) in inits.iter().enumerate() {
        for s in 0..schedules {
            layer0.extend_from_slice(w);
            origins.push(RunOrigin {
                initial: i,
                schedule: s,
            });
        }
    }
    let ring = Ring::new(&sig, naive)?;
    let mut sys = InterpretedSystem::new(sig.clone(), origins, layer0)?;
    for u in 1..=horizon {
        let plan = compile_step(model, &sig, u)?;
        let tests = test_labels(&sys, &plan, u - 1)?;
        let mut next = vec![0u64; total * stride];
        {
            let prev = sys.layer(u - 1);
            let mut flags: Flags = SmallVec::from_elem(false, n);
            let mut keys: Flags = SmallVec::from_elem(false, n);
            for r in 0..total {
                for (a, t) in tests.iter().enumerate() {
                    flags[a] = t.as_ref().is_some_and(|b| b.get(r));
                }
                if naive {
                    for (e, k) in keys.iter_mut().enumerate() {
                        *k = key_bit(r % schedules, key_bits, (u - 1) * n + e);
                    }
                }
                let span = r * stride..(r + 1) * stride;
                advance(
                    &sig,
                    &plan,
                    &ring,
                    u,
                    &prev[span.clone()],
                    &mut next[span],
                    &flags,
                    naive.then_some(&keys[..]),
                    !plan.knowledge_post,
                );
            }
        }
        sys.push_layer(next)?;
        if plan.knowledge_post {
            run_knowledge_rounds(&mut sys, &plan, u)?;
        }
    }
    Ok(sys)
}

fn test_labels(sys: &InterpretedSystem, plan: &StepPlan, time: usize) -> Result<Vec<Option<Bits>>> {
    let mut ev = Evaluator::new(sys);
    plan.announce
        .iter()
        .map(|a| match a {
            Announce::Test { test, .. } => Ok(Some((*ev.label(test, time)?).clone())),
            Announce::Expr(_) => Ok(None),
        })
        .collect()
}

fn run_knowledge_rounds(sys: &mut InterpretedSystem, plan: &StepPlan, u: usize) -> Result<()> {
    let sig = sys.signature_arc();
    let stride = sig.stride();
    let runs = sys.run_count();
    for round in &plan.rounds {
        let mut writes: Vec<(VarId, Vec<Value>)> = Vec::new();
        {
            let mut ev = Evaluator::new(sys);
            let layer = sys.layer(u);
            for post in round {
                match post {
                    Post::Local(v, e) => {
                        let vals = (0..runs)
                            .map(|r| e.eval(&sig, &layer[r * stride..(r + 1) * stride]))
                            .collect();
                        writes.push((*v, vals));
                    }
                    Post::Know(v, f) => {
                        let label = ev.label(f, u)?;
                        writes.push((*v, (0..runs).map(|r| label.get(r) as Value).collect()));
                    }
                }
            }
        }
        let layer = sys.layer_mut(u);
        for (v, vals) in writes {
            for (r, x) in vals.into_iter().enumerate() {
                sig.set(&mut layer[r * stride..(r + 1) * stride], v, x);
            }
        }
    }
    // Written values are functions of each writer's own observations, so
    // this only re-derives the same blocks; recomputing keeps it checked.
    sys.refresh_last_partitions();
    Ok(())
}

/// Advance a single state by one step. `state` is at time `step`; the
/// result is at `step + 1`.
pub fn execute_step(
    model: &ProtocolModel,
    mode: EngineMode,
    state: &GlobalState,
    keys: &KeySchedule,
    step: usize,
) -> Result<GlobalState> {
    if model.has_knowledge() {
        return Err(Error::KnowledgeInProgram);
    }
    let sig = model.signature(mode)?;
    if step >= sig.horizon() || state.time != step {
        return Err(Error::usage(format!(
            "cannot advance a time-{} state by step {step}",
            state.time
        )));
    }
    let n = sig.agents().len();
    let naive = mode == EngineMode::Naive;
    let key_row = keys.bits.get(step).filter(|k| k.len() == n);
    if naive && key_row.is_none() {
        return Err(Error::usage(format!(
            "key schedule lacks {n} bits for step {}",
            step + 1
        )));
    }
    let plan = compile_step(model, &sig, step + 1)?;
    let ring = Ring::new(&sig, naive)?;
    let prev = state.pack(&sig);
    let mut out = vec![0; sig.stride()];
    let tests = vec![false; n];
    let row: Option<Vec<bool>> = if naive { key_row.cloned() } else { None };
    advance(
        &sig,
        &plan,
        &ring,
        step + 1,
        &prev,
        &mut out,
        &tests,
        row.as_deref(),
        true,
    );
    Ok(GlobalState::unpack(&sig, &out, step + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointMismatch {
    pub agent: String,
    pub point: Point,
    pub statement: String,
}

/// Re-evaluate every knowledge test and knowledge assignment inside the
/// finished system and report decisions that differ from the recorded ones.
pub fn verify_kbp_fixpoint(
    model: &ProtocolModel,
    sys: &InterpretedSystem,
) -> Result<Vec<FixpointMismatch>> {
    let sig = sys.signature();
    let ring = Ring::new(sig, !sig.vars().iter().all(|d| d.init != Init::Fresh))?;
    let mut out = Vec::new();
    let mut ev = Evaluator::new(sys);
    for u in 1..=sys.horizon() {
        let plan = compile_step(model, sig, u)?;
        for (a, ann) in plan.announce.iter().enumerate() {
            let Announce::Test {
                test,
                then,
                otherwise,
            } = ann
            else {
                continue;
            };
            let label = ev.label(test, u - 1)?;
            for r in 0..sys.run_count() {
                let before = sys.words(Point::new(r, u - 1));
                let expect = if label.get(r) {
                    then.truth(sig, before)
                } else {
                    otherwise.truth(sig, before)
                };
                let actual = sys.value(Point::new(r, u), ring.contrib[a]) != 0;
                if expect != actual {
                    out.push(FixpointMismatch {
                        agent: sig.agent_name(AgentId(a)).to_string(),
                        point: Point::new(r, u),
                        statement: format!("if {test}"),
                    });
                }
            }
        }
        for (k, round) in plan.rounds.iter().enumerate() {
            for post in round {
                let Post::Know(v, f) = post else { continue };
                let label = ev.label(f, u)?;
                for r in 0..sys.run_count() {
                    if (sys.value(Point::new(r, u), *v) != 0) != label.get(r) {
                        out.push(FixpointMismatch {
                            agent: match sig.var(*v).owner {
                                Owner::Agent(a) => sig.agent_name(a).to_string(),
                                Owner::Environment => String::new(),
                            },
                            point: Point::new(r, u),
                            statement: format!("round {} {} := {f}", k + 1, sig.qualified_name(*v)),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Agent-by-step contribution bits of one run (steps 1..=T).
pub fn contributions(sys: &InterpretedSystem, run: usize) -> Result<Vec<Vec<u8>>> {
    sys.check_point(Point::new(run, 0))?;
    let sig = sys.signature();
    (0..sig.agents().len())
        .map(|a| {
            let v = contrib_var(sig, AgentId(a))?;
            Ok((1..=sys.horizon())
                .map(|u| sys.value(Point::new(run, u), v) as u8)
                .collect())
        })
        .collect()
}

/// Round results rr[1..=T] of one run, read at the final time.
pub fn round_results(sys: &InterpretedSystem, run: usize) -> Result<Vec<u8>> {
    sys.check_point(Point::new(run, 0))?;
    let h = sys.horizon();
    (1..=h)
        .map(|u| Ok(sys.value_of(Point::new(run, h), &rr_name(u))? as u8))
        .collect()
}
