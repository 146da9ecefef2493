use std::collections::BTreeMap;

use crate::engine::{label_local, LocalExpr};
use crate::error::{Error, Result};
use crate::formula::{Evaluator, Formula};
use crate::model::{AgentId, Init, InterpretedSystem, Owner, Point, Value, VarId};
use crate::refine::sop::{self, Cube};

/// One block of the agent's partition and the knowledge value on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationClass {
    pub block: u32,
    /// Least run of the block.
    pub representative: Point,
    pub runs: usize,
    /// Feature vector (bit `k` = feature `k`), when features apply.
    pub features: u32,
    pub value: bool,
}

/// The exact local predicate for a knowledge formula at one agent and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPredicate {
    pub agent: String,
    pub time: usize,
    pub formula: Formula,
    /// Truth mapping, total over the partition blocks, in block order.
    pub classes: Vec<ObservationClass>,
    /// Literal texts of the features, e.g. `slot_request == 2`, `rr[1]`.
    pub features: Vec<String>,
    /// Minimized sum of products, when the features determine the value.
    pub expr: Option<LocalExpr>,
}

impl SynthesizedPredicate {
    pub fn text(&self) -> Option<String> {
        self.expr.as_ref().map(|e| e.to_string())
    }

    /// The truth mapping as a per-run label.
    pub fn label(&self, sys: &InterpretedSystem) -> Result<crate::bits::Bits> {
        let agent = sys.signature().agent_id(&self.agent)?;
        let part = sys.partition(agent, self.time)?;
        let value: BTreeMap<u32, bool> = self.classes.iter().map(|c| (c.block, c.value)).collect();
        Ok(crate::bits::Bits::from_fn(sys.run_count(), |r| {
            value[&part.block(r)]
        }))
    }
}

#[derive(Debug, Clone)]
struct Feature {
    var: VarId,
    /// `Some(v)`: one-hot test `var == v`; `None`: boolean variable.
    value: Option<Value>,
    text: String,
    lit: LocalExpr,
    neg: LocalExpr,
}

/// The agent's free initial values and the public round results up to
/// `time`: what a key-free local state is made of.
fn features(sys: &InterpretedSystem, agent: AgentId, time: usize) -> Vec<Feature> {
    let sig = sys.signature();
    let mut out = Vec::new();
    for (i, d) in sig.vars().iter().enumerate() {
        let var = VarId(i);
        let own_free = d.owner == Owner::Agent(agent) && d.init == Init::Free;
        let public = d.owner == Owner::Environment
            && sig.observable(agent, var)
            && matches!(d.init, Init::Fixed(_))
            && d.assigned_at.is_some_and(|u| u <= time);
        if !(own_free || public) {
            continue;
        }
        if d.domain.is_bool() {
            let lit = LocalExpr::var(d.name.clone());
            out.push(Feature {
                var,
                value: None,
                text: d.name.clone(),
                neg: LocalExpr::not(lit.clone()),
                lit,
            });
        } else {
            for v in d.domain.values() {
                let x = LocalExpr::var(d.name.clone());
                out.push(Feature {
                    var,
                    value: Some(v),
                    text: format!("{} == {v}", d.name),
                    lit: LocalExpr::eq(x.clone(), LocalExpr::Const(v)),
                    neg: LocalExpr::ne(x, LocalExpr::Const(v)),
                });
            }
        }
    }
    out
}

fn feature_bits(sys: &InterpretedSystem, fs: &[Feature], run: usize, time: usize) -> u32 {
    let mut m = 0;
    for (k, f) in fs.iter().enumerate() {
        let at = if sys.signature().var(f.var).owner == Owner::Environment {
            time
        } else {
            0
        };
        let x = sys.value(Point::new(run, at), f.var);
        let on = match f.value {
            None => x != 0,
            Some(v) => x == v,
        };
        if on {
            m |= 1 << k;
        }
    }
    m
}

fn cube_expr(c: &Cube, fs: &[Feature]) -> LocalExpr {
    // A positive one-hot literal makes negative ones on the same variable redundant.
    let pos_vars: Vec<VarId> = (0..fs.len())
        .filter(|k| c.care >> k & 1 == 1 && c.value >> k & 1 == 1 && fs[*k].value.is_some())
        .map(|k| fs[k].var)
        .collect();
    let mut lits = Vec::new();
    for (k, f) in fs.iter().enumerate() {
        if c.care >> k & 1 == 0 {
            continue;
        }
        if c.value >> k & 1 == 1 {
            lits.push(f.lit.clone());
        } else if !(f.value.is_some() && pos_vars.contains(&f.var)) {
            lits.push(f.neg.clone());
        }
    }
    if lits.len() == 1 {
        lits.pop().unwrap()
    } else {
        LocalExpr::And(lits)
    }
}

/// Knowledge value per partition block of `agent` at `time`, plus a
/// minimized expression over the agent's key-free observations, checked
/// against the mapping on every run.
pub fn synthesize_predicate(
    sys: &InterpretedSystem,
    formula: &Formula,
    agent: &str,
    time: usize,
) -> Result<SynthesizedPredicate> {
    let a = sys.signature().agent_id(agent)?;
    let label = Evaluator::new(sys).label(formula, time)?;
    let part = sys.partition(a, time)?;
    let mut classes: Vec<Option<ObservationClass>> = vec![None; part.num_blocks()];
    let fs = features(sys, a, time);
    let usable = fs.len() <= sop::MAX_INPUTS;
    for r in 0..sys.run_count() {
        let b = part.block(r);
        let v = label.get(r);
        match &mut classes[b as usize] {
            Some(c) => {
                if c.value != v {
                    return Err(Error::NotLocal {
                        agent: agent.to_string(),
                        msg: format!(
                            "`{formula}` is not determined by the local state at time {time}"
                        ),
                    });
                }
                c.runs += 1;
            }
            slot @ None => {
                let features = if usable {
                    feature_bits(sys, &fs, r, time)
                } else {
                    0
                };
                *slot = Some(ObservationClass {
                    block: b,
                    representative: Point::new(r, time),
                    runs: 1,
                    features,
                    value: v,
                });
            }
        }
    }
    let classes: Vec<ObservationClass> = classes.into_iter().flatten().collect();
    let expr = if usable {
        minimized(sys, a, time, &fs, &classes, &label)?
    } else {
        None
    };
    Ok(SynthesizedPredicate {
        agent: agent.to_string(),
        time,
        formula: formula.clone(),
        classes,
        features: fs.iter().map(|f| f.text.clone()).collect(),
        expr,
    })
}

fn minimized(
    sys: &InterpretedSystem,
    agent: AgentId,
    time: usize,
    fs: &[Feature],
    classes: &[ObservationClass],
    label: &crate::bits::Bits,
) -> Result<Option<LocalExpr>> {
    let on: Vec<u32> = classes
        .iter()
        .filter(|c| c.value)
        .map(|c| c.features)
        .collect();
    let off: Vec<u32> = classes
        .iter()
        .filter(|c| !c.value)
        .map(|c| c.features)
        .collect();
    let Some(cover) = sop::minimize(fs.len(), &on, &off) else {
        return Ok(None);
    };
    let expr = match cover.as_slice() {
        [c] if c.care == 0 => LocalExpr::And(Vec::new()),
        [c] => cube_expr(c, fs),
        _ => LocalExpr::Or(cover.iter().map(|c| cube_expr(c, fs)).collect()),
    };
    if label_local(sys, &expr, agent, time)? != *label {
        return Err(Error::model(format!(
            "internal: synthesized `{expr}` disagrees with its truth table"
        )));
    }
    Ok(Some(expr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::{dc_system, DcParams, Implementation, PredicateSet};
    use crate::engine::EngineMode;

    fn system() -> InterpretedSystem {
        let set = PredicateSet::reference(3).unwrap();
        dc_system(
            &DcParams::default(),
            &Implementation::Candidate(set),
            EngineMode::Reduced,
        )
        .unwrap()
        .1
    }

    #[test]
    fn own_atom_synthesizes_to_itself() {
        let sys = system();
        let s = synthesize_predicate(
            &sys,
            &Formula::know("C1", Formula::eq("C1.msg", 1)),
            "C1",
            6,
        )
        .unwrap();
        assert_eq!(s.text().unwrap(), "msg");
        let t = synthesize_predicate(&sys, &Formula::know("C1", Formula::True), "C1", 2).unwrap();
        assert_eq!(t.text().unwrap(), "true");
        let f =
            synthesize_predicate(&sys, &Formula::know("C1", Formula::falsum()), "C1", 2).unwrap();
        assert_eq!(f.text().unwrap(), "false");
    }

    #[test]
    fn mapping_is_total_and_non_local_formulas_are_rejected() {
        let sys = system();
        let f = Formula::know("C2", crate::dc::conflict_macro(1, 3).unwrap());
        let s = synthesize_predicate(&sys, &f, "C2", 3).unwrap();
        assert_eq!(
            s.classes.len(),
            sys.partition(AgentId(1), 3).unwrap().num_blocks()
        );
        assert_eq!(s.classes.iter().map(|c| c.runs).sum::<usize>(), 512);
        assert_eq!(
            s.label(&sys).unwrap(),
            *Evaluator::new(&sys).label(&f, 3).unwrap()
        );
        assert!(synthesize_predicate(&sys, &Formula::eq("C2.msg", 1), "C1", 3).is_err());
    }
}
