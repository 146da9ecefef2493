//! Bottom-up labelling of formulas over an interpreted system.
//!
//! Formulas are compiled into a hash-consed DAG; each (node, time) pair is
//! labelled once with the set of runs where it holds. `Know` labels are
//! computed per partition block and broadcast, so nested knowledge costs one
//! pass over the runs per nesting level.

use std::collections::HashMap;
use std::rc::Rc;

use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::formula::ast::{Cmp, Formula};
use crate::model::{AgentId, InterpretedSystem, Point, Value, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Holds,
    Fails,
}

/// Which side of a `predicate <=> K(...)` equivalence was wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// The candidate claims knowledge the agent does not have.
    CandidateTrueKnowledgeFalse,
    /// The agent knows, but the candidate misses it.
    KnowledgeTrueCandidateFalse,
}

/// A second point, indistinguishable to `agent` from the primary one (or
/// from the point reached from it by `X`), where the knowledge body fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairWitness {
    pub agent: String,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub formula: Formula,
    pub time: usize,
    pub primary: Point,
    pub secondary: Option<PairWitness>,
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub counterexample: Option<Counterexample>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub(crate) fn pass() -> Self {
        Verdict {
            outcome: Outcome::Holds,
            counterexample: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    Atom { var: VarId, eq: bool, value: Value },
    Not(u32),
    And(u32, u32),
    Or(u32, u32),
    Know(AgentId, u32),
    Next(u32),
}

/// Memoizing evaluator bound to one system. Reuse it across formulas that
/// share subterms.
pub struct Evaluator<'a> {
    sys: &'a InterpretedSystem,
    nodes: Vec<Node>,
    intern: HashMap<Node, u32>,
    memo: HashMap<(u32, usize), Rc<Bits>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a InterpretedSystem) -> Self {
        Evaluator {
            sys,
            nodes: Vec::new(),
            intern: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    pub fn system(&self) -> &'a InterpretedSystem {
        self.sys
    }

    fn node(&mut self, n: Node) -> u32 {
        if let Some(&id) = self.intern.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.intern.insert(n, id);
        id
    }

    fn compile(&mut self, f: &Formula) -> Result<u32> {
        let sig = self.sys.signature();
        let n = match f {
            Formula::True => Node::True,
            Formula::Atom(a) => {
                let var = sig.var_id(&a.var)?;
                if !sig.var(var).domain.contains(a.value) {
                    return Err(Error::usage(format!(
                        "value {} outside the domain of `{}`",
                        a.value, a.var
                    )));
                }
                Node::Atom {
                    var,
                    eq: a.cmp == Cmp::Eq,
                    value: a.value,
                }
            }
            Formula::Not(x) => Node::Not(self.compile(x)?),
            Formula::And(x, y) => Node::And(self.compile(x)?, self.compile(y)?),
            Formula::Or(x, y) => Node::Or(self.compile(x)?, self.compile(y)?),
            Formula::Know(agent, x) => Node::Know(sig.agent_id(agent)?, self.compile(x)?),
            Formula::Next(x) => Node::Next(self.compile(x)?),
        };
        Ok(self.node(n))
    }

    fn prepare(&mut self, f: &Formula, time: usize) -> Result<u32> {
        let h = self.sys.horizon();
        if time > h {
            return Err(Error::usage(format!("time {time} exceeds horizon {h}")));
        }
        if time + f.temporal_depth() > h {
            return Err(Error::usage(format!(
                "temporal depth {} at time {time} exceeds horizon {h}",
                f.temporal_depth()
            )));
        }
        self.compile(f)
    }

    /// Runs at which `f` holds at `time`.
    pub fn label(&mut self, f: &Formula, time: usize) -> Result<Rc<Bits>> {
        let id = self.prepare(f, time)?;
        Ok(self.label_node(id, time))
    }

    pub fn eval(&mut self, f: &Formula, p: Point) -> Result<bool> {
        self.sys.check_point(p)?;
        Ok(self.label(f, p.time)?.get(p.run))
    }

    fn label_node(&mut self, id: u32, t: usize) -> Rc<Bits> {
        if let Some(b) = self.memo.get(&(id, t)) {
            return b.clone();
        }
        let n = self.sys.run_count();
        let bits = match self.nodes[id as usize] {
            Node::True => Bits::ones(n),
            Node::Atom { var, eq, value } => {
                let sig = self.sys.signature();
                let layer = self.sys.layer(t);
                let stride = sig.stride();
                Bits::from_fn(n, |r| {
                    (sig.get(&layer[r * stride..(r + 1) * stride], var) == value) == eq
                })
            }
            Node::Not(x) => self.label_node(x, t).not(),
            Node::And(x, y) => {
                let a = self.label_node(x, t);
                a.and(&self.label_node(y, t))
            }
            Node::Or(x, y) => {
                let a = self.label_node(x, t);
                a.or(&self.label_node(y, t))
            }
            Node::Know(agent, x) => {
                let body = self.label_node(x, t);
                let part = &self.sys.partitions_at(t)[agent.0];
                let mut ok = vec![true; part.num_blocks()];
                let blocks = part.block_ids();
                for r in body.not().iter_ones() {
                    ok[blocks[r] as usize] = false;
                }
                Bits::from_fn(n, |r| ok[blocks[r] as usize])
            }
            Node::Next(x) => return self.label_node(x, t + 1),
        };
        let rc = Rc::new(bits);
        self.memo.insert((id, t), rc.clone());
        rc
    }

    /// Pair witness explaining why `f` is false at `p`: a falsified `K_i` at
    /// some point reachable by `X`, and an `i`-indistinguishable point where
    /// its body fails.
    pub fn explain_false(&mut self, f: &Formula, p: Point) -> Result<Option<PairWitness>> {
        let id = self.prepare(f, p.time)?;
        self.sys.check_point(p)?;
        Ok(self.why(id, p, true))
    }

    /// Explains why node `id` does not have value `want` at `p`.
    fn why(&mut self, id: u32, p: Point, want: bool) -> Option<PairWitness> {
        if self.label_node(id, p.time).get(p.run) == want {
            return None;
        }
        match self.nodes[id as usize] {
            Node::True | Node::Atom { .. } => None,
            Node::Not(x) => self.why(x, p, !want),
            Node::And(x, y) | Node::Or(x, y) => {
                self.why(x, p, want).or_else(|| self.why(y, p, want))
            }
            Node::Next(x) => self.why(x, Point::new(p.run, p.time + 1), want),
            Node::Know(agent, x) => {
                if want {
                    // K_i false where it should be true: a body failure in the block.
                    let body = self.label_node(x, p.time);
                    let part = &self.sys.partitions_at(p.time)[agent.0];
                    let b = part.block(p.run);
                    let q = body.not().iter_ones().find(|r| part.block(*r) == b)?;
                    Some(PairWitness {
                        agent: self.sys.signature().agent_name(agent).to_string(),
                        point: Point::new(q, p.time),
                    })
                } else {
                    // K_i true where it should be false: the body itself is true at p.
                    self.why(x, p, false)
                }
            }
        }
    }

    /// Least run falsifying `f` at `time`, with a pair witness when a
    /// knowledge subformula is responsible.
    pub fn check_valid_at(&mut self, f: &Formula, time: usize) -> Result<Verdict> {
        let label = self.label(f, time)?;
        let Some(run) = label.first_zero() else {
            return Ok(Verdict::pass());
        };
        let primary = Point::new(run, time);
        let secondary = self.explain_false(f, primary)?;
        if let Some(w) = &secondary {
            self.validate_pair(primary, w)?;
        }
        Ok(Verdict {
            outcome: Outcome::Fails,
            counterexample: Some(Counterexample {
                formula: f.clone(),
                time,
                primary,
                secondary,
                direction: None,
            }),
        })
    }

    fn validate_pair(&self, primary: Point, w: &PairWitness) -> Result<()> {
        let agent = self.sys.signature().agent_id(&w.agent)?;
        let part = &self.sys.partitions_at(w.point.time)[agent.0];
        if w.point.time < primary.time || !part.same_block(primary.run, w.point.run) {
            return Err(Error::model(format!(
                "internal: invalid pair witness {} / {}",
                primary, w.point
            )));
        }
        Ok(())
    }
}

pub fn eval_at(system: &InterpretedSystem, formula: &Formula, point: Point) -> Result<bool> {
    Evaluator::new(system).eval(formula, point)
}

pub fn check_valid_at(
    system: &InterpretedSystem,
    formula: &Formula,
    time: usize,
) -> Result<Verdict> {
    Evaluator::new(system).check_valid_at(formula, time)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{Domain, Init, RunOrigin, Signature, VariableDecl};

    // A sees x in {0,1,2}; B sees only whether x == 2, from time 1 on.
    fn sys() -> InterpretedSystem {
        let a = AgentId(0);
        let b = AgentId(1);
        let vars = vec![
            VariableDecl::env("x", Domain::Range { lo: 0, hi: 2 }, Init::Free).observed_by([a]),
            VariableDecl::env("y", Domain::Bool, Init::Fixed(0)).observed_by([b]),
        ];
        let sig = Arc::new(Signature::new(vec!["A".into(), "B".into()], vars, 1).unwrap());
        let origins = (0..3)
            .map(|i| RunOrigin {
                initial: i,
                schedule: 0,
            })
            .collect();
        let mut l0 = vec![0u64; 3];
        for r in 0..3 {
            sig.set(&mut l0[r..r + 1], VarId(0), r as Value);
        }
        let mut s = InterpretedSystem::new(sig.clone(), origins, l0.clone()).unwrap();
        let mut l1 = l0;
        for r in 0..3 {
            let x = sig.get(&l1[r..r + 1], VarId(0));
            sig.set(&mut l1[r..r + 1], VarId(1), (x == 2) as Value);
        }
        s.push_layer(l1).unwrap();
        s
    }

    #[test]
    fn knowledge_follows_partitions() {
        let s = sys();
        let kb = Formula::know("B", Formula::eq("x", 2));
        assert!(!eval_at(&s, &kb, Point::new(2, 0)).unwrap());
        assert!(eval_at(&s, &kb, Point::new(2, 1)).unwrap());
        let kb0 = Formula::know("B", Formula::ne("x", 2));
        assert!(eval_at(&s, &kb0, Point::new(0, 1)).unwrap());
        assert!(eval_at(
            &s,
            &Formula::know("A", Formula::eq("x", 1)),
            Point::new(1, 0)
        )
        .unwrap());
    }

    #[test]
    fn next_and_depth_checks() {
        let s = sys();
        let f = Formula::next(Formula::eq("y", 1));
        assert!(eval_at(&s, &f, Point::new(2, 0)).unwrap());
        assert!(matches!(
            eval_at(&s, &f, Point::new(2, 1)),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            check_valid_at(&s, &Formula::True, 2),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn failing_check_reports_least_run_and_pair() {
        let s = sys();
        let f = Formula::implies(Formula::eq("x", 0), Formula::know("B", Formula::eq("x", 0)));
        let v = check_valid_at(&s, &f, 1).unwrap();
        assert_eq!(v.outcome, Outcome::Fails);
        let cx = v.counterexample.unwrap();
        assert_eq!(cx.primary, Point::new(0, 1));
        assert_eq!(
            cx.secondary,
            Some(PairWitness {
                agent: "B".into(),
                point: Point::new(1, 1)
            })
        );
        let taut = Formula::or(Formula::eq("y", 1), Formula::not(Formula::eq("y", 1)));
        assert!(check_valid_at(&s, &taut, 1).unwrap().holds());
    }

    #[test]
    fn rejects_unknown_names() {
        let s = sys();
        assert!(matches!(
            eval_at(&s, &Formula::eq("z", 1), Point::new(0, 0)),
            Err(Error::UnknownVariable(_))
        ));
        let f = Formula::know("Q", Formula::True);
        assert!(matches!(
            eval_at(&s, &f, Point::new(0, 0)),
            Err(Error::UnknownAgent(_))
        ));
        assert!(matches!(
            eval_at(&s, &Formula::eq("x", 5), Point::new(0, 0)),
            Err(Error::Usage(_))
        ));
    }
}
