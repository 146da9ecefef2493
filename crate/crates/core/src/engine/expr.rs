//! Local expressions: what an agent program may compute from its own
//! observable variables.

use std::fmt;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{AgentId, InterpretedSystem, ObservationHistory, Signature, Value, VarId};

/// Expression over an agent's locals and the environment variables it
/// observes. Booleans are 0/1; any nonzero value counts as true.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalExpr {
    Const(Value),
    /// Bare local name (`msg`) or environment name (`rr[2]`).
    Var(String),
    Not(Box<LocalExpr>),
    And(Vec<LocalExpr>),
    Or(Vec<LocalExpr>),
    Xor(Box<LocalExpr>, Box<LocalExpr>),
    Eq(Box<LocalExpr>, Box<LocalExpr>),
    Ne(Box<LocalExpr>, Box<LocalExpr>),
    In(Box<LocalExpr>, Vec<Value>),
}

impl LocalExpr {
    pub fn var(name: impl Into<String>) -> Self {
        LocalExpr::Var(name.into())
    }

    pub fn truth(b: bool) -> Self {
        LocalExpr::Const(b as Value)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: LocalExpr) -> Self {
        LocalExpr::Not(Box::new(e))
    }

    pub fn and(items: impl IntoIterator<Item = LocalExpr>) -> Self {
        LocalExpr::And(items.into_iter().collect())
    }

    pub fn or(items: impl IntoIterator<Item = LocalExpr>) -> Self {
        LocalExpr::Or(items.into_iter().collect())
    }

    pub fn xor(a: LocalExpr, b: LocalExpr) -> Self {
        LocalExpr::Xor(Box::new(a), Box::new(b))
    }

    pub fn eq(a: LocalExpr, b: LocalExpr) -> Self {
        LocalExpr::Eq(Box::new(a), Box::new(b))
    }

    pub fn ne(a: LocalExpr, b: LocalExpr) -> Self {
        LocalExpr::Ne(Box::new(a), Box::new(b))
    }

    /// `name == value`.
    pub fn is(name: &str, value: Value) -> Self {
        LocalExpr::eq(LocalExpr::var(name), LocalExpr::Const(value))
    }

    pub fn within(e: LocalExpr, set: Vec<Value>) -> Self {
        LocalExpr::In(Box::new(e), set)
    }

    /// Variable names read, in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            LocalExpr::Const(_) => {}
            LocalExpr::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v)
                }
            }
            LocalExpr::Not(e) | LocalExpr::In(e, _) => e.collect_vars(out),
            LocalExpr::And(xs) | LocalExpr::Or(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            LocalExpr::Xor(a, b) | LocalExpr::Eq(a, b) | LocalExpr::Ne(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Resolve names for `agent` and check every read is assigned by `time`.
    pub fn compile(&self, sig: &Signature, agent: AgentId, time: usize) -> Result<CompiledExpr> {
        Ok(CompiledExpr(self.lower(sig, agent, time)?))
    }

    fn lower(&self, sig: &Signature, agent: AgentId, time: usize) -> Result<Op> {
        let lower_all = |xs: &[LocalExpr]| {
            xs.iter()
                .map(|x| x.lower(sig, agent, time))
                .collect::<Result<Vec<_>>>()
        };
        let pair = |a: &LocalExpr, b: &LocalExpr| -> Result<(Box<Op>, Box<Op>)> {
            Ok((
                Box::new(a.lower(sig, agent, time)?),
                Box::new(b.lower(sig, agent, time)?),
            ))
        };
        Ok(match self {
            LocalExpr::Const(v) => Op::Const(*v),
            LocalExpr::Var(name) => {
                let id = resolve_local(sig, agent, name)?;
                if let Some(at) = sig.var(id).assigned_at {
                    if at > time {
                        return Err(Error::UnassignedHistory {
                            var: name.clone(),
                            time,
                        });
                    }
                }
                Op::Var(id)
            }
            LocalExpr::Not(e) => Op::Not(Box::new(e.lower(sig, agent, time)?)),
            LocalExpr::And(xs) => Op::And(lower_all(xs)?),
            LocalExpr::Or(xs) => Op::Or(lower_all(xs)?),
            LocalExpr::Xor(a, b) => {
                let (a, b) = pair(a, b)?;
                Op::Xor(a, b)
            }
            LocalExpr::Eq(a, b) => {
                let (a, b) = pair(a, b)?;
                Op::Eq(a, b)
            }
            LocalExpr::Ne(a, b) => {
                let (a, b) = pair(a, b)?;
                Op::Ne(a, b)
            }
            LocalExpr::In(e, set) => Op::In(Box::new(e.lower(sig, agent, time)?), set.clone()),
        })
    }
}

/// Resolve a name as seen by `agent`: its own local first, then an
/// environment variable it observes.
pub(crate) fn resolve_local(sig: &Signature, agent: AgentId, name: &str) -> Result<VarId> {
    let own = format!("{}.{name}", sig.agent_name(agent));
    let id = match sig.var_id(&own) {
        Ok(id) => id,
        Err(Error::UnknownVariable(_)) => sig.var_id(name)?,
        Err(e) => return Err(e),
    };
    if !sig.observable(agent, id) {
        return Err(Error::NotLocal {
            agent: sig.agent_name(agent).to_string(),
            msg: format!("`{name}` is not observable"),
        });
    }
    Ok(id)
}

#[derive(Debug, Clone)]
enum Op {
    Const(Value),
    Var(VarId),
    Not(Box<Op>),
    And(Vec<Op>),
    Or(Vec<Op>),
    Xor(Box<Op>, Box<Op>),
    Eq(Box<Op>, Box<Op>),
    Ne(Box<Op>, Box<Op>),
    In(Box<Op>, Vec<Value>),
}

/// A [`LocalExpr`] with names resolved against a signature.
#[derive(Debug, Clone)]
pub struct CompiledExpr(Op);

impl CompiledExpr {
    pub fn eval(&self, sig: &Signature, words: &[u64]) -> Value {
        self.eval_with(&mut |v| sig.get(words, v))
    }

    pub fn eval_with(&self, lookup: &mut dyn FnMut(VarId) -> Value) -> Value {
        eval_op(&self.0, lookup)
    }

    pub fn truth(&self, sig: &Signature, words: &[u64]) -> bool {
        self.eval(sig, words) != 0
    }
}

fn eval_op(op: &Op, lookup: &mut dyn FnMut(VarId) -> Value) -> Value {
    match op {
        Op::Const(v) => *v,
        Op::Var(id) => lookup(*id),
        Op::Not(e) => (eval_op(e, lookup) == 0) as Value,
        Op::And(xs) => xs.iter().all(|x| eval_op(x, lookup) != 0) as Value,
        Op::Or(xs) => xs.iter().any(|x| eval_op(x, lookup) != 0) as Value,
        Op::Xor(a, b) => ((eval_op(a, lookup) != 0) ^ (eval_op(b, lookup) != 0)) as Value,
        Op::Eq(a, b) => (eval_op(a, lookup) == eval_op(b, lookup)) as Value,
        Op::Ne(a, b) => (eval_op(a, lookup) != eval_op(b, lookup)) as Value,
        Op::In(e, set) => set.contains(&eval_op(e, lookup)) as Value,
    }
}

/// Value of `expr` over the agent's accumulated history: each variable is
/// read from the latest record.
pub fn eval_local_expr(
    sig: &Signature,
    expr: &LocalExpr,
    history: &ObservationHistory,
) -> Result<Value> {
    let compiled = expr.compile(sig, history.agent, history.time())?;
    let mut missing = None;
    let v = compiled.eval_with(&mut |id| {
        history.latest(id).unwrap_or_else(|| {
            missing = Some(id);
            0
        })
    });
    match missing {
        Some(id) => Err(Error::model(format!(
            "history lacks `{}`",
            sig.qualified_name(id)
        ))),
        None => Ok(v),
    }
}

/// Runs where `expr`, read by `agent`, is true at `time`.
pub fn label_local(
    sys: &InterpretedSystem,
    expr: &LocalExpr,
    agent: AgentId,
    time: usize,
) -> Result<Bits> {
    sys.check_agent(agent)?;
    if time > sys.horizon() {
        return Err(Error::usage(format!(
            "time {time} exceeds horizon {}",
            sys.horizon()
        )));
    }
    let sig = sys.signature();
    let c = expr.compile(sig, agent, time)?;
    let layer = sys.layer(time);
    let stride = sig.stride();
    Ok(Bits::from_fn(sys.run_count(), |r| {
        c.truth(sig, &layer[r * stride..(r + 1) * stride])
    }))
}

fn write_list(f: &mut fmt::Formatter<'_>, xs: &[LocalExpr], op: &str, empty: &str) -> fmt::Result {
    if xs.is_empty() {
        return write!(f, "{empty}");
    }
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, " {op} ")?;
        }
        // Comparisons bind tighter than the connectives.
        match x {
            LocalExpr::Eq(..) | LocalExpr::Ne(..) | LocalExpr::In(..) => write!(f, "{x}")?,
            _ => write_operand(f, x)?,
        }
    }
    Ok(())
}

fn write_operand(f: &mut fmt::Formatter<'_>, x: &LocalExpr) -> fmt::Result {
    match x {
        LocalExpr::And(xs) | LocalExpr::Or(xs) if xs.len() > 1 => write!(f, "({x})"),
        LocalExpr::Xor(..) | LocalExpr::Eq(..) | LocalExpr::Ne(..) | LocalExpr::In(..) => {
            write!(f, "({x})")
        }
        _ => write!(f, "{x}"),
    }
}

impl fmt::Display for LocalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalExpr::Const(v) => write!(f, "{v}"),
            LocalExpr::Var(v) => write!(f, "{v}"),
            LocalExpr::Not(e) => {
                write!(f, "!")?;
                write_operand(f, e)
            }
            LocalExpr::And(xs) => write_list(f, xs, "&&", "true"),
            LocalExpr::Or(xs) => write_list(f, xs, "||", "false"),
            LocalExpr::Xor(a, b) => {
                write_operand(f, a)?;
                write!(f, " ^ ")?;
                write_operand(f, b)
            }
            LocalExpr::Eq(a, b) | LocalExpr::Ne(a, b) => {
                write_operand(f, a)?;
                write!(
                    f,
                    " {} ",
                    if matches!(self, LocalExpr::Eq(..)) {
                        "=="
                    } else {
                        "!="
                    }
                )?;
                write_operand(f, b)
            }
            LocalExpr::In(e, set) => {
                write_operand(f, e)?;
                let items: Vec<String> = set.iter().map(|v| v.to_string()).collect();
                write!(f, " in {{{}}}", items.join(", "))
            }
        }
    }
}
