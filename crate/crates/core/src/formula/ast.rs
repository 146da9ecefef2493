use std::fmt;

use crate::model::{Domain, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Ne,
}

/// `var == value` or `var != value`, with `var` a qualified name such as
/// `C1.msg` (agent-local) or `rr[2]` (environment).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub var: String,
    pub cmp: Cmp,
    pub value: Value,
}

/// Temporal-epistemic formula. Implication, bi-implication, `false` and
/// value-knowledge are derived forms built by the constructors below.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Know(String, Box<Formula>),
    Next(Box<Formula>),
}

impl Formula {
    pub fn falsum() -> Self {
        Formula::Not(Box::new(Formula::True))
    }

    pub fn eq(var: impl Into<String>, value: Value) -> Self {
        Formula::Atom(Atom {
            var: var.into(),
            cmp: Cmp::Eq,
            value,
        })
    }

    pub fn ne(var: impl Into<String>, value: Value) -> Self {
        Formula::Atom(Atom {
            var: var.into(),
            cmp: Cmp::Ne,
            value,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::or(
            Formula::and(a.clone(), b.clone()),
            Formula::and(Formula::not(a), Formula::not(b)),
        )
    }

    pub fn know(agent: impl Into<String>, f: Formula) -> Self {
        Formula::Know(agent.into(), Box::new(f))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn next_n(n: usize, f: Formula) -> Self {
        (0..n).fold(f, |acc, _| Formula::next(acc))
    }

    /// Left-nested conjunction; empty input gives `true`.
    pub fn and_all(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; empty input gives `false`.
    pub fn or_all(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or_else(Formula::falsum)
    }

    /// Agent knows the value of `var`: a disjunction of knowing each value.
    pub fn know_value(agent: &str, var: &str, domain: &Domain) -> Self {
        let values = match domain {
            Domain::Bool => vec![1, 0],
            d => d.values(),
        };
        Formula::or_all(
            values
                .into_iter()
                .map(|v| Formula::know(agent, Formula::eq(var, v))),
        )
    }

    /// Agent knows whether the atom-level formula holds.
    pub fn know_whether(agent: &str, f: Formula) -> Self {
        Formula::or(
            Formula::know(agent, f.clone()),
            Formula::know(agent, Formula::not(f)),
        )
    }

    /// Maximum nesting of `X` along any path.
    pub fn temporal_depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Know(_, f) => f.temporal_depth(),
            Formula::And(a, b) | Formula::Or(a, b) => a.temporal_depth().max(b.temporal_depth()),
            Formula::Next(f) => 1 + f.temporal_depth(),
        }
    }

    pub fn mentions_knowledge(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => false,
            Formula::Know(..) => true,
            Formula::Not(f) | Formula::Next(f) => f.mentions_knowledge(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.mentions_knowledge() || b.mentions_knowledge()
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Next(f) | Formula::Know(_, f) => f.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Not(f) | Formula::Next(f) | Formula::Know(_, f) => 1 + f.size(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Evaluate a knowledge- and time-free formula against a lookup.
    pub fn eval_propositional(
        &self,
        lookup: &mut dyn FnMut(&str) -> crate::Result<Value>,
    ) -> crate::Result<bool> {
        Ok(match self {
            Formula::True => true,
            Formula::Atom(a) => {
                let v = lookup(&a.var)?;
                (v == a.value) == (a.cmp == Cmp::Eq)
            }
            Formula::Not(f) => !f.eval_propositional(lookup)?,
            Formula::And(a, b) => a.eval_propositional(lookup)? && b.eval_propositional(lookup)?,
            Formula::Or(a, b) => a.eval_propositional(lookup)? || b.eval_propositional(lookup)?,
            Formula::Know(..) | Formula::Next(_) => {
                return Err(crate::Error::usage(
                    "knowledge and time operators are not allowed here",
                ))
            }
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.cmp {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        };
        write!(f, "{} {op} {}", self.var, self.value)
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, x: &Formula) -> fmt::Result {
    match x {
        Formula::And(..) | Formula::Or(..) => write!(f, "({x})"),
        _ => write!(f, "{x}"),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Not(inner) if **inner == Formula::True => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(inner) => {
                write!(f, "!")?;
                write_operand(f, inner)
            }
            Formula::And(a, b) => {
                write_operand(f, a)?;
                write!(f, " && ")?;
                write_operand(f, b)
            }
            Formula::Or(a, b) => {
                write_operand(f, a)?;
                write!(f, " || ")?;
                write_operand(f, b)
            }
            Formula::Know(agent, inner) => write!(f, "K[{agent}]({inner})"),
            Formula::Next(inner) => {
                write!(f, "X ")?;
                write_operand(f, inner)
            }
        }
    }
}
