//! Temporal-epistemic formulas: AST, parser and evaluator.

mod ast;
mod eval;
mod parse;

pub use ast::{Atom, Cmp, Formula};
pub use eval::{
    check_valid_at, eval_at, Counterexample, Direction, Evaluator, Outcome, PairWitness, Verdict,
};
pub use parse::{parse_formula, MacroArg, Vocabulary};
