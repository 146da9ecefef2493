//! Explicit-state model checker for the logic of knowledge and time under
//! synchronous perfect-recall semantics, with a protocol executor for
//! knowledge-based programs, a key-eliminating reduction for XOR rings, and
//! the dining-cryptographers broadcast protocol as a worked case study.

pub mod bits;
pub mod cli;
pub mod dc;
pub mod engine;
pub mod error;
pub mod formula;
pub mod model;
pub mod reduction;
pub mod refine;

pub use error::{Error, Result};
pub use formula::{check_valid_at, eval_at, parse_formula, Formula, Verdict};
pub use model::{AgentId, InterpretedSystem, Point, Signature, VarId};
