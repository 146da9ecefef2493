//! Lock-step protocol execution over a ring of agents sharing XOR key bits.

mod exec;
mod expr;
mod program;

pub(crate) use exec::contrib_var;
pub use exec::{
    contributions, execute_kbp, execute_step, generate_runs, initial_assignments, round_results,
    verify_kbp_fixpoint, FixpointMismatch, MAX_RUNS,
};
pub use expr::{eval_local_expr, label_local, CompiledExpr, LocalExpr};
pub use program::{
    key_name, rr_name, said_name, AgentProgram, EngineMode, KeySchedule, ProtocolModel, Scenario,
    Statement, CONTRIB,
};
