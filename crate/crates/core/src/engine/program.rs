use crate::engine::expr::LocalExpr;
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::model::{AgentId, Domain, Init, Owner, Signature, Value, VariableDecl};

/// One statement of an agent's per-step block. The announcing statement
/// (`Announce` or `IfKnowledge`) reads the state before the step; the
/// assignments read the state after the step's round result is known.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Announce(LocalExpr),
    AssignLocal {
        var: String,
        expr: LocalExpr,
    },
    /// `var := formula`, where the formula is a boolean combination of the
    /// agent's observable atoms and its own knowledge operators.
    AssignKnowledge {
        var: String,
        formula: Formula,
    },
    /// Announce `then` if `test` holds, else `otherwise`.
    IfKnowledge {
        test: Formula,
        then: LocalExpr,
        otherwise: LocalExpr,
    },
}

impl Statement {
    pub fn announces(&self) -> bool {
        matches!(self, Statement::Announce(_) | Statement::IfKnowledge { .. })
    }

    pub fn mentions_knowledge(&self) -> bool {
        matches!(
            self,
            Statement::AssignKnowledge { .. } | Statement::IfKnowledge { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentProgram {
    pub agent: String,
    /// One statement block per step, steps 1..=T.
    pub phases: Vec<Vec<Statement>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EngineMode {
    /// Enumerate every key schedule; the ground-truth oracle.
    Naive,
    /// One run per initial assignment; keys quotiented out.
    #[default]
    Reduced,
}

/// Agents in a ring running lock-step XOR broadcast rounds, with their
/// declared local variables and programs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolModel {
    pub agents: Vec<String>,
    /// Agent-local (or environment) variables declared by the protocol.
    pub vars: Vec<VariableDecl>,
    pub programs: Vec<AgentProgram>,
    /// Qualified names of free initial variables, most significant first,
    /// fixing the canonical enumeration order of initial assignments.
    pub initial_order: Vec<String>,
    /// Extra `(qualified variable, agent)` visibility grants.
    pub extra_observations: Vec<(String, String)>,
}

/// Name of the engine-provided per-agent record of its own contribution.
pub const CONTRIB: &str = "contrib";

pub fn rr_name(step: usize) -> String {
    format!("rr[{step}]")
}

/// Ring key between agent positions `e` and `e + 1` (0-based), e.g. `k12`.
pub fn key_name(e: usize, n: usize) -> String {
    format!("k{}{}", e + 1, (e + 1) % n + 1)
}

pub fn said_name(i: usize) -> String {
    format!("said[{}]", i + 1)
}

impl ProtocolModel {
    pub fn horizon(&self) -> usize {
        self.programs.first().map_or(0, |p| p.phases.len())
    }

    pub fn has_knowledge(&self) -> bool {
        self.programs
            .iter()
            .flat_map(|p| p.phases.iter().flatten())
            .any(Statement::mentions_knowledge)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agents.len();
        if n < 3 {
            return Err(Error::model("a ring needs at least three agents"));
        }
        if self.programs.len() != n {
            return Err(Error::model("exactly one program per agent is required"));
        }
        let t = self.horizon();
        if t == 0 {
            return Err(Error::model("programs must have at least one step"));
        }
        for (p, name) in self.programs.iter().zip(&self.agents) {
            if &p.agent != name {
                return Err(Error::model(format!(
                    "program for `{}` out of order (expected `{name}`)",
                    p.agent
                )));
            }
            if p.phases.len() != t {
                return Err(Error::model(format!(
                    "program of `{name}` has {} steps, expected {t}",
                    p.phases.len()
                )));
            }
            for (u, block) in p.phases.iter().enumerate() {
                let k = block.iter().filter(|s| s.announces()).count();
                if k != 1 {
                    return Err(Error::model(format!(
                        "`{name}` step {}: {k} announcements, expected one",
                        u + 1
                    )));
                }
            }
        }
        for v in &self.vars {
            if v.init == Init::Fresh {
                return Err(Error::model(format!(
                    "`{}`: fresh values are reserved for ring keys",
                    v.name
                )));
            }
            if v.name == CONTRIB && matches!(v.owner, Owner::Agent(_)) {
                return Err(Error::model(format!("`{CONTRIB}` is reserved")));
            }
        }
        Ok(())
    }

    /// Variable layout for the given engine: declared variables, each
    /// agent's contribution record, the round results, and in naive mode
    /// the ring keys and public announcements.
    pub fn signature(&self, mode: EngineMode) -> Result<Signature> {
        self.validate()?;
        let n = self.agents.len();
        let t = self.horizon();
        let all: Vec<AgentId> = (0..n).map(AgentId).collect();
        let mut vars = self.vars.clone();
        for a in 0..n {
            vars.push(VariableDecl::local(
                AgentId(a),
                CONTRIB,
                Domain::Bool,
                Init::Fixed(0),
            ));
        }
        for u in 1..=t {
            vars.push(
                VariableDecl::env(rr_name(u), Domain::Bool, Init::Fixed(0))
                    .observed_by(all.clone())
                    .assigned_at(u),
            );
        }
        let ring: Vec<String> = (0..n)
            .map(|e| key_name(e, n))
            .chain((0..n).map(said_name))
            .collect();
        match mode {
            EngineMode::Naive => {
                for e in 0..n {
                    let seen = [AgentId(e), AgentId((e + 1) % n)];
                    vars.push(
                        VariableDecl::env(key_name(e, n), Domain::Bool, Init::Fresh)
                            .observed_by(seen),
                    );
                }
                for i in 0..n {
                    vars.push(
                        VariableDecl::env(said_name(i), Domain::Bool, Init::Fixed(0))
                            .observed_by(all.clone()),
                    );
                }
            }
            EngineMode::Reduced if n != 3 => {
                return Err(Error::usage(
                    "the reduced engine supports exactly three agents; use --engine naive",
                ));
            }
            EngineMode::Reduced => {}
        }
        for (var, agent) in &self.extra_observations {
            let a = self
                .agents
                .iter()
                .position(|x| x == agent)
                .ok_or_else(|| Error::UnknownAgent(agent.clone()))?;
            let decl = vars
                .iter_mut()
                .find(|d| qualified(&self.agents, d) == *var)
                .ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            if !decl.observable_by.contains(&AgentId(a)) {
                decl.observable_by.push(AgentId(a));
            }
        }
        let sig = Signature::new(self.agents.clone(), vars, t)?;
        Ok(match mode {
            EngineMode::Naive => sig,
            EngineMode::Reduced => sig.with_elided(ring),
        })
    }
}

fn qualified(agents: &[String], d: &VariableDecl) -> String {
    match d.owner {
        Owner::Environment => d.name.clone(),
        Owner::Agent(a) => format!("{}.{}", agents[a.0], d.name),
    }
}

/// Initial-condition constraint: allowed values per free variable plus an
/// optional propositional formula over initial values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub restrictions: Vec<(String, Vec<Value>)>,
    pub constraint: Option<Formula>,
}

impl Scenario {
    pub fn any() -> Self {
        Scenario::default()
    }

    pub fn restrict(mut self, var: impl Into<String>, values: Vec<Value>) -> Self {
        self.restrictions.push((var.into(), values));
        self
    }

    pub fn with_constraint(mut self, f: Formula) -> Self {
        self.constraint = Some(match self.constraint.take() {
            Some(g) => Formula::and(g, f),
            None => f,
        });
        self
    }

    /// Fix each listed variable to a single value.
    pub fn pinned(values: &[(String, Value)]) -> Self {
        values.iter().fold(Scenario::any(), |s, (var, v)| {
            s.restrict(var.clone(), vec![*v])
        })
    }
}

/// Key bits for every step and ring edge: `bits[u - 1][e]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySchedule {
    pub bits: Vec<Vec<bool>>,
}

impl KeySchedule {
    pub fn zeros(horizon: usize, edges: usize) -> Self {
        KeySchedule {
            bits: vec![vec![false; edges]; horizon],
        }
    }

    /// Schedule number `index` in canonical order: step 1, edge 0 is the most
    /// significant bit.
    pub fn from_index(index: u64, horizon: usize, edges: usize) -> Self {
        let total = horizon * edges;
        let bits = (0..horizon)
            .map(|u| {
                (0..edges)
                    .map(|e| (index >> (total - 1 - (u * edges + e))) & 1 == 1)
                    .collect()
            })
            .collect();
        KeySchedule { bits }
    }
}
