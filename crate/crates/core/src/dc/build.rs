use crate::dc::predicates::{PredicateSet, Target};
use crate::dc::specs::{dlvrd_knowledge, kc_knowledge};
use crate::dc::{sender_macro, DcParams, AGENTS};
use crate::engine::{
    execute_kbp, generate_runs, AgentProgram, EngineMode, LocalExpr, ProtocolModel, Statement,
};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::model::{AgentId, Domain, Init, InterpretedSystem, Value, VariableDecl};

#[derive(Debug, Clone, PartialEq)]
pub enum Implementation {
    /// Knowledge tests replaced by local predicates.
    Candidate(PredicateSet),
    /// The knowledge-based program itself.
    Kbp,
}

fn decls(params: &DcParams, with_kc: bool) -> Vec<VariableDecl> {
    let s_max = params.slots;
    let mut vars = Vec::new();
    for a in 0..AGENTS.len() {
        let me = AgentId(a);
        vars.push(VariableDecl::local(
            me,
            "slot_request",
            Domain::Range {
                lo: 0,
                hi: s_max as Value,
            },
            Init::Free,
        ));
        vars.push(VariableDecl::local(me, "msg", Domain::Bool, Init::Free));
        for s in 1..=s_max {
            if with_kc {
                let kc = VariableDecl::local(me, format!("kc[{s}]"), Domain::Bool, Init::Fixed(0));
                vars.push(kc.assigned_at(params.pre_transmission_time(s)));
            }
            for x in 0..2 {
                let r =
                    VariableDecl::local(me, format!("rcvd{x}[{s}]"), Domain::Bool, Init::Fixed(0));
                vars.push(r.assigned_at(params.transmission_time(s)));
            }
        }
        vars.push(
            VariableDecl::local(me, "dlvrd", Domain::Bool, Init::Fixed(0))
                .assigned_at(params.end_time()),
        );
    }
    vars
}

fn initial_order() -> Vec<String> {
    let sr = AGENTS.iter().map(|a| format!("{a}.slot_request"));
    sr.chain(AGENTS.iter().map(|a| format!("{a}.msg")))
        .collect()
}

fn model(params: &DcParams, with_kc: bool, programs: Vec<AgentProgram>) -> ProtocolModel {
    ProtocolModel {
        agents: AGENTS.iter().map(|a| a.to_string()).collect(),
        vars: decls(params, with_kc),
        programs,
        initial_order: initial_order(),
        extra_observations: Vec::new(),
    }
}

/// Full variable set with placeholder programs; used for name resolution.
pub(crate) fn shell(params: &DcParams) -> ProtocolModel {
    let silent = |a: &str| AgentProgram {
        agent: a.to_string(),
        phases: vec![vec![Statement::Announce(LocalExpr::truth(false))]; params.horizon()],
    };
    model(params, true, AGENTS.iter().map(|a| silent(a)).collect())
}

fn reservation(u: usize) -> Statement {
    Statement::Announce(LocalExpr::is("slot_request", u as Value))
}

/// Candidate implementation (predicates plugged in) or the
/// knowledge-based program, per agent and step.
pub fn build_cdc(params: &DcParams, imp: &Implementation) -> Result<ProtocolModel> {
    if params.slots == 0 {
        return Err(Error::usage("at least one slot is required"));
    }
    let n = params.slots;
    let mut programs = Vec::new();
    for (a, name) in AGENTS.iter().enumerate() {
        let mut phases: Vec<Vec<Statement>> = (1..=n).map(|u| vec![reservation(u)]).collect();
        match imp {
            Implementation::Candidate(set) => {
                let pred = |t: Target, s: usize| {
                    set.get(t, a, s).cloned().ok_or_else(|| {
                        Error::usage(format!(
                            "predicate set lacks `{t}` for {name}{}",
                            if s > 0 {
                                format!(" slot {s}")
                            } else {
                                String::new()
                            }
                        ))
                    })
                };
                let assign = |var: String, expr: LocalExpr| Statement::AssignLocal { var, expr };
                phases[n - 1].push(assign("kc[1]".into(), pred(Target::Kc, 1)?));
                for s in 1..=n {
                    let send = LocalExpr::and([
                        LocalExpr::is("slot_request", s as Value),
                        LocalExpr::var(format!("kc[{s}]")),
                        LocalExpr::var("msg"),
                    ]);
                    let mut block = vec![
                        Statement::Announce(send),
                        assign(format!("rcvd0[{s}]"), pred(Target::Rcvd0, s)?),
                        assign(format!("rcvd1[{s}]"), pred(Target::Rcvd1, s)?),
                    ];
                    if s < n {
                        block.push(assign(format!("kc[{}]", s + 1), pred(Target::Kc, s + 1)?));
                    } else {
                        block.push(assign("dlvrd".into(), pred(Target::Dlvrd, 0)?));
                    }
                    phases.push(block);
                }
            }
            Implementation::Kbp => {
                for s in 1..=n {
                    let test = Formula::and(
                        Formula::eq(format!("{name}.slot_request"), s as Value),
                        kc_knowledge(params.mode, name, s, n)?,
                    );
                    let know_sender = |x: Value| -> Result<Formula> {
                        Ok(Formula::know(*name, sender_macro(name, x, s, n)?))
                    };
                    let mut block = vec![
                        Statement::IfKnowledge {
                            test,
                            then: LocalExpr::var("msg"),
                            otherwise: LocalExpr::truth(false),
                        },
                        Statement::AssignKnowledge {
                            var: format!("rcvd0[{s}]"),
                            formula: know_sender(0)?,
                        },
                        Statement::AssignKnowledge {
                            var: format!("rcvd1[{s}]"),
                            formula: know_sender(1)?,
                        },
                    ];
                    if s == n {
                        block.push(Statement::AssignKnowledge {
                            var: "dlvrd".into(),
                            formula: dlvrd_knowledge(name, n)?,
                        });
                    }
                    phases.push(block);
                }
            }
        }
        programs.push(AgentProgram {
            agent: name.to_string(),
            phases,
        });
    }
    Ok(model(
        params,
        matches!(imp, Implementation::Candidate(_)),
        programs,
    ))
}

/// Build the model and its run set under the parameters' scenario.
pub fn dc_system(
    params: &DcParams,
    imp: &Implementation,
    engine: EngineMode,
) -> Result<(ProtocolModel, InterpretedSystem)> {
    let model = build_cdc(params, imp)?;
    let scenario = params.scenario()?;
    let sys = match imp {
        Implementation::Kbp => execute_kbp(&model, &scenario, engine)?,
        Implementation::Candidate(_) => generate_runs(&model, &scenario, engine)?,
    };
    Ok((model, sys))
}
