use std::fmt::Write as _;

use serde_json::{json, Map, Value as Json};

use crate::engine::{contributions, round_results};
use crate::error::Result;
use crate::formula::{Counterexample, Direction};
use crate::model::{Init, InterpretedSystem, Owner, Point, Value};

/// One run laid out as a contribution table: initial values, each agent's
/// announced bit per round, and the round results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub point: Point,
    pub agents: Vec<String>,
    /// Free initial variables, each with one value per agent.
    pub initial: Vec<(String, Vec<Value>)>,
    pub contrib: Vec<Vec<u8>>,
    pub rr: Vec<u8>,
}

impl Witness {
    pub fn of(sys: &InterpretedSystem, point: Point) -> Result<Witness> {
        sys.check_point(point)?;
        let sig = sys.signature();
        let mut initial: Vec<(String, Vec<Value>)> = Vec::new();
        let start = Point::new(point.run, 0);
        for (i, d) in sig.vars().iter().enumerate() {
            let Owner::Agent(a) = d.owner else { continue };
            if d.init != Init::Free {
                continue;
            }
            let v = sys.value(start, crate::model::VarId(i));
            match initial.iter_mut().find(|(n, _)| *n == d.name) {
                Some((_, vs)) => {
                    if vs.len() <= a.0 {
                        vs.resize(a.0 + 1, 0);
                    }
                    vs[a.0] = v;
                }
                None => {
                    let mut vs = vec![0; sig.agents().len()];
                    vs[a.0] = v;
                    initial.push((d.name.clone(), vs));
                }
            }
        }
        Ok(Witness {
            point,
            agents: sig.agents().to_vec(),
            initial,
            contrib: contributions(sys, point.run)?,
            rr: round_results(sys, point.run)?,
        })
    }

    pub fn initial_value(&self, name: &str) -> Option<&[Value]> {
        self.initial
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        for (name, vs) in &self.initial {
            m.insert(name.clone(), json!(vs));
        }
        m.insert("contrib".into(), json!(self.contrib));
        m.insert("rr".into(), json!(self.rr));
        Json::Object(m)
    }

    /// Initial vectors, then one row per agent and the `rr` row, one column
    /// per round.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let init: Vec<String> = self
            .initial
            .iter()
            .map(|(n, vs)| {
                format!(
                    "{n} = [{}]",
                    vs.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                )
            })
            .collect();
        let _ = writeln!(out, "{}", init.join("  "));
        let width = self
            .agents
            .iter()
            .map(|a| a.len())
            .max()
            .unwrap_or(2)
            .max(2);
        let rounds = self.rr.len();
        let _ = writeln!(
            out,
            "{:width$} |{}",
            "",
            (1..=rounds).map(|u| format!(" {u}")).collect::<String>()
        );
        for (a, row) in self.agents.iter().zip(&self.contrib) {
            let _ = writeln!(
                out,
                "{a:width$} |{}",
                row.iter().map(|b| format!(" {b}")).collect::<String>()
            );
        }
        let _ = writeln!(
            out,
            "{:width$} |{}",
            "rr",
            self.rr.iter().map(|b| format!(" {b}")).collect::<String>()
        );
        out
    }
}

/// Primary witness, then the indistinguishable one if present.
pub fn witnesses(sys: &InterpretedSystem, cx: &Counterexample) -> Result<Vec<Witness>> {
    let mut out = vec![Witness::of(sys, cx.primary)?];
    if let Some(w) = &cx.secondary {
        out.push(Witness::of(sys, w.point)?);
    }
    Ok(out)
}

pub fn direction_text(d: Direction) -> &'static str {
    match d {
        Direction::CandidateTrueKnowledgeFalse => "candidate-true-knowledge-false",
        Direction::KnowledgeTrueCandidateFalse => "knowledge-true-candidate-false",
    }
}

/// Text report for a counterexample whose witnesses were already extracted.
pub fn render_witnesses(cx: &Counterexample, ws: &[Witness]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "falsified at time {}: {}", cx.time, cx.formula);
    if let Some(d) = cx.direction {
        let _ = writeln!(out, "direction: {}", direction_text(d));
    }
    for (k, w) in ws.iter().enumerate() {
        let title = match (&cx.secondary, k) {
            (_, 0) => format!("witness run {}", w.point.run),
            (Some(pw), _) => format!(
                "indistinguishable to {} at time {}: run {}",
                pw.agent, pw.point.time, w.point.run
            ),
            (None, _) => format!("run {}", w.point.run),
        };
        let _ = writeln!(out, "\n{title}");
        out.push_str(&w.table());
    }
    out
}

pub fn render_counterexample(sys: &InterpretedSystem, cx: &Counterexample) -> Result<String> {
    Ok(render_witnesses(cx, &witnesses(sys, cx)?))
}
