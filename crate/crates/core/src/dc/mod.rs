//! Dining-cryptographers two-phase broadcast: three agents reserve one of
//! `S` slots in `S` XOR rounds, then transmit one bit each in `S` more.

mod analysis;
mod build;
mod predicates;
mod specs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use analysis::{
    candidate_system, check_spec, refine_predicates, spec_summary, synthesize_kc,
    synthesize_target, SpecInstance, SpecReport,
};
pub use build::{build_cdc, dc_system, Implementation};
pub use predicates::{
    builtin_predicate, parse_predicate, parse_predicate_file, Library, PredicateDef, PredicateSet,
    Target, BUILTIN_NAMES,
};
pub use specs::{spec, spec_instances, target_formula, SpecId};

use crate::engine::{EngineMode, Scenario};
use crate::error::{Error, Result};
use crate::formula::{parse_formula, Formula, MacroArg, Vocabulary};
use crate::model::{Domain, Signature, Value};

pub const AGENTS: [&str; 3] = ["C1", "C2", "C3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Transmit unless a conflict is known.
    #[default]
    Speculative,
    /// Transmit only when no conflict is known.
    Conservative,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speculative" => Ok(Mode::Speculative),
            "conservative" => Ok(Mode::Conservative),
            _ => Err(Error::usage(format!("unknown mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Speculative => "speculative",
            Mode::Conservative => "conservative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ScenarioKind {
    /// Any request in 0..=S, any message.
    #[default]
    Unknown,
    /// Every agent requests some slot in 1..=S.
    Referendum,
    Pinned {
        slot_request: Vec<Value>,
        msg: Vec<Value>,
    },
    /// Propositional constraint in the formula grammar.
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcParams {
    pub slots: usize,
    pub mode: Mode,
    pub scenario: ScenarioKind,
}

impl Default for DcParams {
    fn default() -> Self {
        DcParams {
            slots: 3,
            mode: Mode::Speculative,
            scenario: ScenarioKind::Unknown,
        }
    }
}

impl DcParams {
    pub fn new(slots: usize, mode: Mode, scenario: ScenarioKind) -> Self {
        DcParams {
            slots,
            mode,
            scenario,
        }
    }

    pub fn pinned(slot_request: [Value; 3], msg: [Value; 3]) -> Self {
        DcParams {
            scenario: ScenarioKind::Pinned {
                slot_request: slot_request.to_vec(),
                msg: msg.to_vec(),
            },
            ..DcParams::default()
        }
    }

    pub fn horizon(&self) -> usize {
        2 * self.slots
    }

    /// Time after reservation round `s`.
    pub fn reservation_time(&self, s: usize) -> usize {
        s
    }

    /// Time just before transmission round `s` (when `kc[s]` is decided).
    pub fn pre_transmission_time(&self, s: usize) -> usize {
        self.slots + s - 1
    }

    /// Time after transmission round `s`.
    pub fn transmission_time(&self, s: usize) -> usize {
        self.slots + s
    }

    pub fn end_time(&self) -> usize {
        2 * self.slots
    }

    pub(crate) fn check_slot(&self, s: usize) -> Result<()> {
        if s == 0 || s > self.slots {
            return Err(Error::usage(format!("slot {s} outside 1..={}", self.slots)));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let sr = |a: &str| format!("{a}.slot_request");
        let msg = |a: &str| format!("{a}.msg");
        Ok(match &self.scenario {
            ScenarioKind::Unknown => Scenario::any(),
            ScenarioKind::Referendum => AGENTS.iter().fold(Scenario::any(), |s, a| {
                s.restrict(sr(a), (1..=self.slots as Value).collect())
            }),
            ScenarioKind::Pinned {
                slot_request,
                msg: m,
            } => {
                if slot_request.len() != 3 || m.len() != 3 {
                    return Err(Error::usage("pinned vectors need one entry per agent"));
                }
                let mut s = Scenario::any();
                for (i, a) in AGENTS.iter().enumerate() {
                    s = s
                        .restrict(sr(a), vec![slot_request[i]])
                        .restrict(msg(a), vec![m[i]]);
                }
                s
            }
            ScenarioKind::Custom(text) => {
                let f = parse_formula(text, &self.vocabulary()?)?;
                if f.mentions_knowledge() || f.temporal_depth() > 0 {
                    return Err(Error::usage("scenario constraints must be propositional"));
                }
                Scenario::any().with_constraint(f)
            }
        })
    }

    /// Names for formulas over the naive-engine variable set, plus the
    /// `conflict` and `sender` macros.
    pub fn vocabulary(&self) -> Result<DcVocabulary> {
        let model = build::shell(self);
        Ok(DcVocabulary {
            sig: model.signature(EngineMode::Naive)?,
            slots: self.slots,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinnedVectors {
    pub slot_request: Vec<Value>,
    pub msg: Vec<Value>,
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    pub scenario: String,
    #[serde(default)]
    pub pinned: Option<PinnedVectors>,
    #[serde(default)]
    pub constraint: Option<String>,
}

/// Slot count for a model name.
pub fn model_slots(name: &str) -> Result<usize> {
    match name {
        "dc3" => Ok(3),
        "dc2" => Ok(2),
        _ => Err(Error::usage(format!(
            "unknown model `{name}` (expected dc3 or dc2)"
        ))),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::usage(format!("scenario file: {e}")))
    }

    /// Parameters described by the file; `mode` and `slots` fill in what
    /// it leaves out.
    pub fn params(&self, slots: usize, mode: Mode) -> Result<DcParams> {
        let slots = match &self.model {
            Some(m) => model_slots(m)?,
            None => slots,
        };
        let scenario = match (self.scenario.as_str(), &self.pinned, &self.constraint) {
            ("unknown", None, None) => ScenarioKind::Unknown,
            ("referendum", None, None) => ScenarioKind::Referendum,
            ("pinned", Some(p), None) => ScenarioKind::Pinned {
                slot_request: p.slot_request.clone(),
                msg: p.msg.clone(),
            },
            ("custom", None, Some(c)) => ScenarioKind::Custom(c.clone()),
            ("pinned", None, _) => {
                return Err(Error::usage("pinned scenario needs `pinned` vectors"))
            }
            ("custom", _, None) => {
                return Err(Error::usage("custom scenario needs a `constraint`"))
            }
            ("unknown" | "referendum" | "pinned" | "custom", _, _) => {
                return Err(Error::usage(format!(
                    "unexpected fields for scenario `{}`",
                    self.scenario
                )))
            }
            (other, _, _) => return Err(Error::usage(format!("unknown scenario `{other}`"))),
        };
        let params = DcParams {
            slots,
            mode: self.mode.unwrap_or(mode),
            scenario,
        };
        params.scenario()?;
        Ok(params)
    }
}

/// Two distinct agents both request slot `s`.
pub fn conflict_macro(s: usize, slots: usize) -> Result<Formula> {
    if s == 0 || s > slots {
        return Err(Error::usage(format!("slot {s} outside 1..={slots}")));
    }
    let req = |a: &str| Formula::eq(format!("{a}.slot_request"), s as Value);
    let pairs = [(0, 1), (0, 2), (1, 2)];
    Ok(Formula::or_all(pairs.iter().map(|(i, j)| {
        Formula::and(req(AGENTS[*i]), req(AGENTS[*j]))
    })))
}

/// Some agent other than `agent` sends `x` in slot `s`.
pub fn sender_macro(agent: &str, x: Value, s: usize, slots: usize) -> Result<Formula> {
    if !AGENTS.contains(&agent) {
        return Err(Error::UnknownAgent(agent.to_string()));
    }
    if x != 0 && x != 1 {
        return Err(Error::usage(format!("message bit {x} is not 0 or 1")));
    }
    if s == 0 || s > slots {
        return Err(Error::usage(format!("slot {s} outside 1..={slots}")));
    }
    Ok(Formula::or_all(AGENTS.iter().filter(|j| **j != agent).map(
        |j| {
            Formula::and(
                Formula::eq(format!("{j}.msg"), x),
                Formula::eq(format!("{j}.slot_request"), s as Value),
            )
        },
    )))
}

pub struct DcVocabulary {
    sig: Signature,
    slots: usize,
}

impl DcVocabulary {
    pub fn signature(&self) -> &Signature {
        &self.sig
    }
}

impl Vocabulary for DcVocabulary {
    fn has_agent(&self, name: &str) -> bool {
        self.sig.has_agent(name)
    }

    fn var_domain(&self, qualified: &str) -> Result<Domain> {
        self.sig.var_domain(qualified)
    }

    fn expand_macro(&self, name: &str, args: &[MacroArg]) -> Option<Result<Formula>> {
        let int = |a: &MacroArg| match a {
            MacroArg::Int(v) if *v >= 0 => Ok(*v),
            _ => Err(Error::usage(format!("`{name}` expects integer arguments"))),
        };
        match (name, args) {
            ("conflict", [s]) => Some(int(s).and_then(|s| conflict_macro(s as usize, self.slots))),
            ("sender", [MacroArg::Name(i), x, s]) => Some(
                int(x)
                    .and_then(|x| int(s).and_then(|s| sender_macro(i, x, s as usize, self.slots))),
            ),
            ("conflict" | "sender", _) => {
                Some(Err(Error::usage(format!("wrong arguments to `{name}`"))))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macros_expand_per_definition() {
        let c = conflict_macro(2, 3).unwrap();
        assert_eq!(c.to_string(), "((C1.slot_request == 2 && C2.slot_request == 2) || (C1.slot_request == 2 && C3.slot_request == 2)) || (C2.slot_request == 2 && C3.slot_request == 2)");
        assert!(conflict_macro(4, 3).is_err());
        let s = sender_macro("C1", 1, 1, 3).unwrap();
        assert_eq!(
            s.to_string(),
            "(C2.msg == 1 && C2.slot_request == 1) || (C3.msg == 1 && C3.slot_request == 1)"
        );
        assert!(sender_macro("C4", 1, 1, 3).is_err());
        assert!(sender_macro("C1", 2, 1, 3).is_err());
    }

    #[test]
    fn vocabulary_parses_macros() {
        let v = DcParams::default().vocabulary().unwrap();
        let f = parse_formula("K[C1](conflict(2))", &v).unwrap();
        assert_eq!(f, Formula::know("C1", conflict_macro(2, 3).unwrap()));
        let g = parse_formula("sender(C2, 0, 3) && k12", &v).unwrap();
        assert_eq!(
            g,
            Formula::and(sender_macro("C2", 0, 3, 3).unwrap(), Formula::eq("k12", 1))
        );
        assert!(parse_formula("conflict(1, 2)", &v).is_err());
        assert!(parse_formula("sender(C9, 0, 1)", &v).is_err());
    }

    #[test]
    fn scenario_files_parse() {
        let f = ScenarioFile::parse(r#"{"model":"dc2","mode":"conservative","scenario":"pinned","pinned":{"slot_request":[1,0,2],"msg":[1,1,0]}}"#).unwrap();
        let p = f.params(3, Mode::Speculative).unwrap();
        assert_eq!(p.slots, 2);
        assert_eq!(p.mode, Mode::Conservative);
        assert_eq!(
            p.scenario,
            ScenarioKind::Pinned {
                slot_request: vec![1, 0, 2],
                msg: vec![1, 1, 0]
            }
        );
        let c = ScenarioFile::parse(r#"{"scenario":"custom","constraint":"C1.msg == 1"}"#).unwrap();
        assert_eq!(
            c.params(3, Mode::Speculative).unwrap().scenario,
            ScenarioKind::Custom("C1.msg == 1".into())
        );
        assert!(ScenarioFile::parse(r#"{"scenario":"pinned"}"#)
            .unwrap()
            .params(3, Mode::Speculative)
            .is_err());
        assert!(ScenarioFile::parse(r#"{"scenario":"bogus"}"#)
            .unwrap()
            .params(3, Mode::Speculative)
            .is_err());
        assert!(ScenarioFile::parse(r#"{"scenario":"unknown","extra":1}"#).is_err());
        assert!(model_slots("dc4").is_err());
    }

    #[test]
    fn scenarios_restrict_initial_values() {
        let p = DcParams {
            scenario: ScenarioKind::Custom("C1.slot_request == 0 && !C2.msg".into()),
            ..Default::default()
        };
        assert!(p.scenario().unwrap().constraint.is_some());
        let bad = DcParams {
            scenario: ScenarioKind::Custom("K[C1](true)".into()),
            ..Default::default()
        };
        assert!(bad.scenario().is_err());
        let pin = DcParams {
            scenario: ScenarioKind::Pinned {
                slot_request: vec![1],
                msg: vec![0],
            },
            ..Default::default()
        };
        assert!(pin.scenario().is_err());
    }
}
