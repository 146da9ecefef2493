use std::fmt;
use std::str::FromStr;

use crate::dc::predicates::Target;
use crate::dc::{conflict_macro, sender_macro, DcParams, Mode, AGENTS};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::model::{Domain, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecId {
    /// `kc[s] <=> !K conflict(s)` before transmission `s`.
    S1s,
    /// `kc[s] <=> K !conflict(s)` before transmission `s`.
    S1c,
    /// Every conflict is detected by everyone.
    S2,
    /// Every conflict is detected by the agents involved in it.
    S3,
    /// `rcvd0[s] <=> K sender(i, 0, s)`.
    S4a,
    /// `rcvd1[s] <=> K sender(i, 1, s)`.
    S4b,
    /// `dlvrd` iff the agent knows every other agent knows its message.
    S5,
    /// Anonymity: an agent learns who sent a message only when it is forced.
    S6,
}

impl SpecId {
    pub const ALL: [SpecId; 8] = [
        SpecId::S1s,
        SpecId::S1c,
        SpecId::S2,
        SpecId::S3,
        SpecId::S4a,
        SpecId::S4b,
        SpecId::S5,
        SpecId::S6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpecId::S1s => "1s",
            SpecId::S1c => "1c",
            SpecId::S2 => "2",
            SpecId::S3 => "3",
            SpecId::S4a => "4a",
            SpecId::S4b => "4b",
            SpecId::S5 => "5",
            SpecId::S6 => "6",
        }
    }

    pub fn per_slot(self) -> bool {
        !matches!(self, SpecId::S5 | SpecId::S6)
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpecId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown spec `{s}`")))
    }
}

fn agent_name(agent: usize) -> Result<&'static str> {
    AGENTS
        .get(agent)
        .copied()
        .ok_or_else(|| Error::usage(format!("agent #{agent} out of range")))
}

fn local(agent: &str, var: &str) -> String {
    format!("{agent}.{var}")
}

/// The knowledge condition behind `kc[s]` in the given mode.
pub(crate) fn kc_knowledge(mode: Mode, agent: &str, s: usize, slots: usize) -> Result<Formula> {
    let c = conflict_macro(s, slots)?;
    Ok(match mode {
        Mode::Speculative => Formula::not(Formula::know(agent, c)),
        Mode::Conservative => Formula::know(agent, Formula::not(c)),
    })
}

/// For every slot and message the agent might send, it knows every other
/// agent knows someone else sent that message in that slot.
pub(crate) fn dlvrd_knowledge(agent: &str, slots: usize) -> Result<Formula> {
    let mut parts = Vec::new();
    for x in 0..2 {
        for t in 1..=slots {
            let sent = Formula::and(
                Formula::eq(local(agent, "msg"), x),
                Formula::eq(local(agent, "slot_request"), t as Value),
            );
            let others = AGENTS
                .iter()
                .filter(|j| **j != agent)
                .map(|j| Ok(Formula::know(*j, sender_macro(j, x, t, slots)?)))
                .collect::<Result<Vec<_>>>()?;
            parts.push(Formula::implies(
                sent,
                Formula::know(agent, Formula::and_all(others)),
            ));
        }
    }
    Ok(Formula::and_all(parts))
}

/// Specification formula and the time it is checked at.
pub fn spec(
    id: SpecId,
    params: &DcParams,
    agent: usize,
    slot: Option<usize>,
) -> Result<(Formula, usize)> {
    let i = agent_name(agent)?;
    let n = params.slots;
    let slot = if id.per_slot() {
        let s = slot.ok_or_else(|| Error::usage(format!("spec {id} needs a slot")))?;
        params.check_slot(s)?;
        s
    } else {
        0
    };
    let s = slot;
    Ok(match id {
        SpecId::S1s | SpecId::S1c => {
            let mode = if id == SpecId::S1s {
                Mode::Speculative
            } else {
                Mode::Conservative
            };
            let kc = Formula::eq(local(i, &format!("kc[{s}]")), 1);
            (
                Formula::iff(kc, kc_knowledge(mode, i, s, n)?),
                params.pre_transmission_time(s),
            )
        }
        SpecId::S2 => {
            let c = conflict_macro(s, n)?;
            (
                Formula::implies(c.clone(), Formula::know(i, c)),
                params.end_time(),
            )
        }
        SpecId::S3 => {
            let c = conflict_macro(s, n)?;
            let mine = Formula::and(c.clone(), Formula::eq(local(i, "slot_request"), s as Value));
            (
                Formula::implies(mine, Formula::know(i, c)),
                params.end_time(),
            )
        }
        SpecId::S4a | SpecId::S4b => {
            let x = if id == SpecId::S4a { 0 } else { 1 };
            let rcvd = Formula::eq(local(i, &format!("rcvd{x}[{s}]")), 1);
            (
                Formula::iff(rcvd, Formula::know(i, sender_macro(i, x, s, n)?)),
                params.transmission_time(s),
            )
        }
        SpecId::S5 => {
            let d = Formula::eq(local(i, "dlvrd"), 1);
            (Formula::iff(d, dlvrd_knowledge(i, n)?), params.end_time())
        }
        SpecId::S6 => {
            let others: Vec<&str> = AGENTS.iter().copied().filter(|j| *j != i).collect();
            let same = (0..2).rev().map(|x| {
                Formula::know(
                    i,
                    Formula::and_all(others.iter().map(|j| Formula::eq(local(j, "msg"), x))),
                )
            });
            let ignorant =
                Formula::and_all(others.iter().map(|j| {
                    Formula::not(Formula::know_value(i, &local(j, "msg"), &Domain::Bool))
                }));
            (
                Formula::or(Formula::or_all(same), ignorant),
                params.end_time(),
            )
        }
    })
}

/// Every (agent, slot) instance of a spec, in canonical order.
pub fn spec_instances(id: SpecId, params: &DcParams) -> Vec<(usize, Option<usize>)> {
    let mut out = Vec::new();
    for a in 0..AGENTS.len() {
        if id.per_slot() {
            out.extend((1..=params.slots).map(|s| (a, Some(s))));
        } else {
            out.push((a, None));
        }
    }
    out
}

/// Knowledge formula a predicate for `target` must be equivalent to, and
/// the time the equivalence is checked at.
pub fn target_formula(
    target: Target,
    params: &DcParams,
    agent: usize,
    slot: usize,
) -> Result<(Formula, usize)> {
    let i = agent_name(agent)?;
    let n = params.slots;
    if target.per_slot() {
        params.check_slot(slot)?;
    }
    Ok(match target {
        Target::Kc => (
            kc_knowledge(params.mode, i, slot, n)?,
            params.pre_transmission_time(slot),
        ),
        Target::ConflictFree => {
            let someone = Formula::or_all(
                AGENTS
                    .iter()
                    .map(|j| Formula::eq(local(j, "slot_request"), slot as Value)),
            );
            let body = Formula::and(someone, Formula::not(conflict_macro(slot, n)?));
            (Formula::know(i, body), params.reservation_time(n))
        }
        Target::Rcvd0 | Target::Rcvd1 => {
            let x = if target == Target::Rcvd0 { 0 } else { 1 };
            (
                Formula::know(i, sender_macro(i, x, slot, n)?),
                params.transmission_time(slot),
            )
        }
        Target::Dlvrd => (dlvrd_knowledge(i, n)?, params.end_time()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::DcParams;
    use crate::formula::parse_formula;

    #[test]
    fn spec_shapes_and_times() {
        let p = DcParams::default();
        let v = p.vocabulary().unwrap();
        let (f, t) = spec(SpecId::S2, &p, 0, Some(2)).unwrap();
        assert_eq!(
            f,
            parse_formula("conflict(2) => K[C1](conflict(2))", &v).unwrap()
        );
        assert_eq!(t, 6);
        let (f, t) = spec(SpecId::S1s, &p, 0, Some(1)).unwrap();
        assert_eq!(
            f,
            parse_formula("C1.kc[1] <=> !K[C1](conflict(1))", &v).unwrap()
        );
        assert_eq!(t, 3);
        let (f, _) = spec(SpecId::S6, &p, 0, None).unwrap();
        let text = "(K[C1](C2.msg == 1 && C3.msg == 1) || K[C1](C2.msg == 0 && C3.msg == 0)) \
                    || (!Khat[C1](C2.msg) && !Khat[C1](C3.msg))";
        assert_eq!(f, parse_formula(text, &v).unwrap());
        assert_eq!(spec(SpecId::S4b, &p, 2, Some(3)).unwrap().1, 6);
        assert!(spec(SpecId::S2, &p, 0, None).is_err());
        assert!(spec(SpecId::S2, &p, 3, Some(1)).is_err());
        assert!(spec(SpecId::S2, &p, 0, Some(4)).is_err());
    }

    #[test]
    fn spec_names_round_trip() {
        for id in SpecId::ALL {
            assert_eq!(id.name().parse::<SpecId>().unwrap(), id);
        }
        assert!("bogus".parse::<SpecId>().is_err());
        assert_eq!(spec_instances(SpecId::S1s, &DcParams::default()).len(), 9);
        assert_eq!(spec_instances(SpecId::S5, &DcParams::default()).len(), 3);
    }
}
