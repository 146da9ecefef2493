//! Slot-parameterized local predicates and the predicate-file grammar.
//!
//! ```text
//! e     := e "||" e | e "&&" e | "!" e | "(" e ")" | "true" | "false" | INT
//!        | "rr[" idx "]" | NAME ("[" idx "]")? | e ("==" | "!=") e | e "in" set
//!        | ("any" | "all") VAR "in" range ("except" idx)? ":" e
//!        | PRED | PRED "(" idx ")"
//! idx   := term (("+" | "-") term)*       term := INT | "s" | VAR | "slot_request"
//! set   := "{" INT ("," INT)* "}" | range ("except" idx)?
//! range := idx ".." idx
//! ```
//!
//! `s` is the slot parameter. `rr[slot_request + k]` expands statically into
//! a disjunction over the possible requests. `PRED` names an earlier
//! predicate; bare use instantiates it at the current `s`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::LocalExpr;
use crate::error::{Error, Result};
use crate::model::Value;

/// What a predicate stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Kc,
    ConflictFree,
    Rcvd0,
    Rcvd1,
    Dlvrd,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::Kc,
        Target::ConflictFree,
        Target::Rcvd0,
        Target::Rcvd1,
        Target::Dlvrd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Kc => "kc",
            Target::ConflictFree => "conflict_free",
            Target::Rcvd0 => "rcvd0",
            Target::Rcvd1 => "rcvd1",
            Target::Dlvrd => "dlvrd",
        }
    }

    /// Whether the predicate takes a slot parameter.
    pub fn per_slot(self) -> bool {
        self != Target::Dlvrd
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown predicate target `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDef {
    pub name: String,
    pub target: Target,
    pub expr: String,
}

impl PredicateDef {
    pub fn new(name: &str, target: Target, expr: impl Into<String>) -> Self {
        PredicateDef {
            name: name.to_string(),
            target,
            expr: expr.into(),
        }
    }

    /// Expression for slot `s`, resolving references through `library`.
    pub fn instantiate(&self, s: usize, slots: usize, library: &Library) -> Result<LocalExpr> {
        parse_predicate(&self.expr, s, slots, library)
    }
}

pub const BUILTIN_NAMES: [&str; 11] = [
    "kc_guess",
    "kc_literal",
    "cf1",
    "cf2",
    "cf3",
    "rcvd1_g1",
    "rcvd0_g1",
    "rcvd1_final",
    "rcvd0_final",
    "rcvd1_literal",
    "dlvrd_final",
];

/// Built-in predicate for a protocol with `slots` slots.
pub fn builtin_predicate(name: &str, slots: usize) -> Result<PredicateDef> {
    let n = slots;
    let others = format!("any t in 1..{n} except s: rr[t]");
    let (target, expr) = match name {
        // kc[s] := !(slot_request = s && rr[s] = false)
        "kc_guess" => (Target::Kc, "!(slot_request == s && !rr[s])".to_string()),
        // Negation placed on rr[s] instead: the reading that fails.
        "kc_literal" => (Target::Kc, "!(slot_request == s && rr[s])".to_string()),
        "cf1" => (Target::ConflictFree, format!("rr[s] && {others}")),
        "cf2" => (Target::ConflictFree, format!("cf1 || (rr[s] && slot_request in 1..{n} except s && !rr[slot_request])")),
        "cf3" => (Target::ConflictFree, "cf2 || (rr[s] && slot_request != s)".to_string()),
        "rcvd1_g1" => (Target::Rcvd1, format!("rr[s] && cf3 && slot_request != s && rr[s+{n}]")),
        "rcvd0_g1" => (Target::Rcvd0, format!("rr[s] && cf3 && slot_request != s && !rr[s+{n}]")),
        "rcvd1_final" => (
            Target::Rcvd1,
            format!(
                "(cf3 && slot_request != s && rr[s+{n}]) || (slot_request == s && rr[s] && rr[s+{n}] != msg && !({others}))"
            ),
        ),
        "rcvd0_final" => (
            Target::Rcvd0,
            format!(
                "(cf3 && slot_request != s && !rr[s+{n}]) || (slot_request == s && rr[s] && rr[s+{n}] != msg && !({others}))"
            ),
        ),
        // Revised guess as printed: no test of the transmitted bit in the
        // first disjunct and no reservation test in the second.
        "rcvd1_literal" => (
            Target::Rcvd1,
            format!("(rr[s] && cf3 && slot_request != s) || (slot_request == s && rr[s+{n}] != msg && !({others}))"),
        ),
        "dlvrd_final" => (Target::Dlvrd, format!("slot_request == 0 || any u in 1..{n}: (slot_request == u && cf3(u))")),
        _ => return Err(Error::usage(format!("unknown predicate `{name}`"))),
    };
    Ok(PredicateDef::new(name, target, expr))
}

/// Named predicates available for reference, builtins first.
#[derive(Debug, Clone)]
pub struct Library {
    defs: HashMap<String, PredicateDef>,
}

impl Library {
    pub fn builtin(slots: usize) -> Self {
        let defs = BUILTIN_NAMES
            .iter()
            .map(|n| (n.to_string(), builtin_predicate(n, slots).expect("builtin")))
            .collect();
        Library { defs }
    }

    /// Add (or shadow) a definition.
    pub fn add(&mut self, def: PredicateDef) {
        self.defs.insert(def.name.clone(), def);
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDef> {
        self.defs.get(name)
    }
}

/// Parse a predicate-file body: a JSON list of definitions.
pub fn parse_predicate_file(text: &str) -> Result<Vec<PredicateDef>> {
    serde_json::from_str(text).map_err(|e| Error::usage(format!("predicate file: {e}")))
}

/// Parse `text` with the slot parameter bound to `s`.
pub fn parse_predicate(text: &str, s: usize, slots: usize, library: &Library) -> Result<LocalExpr> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        slots,
        library,
        env: vec![("s".into(), s as Value)],
        depth: 0,
    };
    let e = p.or()?;
    if p.pos < p.tokens.len() {
        return Err(Error::syntax(
            p.here(),
            format!("unexpected `{}`", p.tokens[p.pos].0),
        ));
    }
    Ok(e)
}

const SYMBOLS: [&str; 16] = [
    "||", "&&", "==", "!=", "..", "!", "(", ")", "[", "]", "{", "}", ",", ":", "+", "-",
];

fn lex(text: &str) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphanumeric() || c == '_' {
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((text[start..i].to_string(), start));
            continue;
        }
        match SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            Some(s) => {
                out.push((s.to_string(), start));
                i += s.len();
            }
            None => return Err(Error::syntax(start, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

/// `constant + (slot_request if dynamic)`.
#[derive(Debug, Clone, Copy)]
struct Index {
    offset: Value,
    dynamic: bool,
}

struct Parser<'a> {
    tokens: Vec<(String, usize)>,
    pos: usize,
    end: usize,
    slots: usize,
    library: &'a Library,
    env: Vec<(String, Value)>,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|(t, _)| t.as_str())
    }

    fn peek_at(&self, k: usize) -> Option<&str> {
        self.tokens.get(self.pos + k).map(|(t, _)| t.as_str())
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn eat(&mut self, t: &str) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(Error::syntax(self.here(), format!("expected `{t}`")))
        }
    }

    fn next_token(&mut self) -> Result<String> {
        let t = self
            .peek()
            .ok_or_else(|| Error::syntax(self.end, "unexpected end of predicate"))?
            .to_string();
        self.pos += 1;
        Ok(t)
    }

    fn bound(&self, name: &str) -> Option<Value> {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    fn or(&mut self) -> Result<LocalExpr> {
        let mut xs = vec![self.and()?];
        while self.eat("||") {
            xs.push(self.and()?);
        }
        Ok(if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            LocalExpr::Or(xs)
        })
    }

    fn and(&mut self) -> Result<LocalExpr> {
        let mut xs = vec![self.unary()?];
        while self.eat("&&") {
            xs.push(self.unary()?);
        }
        Ok(if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            LocalExpr::And(xs)
        })
    }

    fn unary(&mut self) -> Result<LocalExpr> {
        if self.eat("!") {
            return Ok(LocalExpr::not(self.unary()?));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<LocalExpr> {
        let lhs = self.atom()?;
        if self.eat("==") {
            Ok(LocalExpr::eq(lhs, self.atom()?))
        } else if self.eat("!=") {
            Ok(LocalExpr::ne(lhs, self.atom()?))
        } else if self.eat("in") {
            let set = self.set()?;
            Ok(LocalExpr::within(lhs, set))
        } else {
            Ok(lhs)
        }
    }

    fn constant(&mut self) -> Result<Value> {
        let at = self.here();
        let i = self.index()?;
        if i.dynamic {
            return Err(Error::syntax(at, "expected a constant index"));
        }
        Ok(i.offset)
    }

    fn index(&mut self) -> Result<Index> {
        let mut idx = Index {
            offset: 0,
            dynamic: false,
        };
        let mut sign = 1;
        loop {
            let at = self.here();
            let t = self.next_token()?;
            if let Ok(v) = t.parse::<Value>() {
                idx.offset += sign * v;
            } else if t == "slot_request" && sign == 1 && !idx.dynamic {
                idx.dynamic = true;
            } else if let Some(v) = self.bound(&t) {
                idx.offset += sign * v;
            } else {
                return Err(Error::syntax(at, format!("bad index term `{t}`")));
            }
            if self.eat("+") {
                sign = 1;
            } else if self.eat("-") {
                sign = -1;
            } else {
                return Ok(idx);
            }
        }
    }

    fn range(&mut self) -> Result<Vec<Value>> {
        let lo = self.constant()?;
        self.expect("..")?;
        let hi = self.constant()?;
        let mut values: Vec<Value> = (lo..=hi).collect();
        if self.eat("except") {
            let x = self.constant()?;
            values.retain(|v| *v != x);
        }
        Ok(values)
    }

    fn set(&mut self) -> Result<Vec<Value>> {
        if self.eat("{") {
            let mut values = vec![self.constant()?];
            while self.eat(",") {
                values.push(self.constant()?);
            }
            self.expect("}")?;
            Ok(values)
        } else {
            self.range()
        }
    }

    fn rr(&self, k: Value, at: usize) -> Result<LocalExpr> {
        if k < 1 || k > 2 * self.slots as Value {
            return Err(Error::syntax(
                at,
                format!("rr index {k} outside 1..{}", 2 * self.slots),
            ));
        }
        Ok(LocalExpr::var(format!("rr[{k}]")))
    }

    fn atom(&mut self) -> Result<LocalExpr> {
        let at = self.here();
        let t = self.next_token()?;
        if t == "(" {
            let e = self.or()?;
            self.expect(")")?;
            return Ok(e);
        }
        if let Ok(v) = t.parse::<Value>() {
            return Ok(LocalExpr::Const(v));
        }
        match t.as_str() {
            "true" => return Ok(LocalExpr::truth(true)),
            "false" => return Ok(LocalExpr::truth(false)),
            "rr" => {
                self.expect("[")?;
                let idx = self.index()?;
                self.expect("]")?;
                if !idx.dynamic {
                    return self.rr(idx.offset, at);
                }
                let mut xs = Vec::new();
                for u in 1..=self.slots as Value {
                    let k = u + idx.offset;
                    if k >= 1 && k <= 2 * self.slots as Value {
                        xs.push(LocalExpr::and([
                            LocalExpr::is("slot_request", u),
                            self.rr(k, at)?,
                        ]));
                    }
                }
                return Ok(LocalExpr::Or(xs));
            }
            "any" | "all" => {
                let var = self.next_token()?;
                self.expect("in")?;
                let values = self.range()?;
                self.expect(":")?;
                if values.is_empty() {
                    return Err(Error::syntax(at, "empty quantifier range"));
                }
                let mark = self.pos;
                let mut xs = Vec::new();
                for v in values {
                    self.pos = mark;
                    self.env.push((var.clone(), v));
                    let body = self.unary();
                    self.env.pop();
                    xs.push(body?);
                }
                return Ok(if t == "any" {
                    LocalExpr::Or(xs)
                } else {
                    LocalExpr::And(xs)
                });
            }
            _ => {}
        }
        if let Some(v) = self.bound(&t) {
            return Ok(LocalExpr::Const(v));
        }
        if let Some(def) = self.library.get(&t) {
            let s = if self.peek() == Some("(") {
                self.pos += 1;
                let s = self.constant()?;
                self.expect(")")?;
                s
            } else {
                self.bound("s").unwrap_or(0)
            };
            if s < 1 || s > self.slots as Value {
                return Err(Error::syntax(
                    at,
                    format!("slot {s} outside 1..{}", self.slots),
                ));
            }
            if self.depth > 16 {
                return Err(Error::syntax(
                    at,
                    format!("predicate `{t}` refers to itself"),
                ));
            }
            let tokens = lex(&def.expr)?;
            let mut inner = Parser {
                tokens,
                pos: 0,
                end: def.expr.len(),
                slots: self.slots,
                library: self.library,
                env: vec![("s".into(), s)],
                depth: self.depth + 1,
            };
            let e = inner.or().map_err(|e| match e {
                Error::Syntax { pos, msg } => {
                    Error::syntax(at, format!("in `{t}` at offset {pos}: {msg}"))
                }
                other => other,
            })?;
            if inner.pos < inner.tokens.len() {
                return Err(Error::syntax(at, format!("trailing input in `{t}`")));
            }
            return Ok(e);
        }
        if !t
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        {
            return Err(Error::syntax(at, format!("unexpected `{t}`")));
        }
        if self.peek() == Some("[") && self.peek_at(1).is_some() {
            self.pos += 1;
            let k = self.constant()?;
            self.expect("]")?;
            return Ok(LocalExpr::var(format!("{t}[{k}]")));
        }
        Ok(LocalExpr::var(t))
    }
}

/// Predicates plugged into a candidate implementation, per target, agent
/// (0-based) and slot (1-based; 0 for `dlvrd`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredicateSet {
    exprs: BTreeMap<(Target, usize, usize), LocalExpr>,
    names: BTreeMap<Target, String>,
}

impl PredicateSet {
    /// kc guess plus the corrected reception and delivery predicates.
    pub fn reference(slots: usize) -> Result<Self> {
        let lib = Library::builtin(slots);
        let mut set = PredicateSet::default();
        for name in ["kc_guess", "rcvd0_final", "rcvd1_final", "dlvrd_final"] {
            set.define(&builtin_predicate(name, slots)?, slots, &lib)?;
        }
        Ok(set)
    }

    /// Instantiate `def` for every agent and slot of its target.
    pub fn define(&mut self, def: &PredicateDef, slots: usize, library: &Library) -> Result<()> {
        let slot_range: Vec<usize> = if def.target.per_slot() {
            (1..=slots).collect()
        } else {
            vec![0]
        };
        for s in slot_range {
            let e = def.instantiate(s.max(1), slots, library)?;
            for a in 0..3 {
                self.exprs.insert((def.target, a, s), e.clone());
            }
        }
        self.names.insert(def.target, def.name.clone());
        Ok(())
    }

    pub fn set(&mut self, target: Target, agent: usize, slot: usize, expr: LocalExpr, name: &str) {
        self.exprs.insert((target, agent, slot), expr);
        self.names.insert(target, name.to_string());
    }

    pub fn get(&self, target: Target, agent: usize, slot: usize) -> Option<&LocalExpr> {
        self.exprs.get(&(target, agent, slot))
    }

    pub fn name(&self, target: Target) -> Option<&str> {
        self.names.get(&target).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, s: usize) -> LocalExpr {
        parse_predicate(text, s, 3, &Library::builtin(3)).unwrap()
    }

    #[test]
    fn kc_guess_reads_the_forced_negation() {
        let e = builtin_predicate("kc_guess", 3)
            .unwrap()
            .instantiate(2, 3, &Library::builtin(3))
            .unwrap();
        let expect = LocalExpr::not(LocalExpr::and([
            LocalExpr::is("slot_request", 2),
            LocalExpr::not(LocalExpr::var("rr[2]")),
        ]));
        assert_eq!(e, expect);
    }

    #[test]
    fn quantifiers_and_ranges_expand() {
        let e = parse("any t in 1..3 except s: rr[t]", 2);
        assert_eq!(
            e,
            LocalExpr::or([LocalExpr::var("rr[1]"), LocalExpr::var("rr[3]")])
        );
        let e = parse("slot_request in 1..3 except s", 1);
        assert_eq!(
            e,
            LocalExpr::within(LocalExpr::var("slot_request"), vec![2, 3])
        );
        let e = parse("rr[s+3] != msg", 1);
        assert_eq!(
            e,
            LocalExpr::ne(LocalExpr::var("rr[4]"), LocalExpr::var("msg"))
        );
        let e = parse("all u in 1..2: kc[u] && true", 1);
        assert_eq!(
            e,
            LocalExpr::and([
                LocalExpr::and([LocalExpr::var("kc[1]"), LocalExpr::var("kc[2]")]),
                LocalExpr::truth(true)
            ])
        );
    }

    #[test]
    fn dynamic_rr_index_expands_over_requests() {
        let e = parse("rr[slot_request]", 1);
        let expect = LocalExpr::or((1..=3).map(|u| {
            LocalExpr::and([
                LocalExpr::is("slot_request", u),
                LocalExpr::var(format!("rr[{u}]")),
            ])
        }));
        assert_eq!(e, expect);
    }

    #[test]
    fn references_instantiate_with_their_own_slot() {
        let cf3_2 = parse("cf3(2)", 1);
        assert_eq!(cf3_2, parse("cf3", 2));
        assert_ne!(cf3_2, parse("cf3", 1));
        let d = builtin_predicate("dlvrd_final", 3)
            .unwrap()
            .instantiate(1, 3, &Library::builtin(3))
            .unwrap();
        assert!(d.vars().contains(&"rr[3]"));
    }

    #[test]
    fn reports_errors() {
        let lib = Library::builtin(3);
        assert!(matches!(
            parse_predicate("rr[7]", 1, 3, &lib),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_predicate("rr[s] &&", 1, 3, &lib),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_predicate("cf3(slot_request)", 1, 3, &lib),
            Err(Error::Syntax { .. })
        ));
        let mut lib2 = lib.clone();
        lib2.add(PredicateDef::new("loop", Target::Kc, "loop"));
        assert!(parse_predicate("loop", 1, 3, &lib2).is_err());
        assert!(builtin_predicate("nope", 3).is_err());
        assert!("kc".parse::<Target>().is_ok() && "x".parse::<Target>().is_err());
    }

    #[test]
    fn predicate_files_are_json_lists() {
        let defs = parse_predicate_file(
            r#"[{"name":"mine","target":"conflict_free","expr":"cf3 || false"}]"#,
        )
        .unwrap();
        assert_eq!(defs[0].target, Target::ConflictFree);
        assert!(parse_predicate_file("{}").is_err());
    }
}
