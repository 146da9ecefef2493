//! Recursive-descent parser for the formula grammar:
//!
//! ```text
//! phi   := "true" | "false" | atom | "!" phi | phi "&&" phi | phi "||" phi
//!        | phi "=>" phi | phi "<=>" phi | "K[" AGENT "](" phi ")"
//!        | "Khat[" AGENT "](" atom ")" | "X" phi | macro
//! atom  := (AGENT ".")? IDENT ("[" INT "]")? (("==" | "!=") VALUE)? | "RR[" INT "]"
//! macro := IDENT "(" arg ("," arg)* ")"
//! ```
//!
//! Precedence `!`/`X` > `&&` > `||` > `=>`,`<=>`; binary operators are
//! left-associative.

use crate::error::{Error, Result};
use crate::formula::ast::{Atom, Cmp, Formula};
use crate::model::{Domain, Signature, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MacroArg {
    Int(Value),
    Name(String),
}

/// Names a formula may refer to, plus optional macro expansions.
pub trait Vocabulary {
    fn has_agent(&self, name: &str) -> bool;

    /// Domain of a qualified variable name.
    fn var_domain(&self, qualified: &str) -> Result<Domain>;

    fn expand_macro(&self, _name: &str, _args: &[MacroArg]) -> Option<Result<Formula>> {
        None
    }
}

impl Vocabulary for Signature {
    fn has_agent(&self, name: &str) -> bool {
        self.agent_id(name).is_ok()
    }

    fn var_domain(&self, qualified: &str) -> Result<Domain> {
        Ok(self.var(self.var_id(qualified)?).domain.clone())
    }
}

pub fn parse_formula(text: &str, vocab: &dyn Vocabulary) -> Result<Formula> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vocab,
        end: text.len(),
    };
    let f = p.top()?;
    if let Some((t, at)) = p.tokens.get(p.pos) {
        return Err(Error::syntax(*at, format!("unexpected `{}`", t.text())));
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(Value),
    Sym(&'static str),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Int(v) => v.to_string(),
            Tok::Sym(s) => s.to_string(),
        }
    }
}

const SYMBOLS: [&str; 14] = [
    "<=>", "=>", "==", "!=", "&&", "||", "!", "(", ")", "[", "]", ".", ",", ":",
];

pub(crate) fn lex_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i]
                .parse()
                .map_err(|_| Error::syntax(start, "integer out of range"))?;
            out.push((Tok::Int(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && lex_ident_char(bytes[i] as char) {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        match SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            Some(s) => {
                out.push((Tok::Sym(s), start));
                i += s.len();
            }
            None => return Err(Error::syntax(start, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    vocab: &'a dyn Vocabulary,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + k).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(Error::syntax(self.here(), format!("expected `{sym}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(Error::syntax(self.here(), "expected identifier")),
        }
    }

    fn int(&mut self) -> Result<Value> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(v)
            }
            _ => Err(Error::syntax(self.here(), "expected integer")),
        }
    }

    fn agent(&mut self) -> Result<String> {
        let name = self.ident()?;
        if !self.vocab.has_agent(&name) {
            return Err(Error::UnknownAgent(name));
        }
        Ok(name)
    }

    fn top(&mut self) -> Result<Formula> {
        let mut lhs = self.or()?;
        loop {
            if self.eat("=>") {
                let rhs = self.or()?;
                lhs = Formula::implies(lhs, rhs);
            } else if self.eat("<=>") {
                let rhs = self.or()?;
                lhs = Formula::iff(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.eat("||") {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.eat("&&") {
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat("!") {
            return Ok(Formula::not(self.unary()?));
        }
        let next_is_operator = matches!(self.peek_at(1), Some(Tok::Sym("==" | "!=" | "." | "[")));
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "X") && !next_is_operator {
            self.pos += 1;
            return Ok(Formula::next(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula> {
        if self.eat("(") {
            let f = self.top()?;
            self.expect(")")?;
            return Ok(f);
        }
        let at = self.here();
        let word = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            Some(t) => return Err(Error::syntax(at, format!("unexpected `{}`", t.text()))),
            None => return Err(Error::syntax(at, "unexpected end of formula")),
        };
        let bracket = matches!(self.peek_at(1), Some(Tok::Sym("[")));
        match word.as_str() {
            "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            "false" => {
                self.pos += 1;
                Ok(Formula::falsum())
            }
            "K" if bracket => {
                self.pos += 2;
                let agent = self.agent()?;
                self.expect("]")?;
                self.expect("(")?;
                let body = self.top()?;
                self.expect(")")?;
                Ok(Formula::know(agent, body))
            }
            "Khat" if bracket => {
                self.pos += 2;
                let agent = self.agent()?;
                self.expect("]")?;
                self.expect("(")?;
                let (var, domain) = self.var_name()?;
                let f = match self.comparison(&var, &domain)? {
                    Some(atom) => Formula::know_whether(&agent, atom),
                    None => Formula::know_value(&agent, &var, &domain),
                };
                self.expect(")")?;
                Ok(f)
            }
            "RR" if bracket => {
                self.pos += 2;
                let k = self.int()?;
                self.expect("]")?;
                let var = format!("rr[{k}]");
                self.vocab.var_domain(&var)?;
                Ok(Formula::eq(var, 1))
            }
            _ if matches!(self.peek_at(1), Some(Tok::Sym("("))) => self.macro_call(),
            _ => {
                let (var, domain) = self.var_name()?;
                match self.comparison(&var, &domain)? {
                    Some(atom) => Ok(atom),
                    None if domain.is_bool() => Ok(Formula::eq(var, 1)),
                    None => Err(Error::syntax(
                        self.here(),
                        format!("`{var}` is not boolean; expected `==` or `!=`"),
                    )),
                }
            }
        }
    }

    fn macro_call(&mut self) -> Result<Formula> {
        let at = self.here();
        let name = self.ident()?;
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                match self.peek().cloned() {
                    Some(Tok::Int(v)) => args.push(MacroArg::Int(v)),
                    Some(Tok::Ident(s)) => args.push(MacroArg::Name(s)),
                    _ => return Err(Error::syntax(self.here(), "expected macro argument")),
                }
                self.pos += 1;
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        self.vocab
            .expand_macro(&name, &args)
            .unwrap_or_else(|| Err(Error::syntax(at, format!("unknown macro `{name}`"))))
    }

    /// `(AGENT ".")? IDENT ("[" INT "]")?`, resolved against the vocabulary.
    /// An agent-qualified name that is not a local falls back to the
    /// environment variable of the same name.
    fn var_name(&mut self) -> Result<(String, Domain)> {
        let first = self.ident()?;
        let (qualifier, mut name) = if self.eat(".") {
            if !self.vocab.has_agent(&first) {
                return Err(Error::UnknownAgent(first));
            }
            (Some(first), self.ident()?)
        } else {
            (None, first)
        };
        if self.eat("[") {
            let k = self.int()?;
            self.expect("]")?;
            name = format!("{name}[{k}]");
        }
        match qualifier {
            None => {
                let d = self.vocab.var_domain(&name)?;
                Ok((name, d))
            }
            Some(agent) => {
                let qualified = format!("{agent}.{name}");
                match self.vocab.var_domain(&qualified) {
                    Ok(d) => Ok((qualified, d)),
                    Err(Error::UnknownVariable(_)) => match self.vocab.var_domain(&name) {
                        Ok(d) => Ok((name, d)),
                        Err(_) => Err(Error::UnknownVariable(qualified)),
                    },
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn comparison(&mut self, var: &str, domain: &Domain) -> Result<Option<Formula>> {
        let cmp = if self.eat("==") {
            Cmp::Eq
        } else if self.eat("!=") {
            Cmp::Ne
        } else {
            return Ok(None);
        };
        let at = self.here();
        let value = match self.peek().cloned() {
            Some(Tok::Int(v)) => v,
            Some(Tok::Ident(s)) if s == "true" => 1,
            Some(Tok::Ident(s)) if s == "false" => 0,
            _ => return Err(Error::syntax(at, "expected value")),
        };
        self.pos += 1;
        if !domain.contains(value) {
            return Err(Error::syntax(
                at,
                format!("value {value} outside the domain of `{var}`"),
            ));
        }
        Ok(Some(Formula::Atom(Atom {
            var: var.to_string(),
            cmp,
            value,
        })))
    }
}
