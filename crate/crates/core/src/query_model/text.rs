//! Query file format.
//!
//! ```text
//! # a single C2RPQ; Boolean queries are written Name()
//! query Q(x, y) := x -[a.b*]-> z , z -[c^-]-> y , x = w ;
//!
//! # a union; disjuncts use the header outputs unless they list their own
//! union U(x, y) {
//!   disjunct { x -[a]-> y }
//!   disjunct(u, u) { u -[b]-> z }
//! }
//! ```
//!
//! Equality atoms are collapsed on load. Several items in one file form
//! a single union.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use super::{collapse_equalities, Atom, C2rpq, QueryError, Uc2rpq, Var};
use crate::automata::{is_identifier, parse_regex, RegexError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: bad regex: {source}")]
    Regex { line: usize, source: RegexError },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no query found")]
    Empty,
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.text[..pos];
        let line = before.matches('\n').count() + 1;
        let col = pos - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        (line, col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.line_col(self.pos);
        ParseError::Syntax { line, col, msg: msg.into() }
    }

    fn skip(&mut self) {
        loop {
            let rest = &self.text[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with('#') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                return;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip();
        self.pos >= self.text.len()
    }

    fn peek_str(&mut self, s: &str) -> bool {
        self.skip();
        self.text[self.pos..].starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_str(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected an identifier"));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip();
        let rest = &self.text[self.pos..];
        if rest.starts_with(kw) && !rest[kw.len()..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn var_list(&mut self) -> Result<Vec<Var>, ParseError> {
        self.expect("(")?;
        let mut vars = Vec::new();
        if self.eat(")") {
            return Ok(vars);
        }
        loop {
            vars.push(self.ident()?);
            if self.eat(")") {
                return Ok(vars);
            }
            self.expect(",")?;
        }
    }

    /// Conjuncts up to (not including) `end`.
    fn body(&mut self, end: &str) -> Result<(Vec<Atom>, Vec<(Var, Var)>), ParseError> {
        let mut atoms = Vec::new();
        let mut eqs = Vec::new();
        if self.peek_str(end) {
            return Ok((atoms, eqs));
        }
        loop {
            let x = self.ident()?;
            if self.eat("=") {
                eqs.push((x, self.ident()?));
            } else {
                self.expect("-[")?;
                let start = self.pos;
                let close = self.text[start..].find(']').ok_or_else(|| self.err("unterminated '-['"))?;
                let re_text = &self.text[start..start + close];
                let nfa = parse_regex(re_text).map_err(|source| ParseError::Regex { line: self.line_col(start).0, source })?;
                self.pos = start + close;
                self.expect("]->")?;
                let y = self.ident()?;
                atoms.push(Atom::new(x, Arc::new(nfa), y));
            }
            if self.peek_str(end) {
                return Ok((atoms, eqs));
            }
            self.expect(",")?;
        }
    }
}

fn build(name: &str, output: Vec<Var>, atoms: Vec<Atom>, eqs: Vec<(Var, Var)>) -> C2rpq {
    let q = C2rpq::from_parts(name, output, atoms, eqs);
    if q.equalities.is_empty() {
        q
    } else {
        collapse_equalities(&q).0
    }
}

/// Parses every item; returns the union name, header arity and disjuncts.
fn parse_items(text: &str) -> Result<(String, usize, Vec<C2rpq>), ParseError> {
    let mut s = Scanner { text, pos: 0 };
    let mut name = None;
    let mut arity = None;
    let mut out = Vec::new();
    while !s.at_end() {
        if s.keyword("query") {
            let n = s.ident()?;
            let output = s.var_list()?;
            s.expect(":=")?;
            let (atoms, eqs) = s.body(";")?;
            s.expect(";")?;
            arity.get_or_insert(output.len());
            out.push(build(&n, output, atoms, eqs));
            name.get_or_insert(n);
        } else if s.keyword("union") {
            let n = s.ident()?;
            let header = s.var_list()?;
            s.expect("{")?;
            let mut i = 0;
            while !s.eat("}") {
                if !s.keyword("disjunct") {
                    return Err(s.err("expected 'disjunct' or '}'"));
                }
                let output = if s.peek_str("(") { s.var_list()? } else { header.clone() };
                s.expect("{")?;
                let (atoms, eqs) = s.body("}")?;
                s.expect("}")?;
                i += 1;
                out.push(build(&format!("{n}_{i}"), output, atoms, eqs));
            }
            arity.get_or_insert(header.len());
            name.get_or_insert(n);
        } else {
            return Err(s.err("expected 'query' or 'union'"));
        }
    }
    let name = name.ok_or(ParseError::Empty)?;
    Ok((name, arity.unwrap_or(0), out))
}

/// All disjuncts of all items, equalities collapsed.
pub fn parse_queries(text: &str) -> Result<Vec<C2rpq>, ParseError> {
    Ok(parse_items(text)?.2)
}

/// The union of every item in the file.
pub fn parse_union(text: &str) -> Result<Uc2rpq, ParseError> {
    let (name, arity, ds) = parse_items(text)?;
    Ok(Uc2rpq::with_arity(name, arity, ds)?)
}

/// Maps every variable to a legal, clash-free identifier.
fn legal_names(q: &C2rpq) -> BTreeMap<Var, Var> {
    let mut taken: BTreeSet<Var> = q.vars.iter().filter(|v| is_identifier(v)).cloned().collect();
    let mut map = BTreeMap::new();
    for v in &q.vars {
        if is_identifier(v) {
            map.insert(v.clone(), v.clone());
            continue;
        }
        let mut cand: String = v.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        cand.insert(0, 'v');
        while taken.contains(&cand) {
            cand.push('_');
        }
        taken.insert(cand.clone());
        map.insert(v.clone(), cand);
    }
    map
}

fn render_body(q: &C2rpq) -> String {
    let names = legal_names(q);
    let mut parts: Vec<String> = q
        .atoms
        .iter()
        .map(|a| format!("{} -[{}]-> {}", names[&a.src], a.lang.to_regex(), names[&a.dst]))
        .collect();
    parts.extend(q.equalities.iter().map(|(x, y)| format!("{} = {}", names[x], names[y])));
    parts.join(", ")
}

fn render_outputs(q: &C2rpq) -> String {
    let names = legal_names(q);
    q.output.iter().map(|v| names[v].as_str()).collect::<Vec<_>>().join(", ")
}

fn legal_query_name(name: &str) -> String {
    if is_identifier(name) {
        name.to_string()
    } else {
        let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        if s.is_empty() { "Q".to_string() } else { s }
    }
}

pub fn render_query(q: &C2rpq) -> String {
    format!("query {}({}) := {} ;", legal_query_name(&q.name), render_outputs(q), render_body(q))
}

pub fn render_union(u: &Uc2rpq) -> String {
    let shared = u.disjuncts.first().map(render_outputs);
    let uniform = shared.as_ref().is_some_and(|h| u.disjuncts.iter().all(|d| &render_outputs(d) == h));
    let header = match (&shared, uniform) {
        (Some(h), true) => h.clone(),
        _ => (1..=u.arity).map(|i| format!("o{i}")).collect::<Vec<_>>().join(", "),
    };
    let mut out = format!("union {}({}) {{\n", legal_query_name(&u.name), header);
    for d in &u.disjuncts {
        if uniform {
            let _ = writeln!(out, "  disjunct {{ {} }}", render_body(d));
        } else {
            let _ = writeln!(out, "  disjunct({}) {{ {} }}", render_outputs(d), render_body(d));
        }
    }
    out.push('}');
    out
}
