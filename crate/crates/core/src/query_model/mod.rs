//! Conjunctive two-way regular path queries and their unions.

mod contract;
mod refine;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::automata::{self, Letter, Nfa};
use crate::graph::Multigraph;

pub use contract::{contract, ContractionMode};
pub use text::{parse_queries, parse_union, render_query, render_union, ParseError};
pub use refine::{
    condense, enumerate_atom_refinements, enumerate_expansions, enumerate_refinements, expansion_from_words, AtomTrace, Expansion,
    ExpansionIter, RefinementIter, Refinement, Segment, SegmentKind,
};

pub type Var = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("variable '{0}' is not declared")]
    UnknownVariable(Var),
    #[error("disjuncts have different output arities ({0} and {1})")]
    ArityMismatch(usize, usize),
    #[error("query is not a conjunctive query: atom {0} has a non-letter language")]
    NotCq(usize),
    #[error("query still has equality atoms")]
    HasEqualities,
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("condensation needs j > i + 1 (got i = {i}, j = {j})")]
    CondenseTooShort { i: usize, j: usize },
    #[error("atom {0} was refined by an equality and cannot be condensed")]
    NotAPath(usize),
}

/// An atom `src -L-> dst`.
#[derive(Clone)]
pub struct Atom {
    pub src: Var,
    pub lang: Arc<Nfa>,
    pub dst: Var,
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.src, self.lang.to_regex(), self.dst)
    }
}

impl Atom {
    pub fn new(src: impl Into<Var>, lang: Arc<Nfa>, dst: impl Into<Var>) -> Atom {
        Atom { src: src.into(), lang, dst: dst.into() }
    }

    /// Like [`Atom::new`], but a single inverse letter `x -a⁻-> y` is stored
    /// as `y -a-> x`. The flag reports whether the endpoints were swapped.
    pub fn normalized(src: impl Into<Var>, lang: Arc<Nfa>, dst: impl Into<Var>) -> (Atom, bool) {
        let (src, dst) = (src.into(), dst.into());
        if let Some(l) = lang.as_single_letter() {
            if l.inverted {
                return (Atom { src: dst, lang: automata::single_letter(&l.inverse()), dst: src }, true);
            }
            return (Atom { src, lang: automata::single_letter(&l), dst }, false);
        }
        (Atom { src, lang, dst }, false)
    }

    pub fn letter(src: impl Into<Var>, l: &Letter, dst: impl Into<Var>) -> Atom {
        Atom::normalized(src, automata::single_letter(l), dst).0
    }

    pub fn is_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// A C2RPQ with optional equality atoms.
#[derive(Clone, Debug, Default)]
pub struct C2rpq {
    pub name: String,
    pub vars: BTreeSet<Var>,
    pub output: Vec<Var>,
    pub atoms: Vec<Atom>,
    pub equalities: Vec<(Var, Var)>,
}

impl C2rpq {
    /// Checks that outputs, atom endpoints and equalities use declared variables.
    pub fn new(
        name: impl Into<String>,
        vars: impl IntoIterator<Item = Var>,
        output: Vec<Var>,
        atoms: Vec<Atom>,
        equalities: Vec<(Var, Var)>,
    ) -> Result<C2rpq, QueryError> {
        let q = C2rpq { name: name.into(), vars: vars.into_iter().collect(), output, atoms, equalities };
        q.check()?;
        Ok(q)
    }

    /// Declares every variable that occurs anywhere.
    pub fn from_parts(name: impl Into<String>, output: Vec<Var>, atoms: Vec<Atom>, equalities: Vec<(Var, Var)>) -> C2rpq {
        let mut vars: BTreeSet<Var> = output.iter().cloned().collect();
        for a in &atoms {
            vars.insert(a.src.clone());
            vars.insert(a.dst.clone());
        }
        for (x, y) in &equalities {
            vars.insert(x.clone());
            vars.insert(y.clone());
        }
        C2rpq { name: name.into(), vars, output, atoms, equalities }
    }

    pub fn check(&self) -> Result<(), QueryError> {
        let names = self
            .output
            .iter()
            .chain(self.atoms.iter().flat_map(|a| [&a.src, &a.dst]))
            .chain(self.equalities.iter().flat_map(|(x, y)| [x, y]));
        for v in names {
            if !self.vars.contains(v) {
                return Err(QueryError::UnknownVariable(v.clone()));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.output.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_output(&self, v: &str) -> bool {
        self.output.iter().any(|o| o == v)
    }

    pub fn existential_vars(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter().filter(|v| !self.is_output(v))
    }

    /// Every atom language is a single positive or inverse letter.
    pub fn is_cq(&self) -> bool {
        self.atoms.iter().all(|a| a.lang.as_single_letter().is_some())
    }

    pub fn has_inverted_letters(&self) -> bool {
        self.atoms.iter().any(|a| a.lang.has_inverted_letters())
    }

    /// One undirected edge per atom over `vars`.
    pub fn underlying_multigraph(&self) -> Multigraph {
        let vertices: Vec<Var> = self.vars.iter().cloned().collect();
        let index: BTreeMap<&str, usize> = vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let edges = self.atoms.iter().map(|a| (index[a.src.as_str()], index[a.dst.as_str()])).collect();
        Multigraph { vertices, edges }
    }

    /// Renames variables; unmapped names are kept.
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> C2rpq {
        let r = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
        C2rpq {
            name: self.name.clone(),
            vars: self.vars.iter().map(r).collect(),
            output: self.output.iter().map(r).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { src: r(&a.src), lang: a.lang.clone(), dst: r(&a.dst) })
                .collect(),
            equalities: self.equalities.iter().map(|(x, y)| (r(x), r(y))).collect(),
        }
    }

    /// Removes variables that are neither outputs nor atom endpoints.
    pub fn drop_isolated_existentials(&mut self) {
        let mut used: BTreeSet<Var> = self.output.iter().cloned().collect();
        for a in &self.atoms {
            used.insert(a.src.clone());
            used.insert(a.dst.clone());
        }
        for (x, y) in &self.equalities {
            used.insert(x.clone());
            used.insert(y.clone());
        }
        self.vars.retain(|v| used.contains(v));
    }
}

impl fmt::Display for C2rpq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::render_query(self))
    }
}

/// Merges each equality class into its lexicographically least variable.
/// Returns the canonical query and the renaming applied.
pub fn collapse_equalities(q: &C2rpq) -> (C2rpq, BTreeMap<Var, Var>) {
    let vars: Vec<&Var> = q.vars.iter().collect();
    let index: BTreeMap<&Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let n = p[c];
            p[c] = r;
            c = n;
        }
        r
    }
    for (x, y) in &q.equalities {
        let (a, b) = (find(&mut parent, index[x]), find(&mut parent, index[y]));
        // vars are sorted, so the smaller index is the lexicographically least name
        if a < b {
            parent[b] = a;
        } else if b < a {
            parent[a] = b;
        }
    }
    let mut map = BTreeMap::new();
    for (i, v) in vars.iter().enumerate() {
        let r = find(&mut parent, i);
        map.insert((*v).clone(), vars[r].clone());
    }
    let mut out = q.rename(&map);
    out.equalities.clear();
    (out, map)
}

/// A union of C2RPQs with a common output arity.
#[derive(Clone, Debug, Default)]
pub struct Uc2rpq {
    pub name: String,
    pub arity: usize,
    pub disjuncts: Vec<C2rpq>,
}

impl Uc2rpq {
    /// Fails when the disjunct arities differ. An empty list denotes the
    /// empty (always false) union.
    pub fn new(name: impl Into<String>, disjuncts: Vec<C2rpq>) -> Result<Uc2rpq, QueryError> {
        let arity = disjuncts.first().map(C2rpq::arity).unwrap_or(0);
        Self::with_arity(name, arity, disjuncts)
    }

    pub fn with_arity(name: impl Into<String>, arity: usize, disjuncts: Vec<C2rpq>) -> Result<Uc2rpq, QueryError> {
        for d in &disjuncts {
            if d.arity() != arity {
                return Err(QueryError::ArityMismatch(arity, d.arity()));
            }
        }
        Ok(Uc2rpq { name: name.into(), arity, disjuncts })
    }

    pub fn single(q: C2rpq) -> Uc2rpq {
        Uc2rpq { name: q.name.clone(), arity: q.arity(), disjuncts: vec![q] }
    }

    pub fn num_atoms(&self) -> usize {
        self.disjuncts.iter().map(C2rpq::num_atoms).sum()
    }

    pub fn has_inverted_letters(&self) -> bool {
        self.disjuncts.iter().any(C2rpq::has_inverted_letters)
    }
}

impl fmt::Display for Uc2rpq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::render_union(self))
    }
}

/// Every atom language is `a*` or a union of positive letters.
pub fn is_sre(q: &Uc2rpq) -> bool {
    q.disjuncts.iter().all(|d| d.atoms.iter().all(|a| is_simple_language(&a.lang)))
}

fn is_simple_language(nfa: &Nfa) -> bool {
    let alphabet = nfa.alphabet();
    if alphabet.is_empty() || alphabet.iter().any(|l| l.inverted) {
        return false;
    }
    if alphabet.len() == 1 {
        let a = alphabet.iter().next().expect("nonempty");
        let star = Nfa::new(1, [(0, a.clone(), 0)], [0], [0]).expect("valid");
        if automata::equivalent(nfa, &star) {
            return true;
        }
    }
    let union = Nfa::new(2, alphabet.iter().map(|l| (0, l.clone(), 1)), [0], [1]).expect("valid");
    automata::equivalent(nfa, &union)
}
