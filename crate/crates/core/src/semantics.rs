//! Containment, equivalence and the semantic-width decision.
//!
//! Containment of a CQ in a union is exact: the union is evaluated on the
//! canonical database of the CQ. For a union with proper regular atoms on
//! the left, expansions are enumerated shortest first up to a per-atom
//! word bound; a failing expansion is a replayable counterexample, and
//! exhausting the bound proves containment only in the special cases
//! recorded in [`Verdict::notes`].

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::approximation::{mua_hom_bounded, saturation_length, ApproxError, ApproxLimits, Approximation, WidthClass};
use crate::automata::{word_to_string, Word};
use crate::decomposition::WidthKind;
use crate::evaluation::{satisfies_at, RelationCache};
use crate::graphdb::GraphDb;
use crate::morphism::{find_homomorphism, is_isomorphic};
use crate::query_model::{
    collapse_equalities, enumerate_expansions, expansion_from_words, is_sre, render_query, C2rpq, QueryError, Uc2rpq, Var,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("atom {0} of the left-hand query is not a single letter")]
    NotCq(usize),
    #[error("one-way class {0} given a query with inverted letters")]
    InverseInOneWay(String),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Yes,
    No,
    NoCounterexampleUpTo,
}

/// A counterexample expansion: one word per atom of a left-hand disjunct
/// (equalities collapsed), and the CQ they produce.
#[derive(Clone, Debug)]
pub struct Witness {
    pub disjunct: usize,
    pub words: Vec<Word>,
    pub query: C2rpq,
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Witness", 3)?;
        st.serialize_field("disjunct", &self.disjunct)?;
        st.serialize_field("words", &self.words.iter().map(|w| word_to_string(w)).collect::<Vec<_>>())?;
        st.serialize_field("query", &render_query(&self.query))?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    pub notes: Vec<String>,
}

impl Verdict {
    fn yes(notes: Vec<String>) -> Verdict {
        Verdict { kind: VerdictKind::Yes, exact: true, witness: None, bound: None, notes }
    }

    pub fn is_yes(&self) -> bool {
        self.kind == VerdictKind::Yes
    }

    pub fn is_no(&self) -> bool {
        self.kind == VerdictKind::No
    }

    pub fn label(&self) -> String {
        match self.kind {
            VerdictKind::Yes => "Yes".into(),
            VerdictKind::No => "No".into(),
            VerdictKind::NoCounterexampleUpTo => format!("NoCounterexampleUpTo({})", self.bound.unwrap_or(0)),
        }
    }
}

/// The database with one node per variable and one edge per atom; an
/// inverted letter becomes a reversed edge. Returns the variable-to-node map.
pub fn canonical_db(xi: &C2rpq) -> Result<(GraphDb, BTreeMap<Var, usize>), SemanticsError> {
    let xi = if xi.equalities.is_empty() { xi.clone() } else { collapse_equalities(xi).0 };
    let mut db = GraphDb::new();
    let mut map = BTreeMap::new();
    for v in xi.vars.iter().chain(&xi.output) {
        map.insert(v.clone(), db.add_node(v));
    }
    for (i, a) in xi.atoms.iter().enumerate() {
        let l = a.lang.as_single_letter().ok_or(SemanticsError::NotCq(i))?;
        map.insert(a.src.clone(), db.add_node(&a.src));
        map.insert(a.dst.clone(), db.add_node(&a.dst));
        if l.inverted {
            db.add_edge(&a.dst, l.inverse(), &a.src);
        } else {
            db.add_edge(&a.src, l, &a.dst);
        }
    }
    Ok((db, map))
}

/// `xi ⊑ delta` for a CQ `xi`: some disjunct of `delta` holds on the
/// canonical database of `xi` at its output tuple.
pub fn cq_contained(xi: &C2rpq, delta: &Uc2rpq) -> Result<bool, SemanticsError> {
    if xi.arity() != delta.arity {
        return Err(SemanticsError::ArityMismatch(xi.arity(), delta.arity));
    }
    let (db, map) = canonical_db(xi)?;
    let xi = if xi.equalities.is_empty() { xi.clone() } else { collapse_equalities(xi).0 };
    let tuple: Vec<usize> = xi.output.iter().map(|v| map[v]).collect();
    let mut cache = RelationCache::new(&db);
    Ok(delta.disjuncts.iter().any(|d| satisfies_at(d, &tuple, &mut cache)))
}

/// Word bound past which an SRE query's counterexamples need not be
/// searched: `‖γ‖·(n+2)` with `n` the number of non-recursive atoms.
pub fn sre_word_bound(q: &C2rpq) -> usize {
    let n = q.atoms.iter().filter(|a| a.lang.longest_word().is_some()).count();
    q.atoms.len() * (n + 2)
}

/// Extra exactness rules available to [`contained_bounded_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactnessRules {
    /// The right-hand side is the complete tree-width-`k` approximation
    /// (`k ≥ 2`) of the left, so the SRE counterexample bound applies.
    pub sre_bound: bool,
}

fn is_cq(q: &C2rpq) -> bool {
    q.atoms.iter().all(|a| a.lang.as_single_letter().is_some())
}

/// Outcome for one left-hand disjunct.
enum Disjunct {
    Covered(String),
    Refuted(Witness),
    Open(String),
}

fn check_disjunct(
    index: usize,
    g: &C2rpq,
    delta: &Uc2rpq,
    word_bound: usize,
    rules: ExactnessRules,
) -> Result<Disjunct, SemanticsError> {
    let g = if g.equalities.is_empty() { g.clone() } else { collapse_equalities(g).0 };
    if let Some(j) = delta.disjuncts.iter().position(|d| find_homomorphism(d, &g, false).is_some()) {
        let how = if is_isomorphic(&delta.disjuncts[j], &g) { "isomorphic to" } else { "has a homomorphism onto" };
        return Ok(Disjunct::Covered(format!("disjunct {index}: right disjunct {j} {how} it")));
    }
    if is_cq(&g) {
        let words: Vec<Word> = g.atoms.iter().map(|a| vec![a.lang.as_single_letter().expect("cq")]).collect();
        return Ok(if cq_contained(&g, delta)? {
            Disjunct::Covered(format!("disjunct {index}: conjunctive query checked on its canonical database"))
        } else {
            Disjunct::Refuted(Witness { disjunct: index, query: expansion_from_words(&g, &words), words })
        });
    }
    for e in enumerate_expansions(&g, word_bound) {
        if !cq_contained(&e.query, delta)? {
            return Ok(Disjunct::Refuted(Witness { disjunct: index, words: e.words, query: e.query }));
        }
    }
    if saturation_length(&g).is_some_and(|s| s <= word_bound) {
        return Ok(Disjunct::Covered(format!("disjunct {index}: finite languages, every expansion checked")));
    }
    let single = Uc2rpq::single(g.clone());
    if rules.sre_bound && is_sre(&single) && word_bound >= sre_word_bound(&g) {
        return Ok(Disjunct::Covered(format!(
            "disjunct {index}: simple regular expressions, word bound {word_bound} >= {}",
            sre_word_bound(&g)
        )));
    }
    Ok(Disjunct::Open(format!("disjunct {index}: no counterexample with words up to length {word_bound}")))
}

/// [`contained_bounded_with`] without extra rules.
pub fn contained_bounded(gamma: &Uc2rpq, delta: &Uc2rpq, word_bound: usize) -> Result<Verdict, SemanticsError> {
    contained_bounded_with(gamma, delta, word_bound, ExactnessRules::default())
}

/// Bounded containment `gamma ⊑ delta`.
///
/// Each left disjunct is settled, in order, by a homomorphism from a right
/// disjunct, by the exact CQ test, or by its expansions with words of
/// length at most `word_bound`. The first failing expansion is returned.
pub fn contained_bounded_with(
    gamma: &Uc2rpq,
    delta: &Uc2rpq,
    word_bound: usize,
    rules: ExactnessRules,
) -> Result<Verdict, SemanticsError> {
    if gamma.arity != delta.arity {
        return Err(SemanticsError::ArityMismatch(gamma.arity, delta.arity));
    }
    let mut notes = Vec::new();
    let mut open = false;
    for (i, g) in gamma.disjuncts.iter().enumerate() {
        match check_disjunct(i, g, delta, word_bound, rules)? {
            Disjunct::Covered(n) => notes.push(n),
            Disjunct::Open(n) => {
                open = true;
                notes.push(n);
            }
            Disjunct::Refuted(w) => {
                notes.push(format!("disjunct {i}: expansion is not contained"));
                return Ok(Verdict { kind: VerdictKind::No, exact: true, witness: Some(w), bound: None, notes });
            }
        }
    }
    if open {
        Ok(Verdict { kind: VerdictKind::NoCounterexampleUpTo, exact: false, witness: None, bound: Some(word_bound), notes })
    } else {
        Ok(Verdict::yes(notes))
    }
}

/// Re-derives a `No` witness from `gamma` and re-checks it against `delta`.
pub fn replay_witness(gamma: &Uc2rpq, delta: &Uc2rpq, w: &Witness) -> bool {
    let Some(g) = gamma.disjuncts.get(w.disjunct) else { return false };
    let g = if g.equalities.is_empty() { g.clone() } else { collapse_equalities(g).0 };
    if w.words.len() != g.atoms.len() || g.atoms.iter().zip(&w.words).any(|(a, word)| !a.lang.accepts(word)) {
        return false;
    }
    let again = expansion_from_words(&g, &w.words);
    is_isomorphic(&again, &w.query) && matches!(cq_contained(&again, delta), Ok(false))
}

/// Both directions of bounded containment.
pub fn equivalent_bounded(a: &Uc2rpq, b: &Uc2rpq, word_bound: usize) -> Result<Verdict, SemanticsError> {
    let ab = contained_bounded(a, b, word_bound)?;
    let ba = contained_bounded(b, a, word_bound)?;
    let mut notes: Vec<String> = ab.notes.iter().map(|n| format!("left in right: {n}")).collect();
    notes.extend(ba.notes.iter().map(|n| format!("right in left: {n}")));
    for (v, dir) in [(&ab, "left in right"), (&ba, "right in left")] {
        if v.is_no() {
            notes.push(format!("counterexample for {dir}"));
            return Ok(Verdict { kind: VerdictKind::No, exact: true, witness: v.witness.clone(), bound: None, notes });
        }
    }
    if ab.is_yes() && ba.is_yes() {
        return Ok(Verdict::yes(notes));
    }
    Ok(Verdict { kind: VerdictKind::NoCounterexampleUpTo, exact: false, witness: None, bound: Some(word_bound), notes })
}

/// The class the decision actually approximates by: tree-width 1 and
/// path-width go through their contracted counterparts.
pub fn redirect_class(gamma: &Uc2rpq, cls: WidthClass) -> Result<WidthClass, SemanticsError> {
    if cls.kind.is_one_way() && gamma.has_inverted_letters() {
        return Err(SemanticsError::InverseInOneWay(cls.to_string()));
    }
    let kind = match (cls.kind, cls.k) {
        (WidthKind::TreeWidth, 1) => WidthKind::ContractedTreeWidth,
        (WidthKind::PathWidth, _) => WidthKind::ContractedPathWidth,
        (k, _) => k,
    };
    Ok(WidthClass::new(kind, cls.k)?)
}

/// A semantic-width decision and the approximation behind it.
#[derive(Clone, Debug)]
pub struct Decision {
    pub requested: WidthClass,
    pub class: WidthClass,
    pub approximation: Approximation,
    pub verdict: Verdict,
    /// The verdict is exact as a statement about the containment in the
    /// bounded approximation.
    pub exact_vs_approximation: bool,
    /// The verdict is exact as a statement about semantic width.
    pub exact_vs_semantic_width: bool,
}

/// Whether `gamma` is equivalent to a union of queries in `cls`, decided
/// through `gamma ⊑ mua_hom_bounded(gamma, cls', m)`.
pub fn decide_semantic_width(
    gamma: &Uc2rpq,
    cls: WidthClass,
    m: usize,
    word_bound: usize,
    limits: ApproxLimits,
) -> Result<Decision, SemanticsError> {
    let class = redirect_class(gamma, cls)?;
    let approximation = mua_hom_bounded(gamma, class, m, limits)?;
    let full = approximation.complete && approximation.exhaustive;
    let rules = ExactnessRules { sre_bound: full && class.kind == WidthKind::TreeWidth && class.k >= 2 };
    let mut verdict = contained_bounded_with(gamma, &approximation.union, word_bound, rules)?;
    if class != cls {
        verdict.notes.insert(0, format!("class {cls} decided through {class}"));
    }
    let exact_vs_approximation = verdict.exact;
    // membership in the class is witnessed by the union itself; a failure
    // only speaks for semantic width once the approximation is complete
    let exact_vs_semantic_width = match verdict.kind {
        VerdictKind::Yes => verdict.exact,
        VerdictKind::No => verdict.exact && full,
        VerdictKind::NoCounterexampleUpTo => false,
    };
    if verdict.is_no() && !full {
        verdict.notes.push(format!("refinement length {m} is below the completeness bound; the counterexample refutes only this approximation"));
    }
    verdict.exact = exact_vs_semantic_width;
    Ok(Decision { requested: cls, class, approximation, verdict, exact_vs_approximation, exact_vs_semantic_width })
}
