//! Maximal under-approximations of bounded width.
//!
//! The approximation of a C2RPQ `γ` for a width class is the union of all
//! strong onto homomorphic images of refinements of `γ` that fall in the
//! class. [`mua_hom_bounded`] enumerates refinements up to a length `m`;
//! the result is complete once `m` reaches the class bound of
//! [`width_bound`], or once every atom language is finite and `m` covers
//! its longest word.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::automata::{self, Nfa};
use crate::decomposition::{m0, query_width, DecompositionError, WidthKind};
use crate::morphism::{atom_key, find_homomorphism, homomorphic_images, invariant_hash, is_isomorphic, quotient, IsoSet};
use crate::query_model::{
    collapse_equalities, enumerate_refinements, render_query, Atom, C2rpq, QueryError, Refinement, Uc2rpq,
};

/// Constant `c` of the cubic refinement bound `c·‖γ‖³` used for the
/// width-1 contracted classes.
pub const CUBIC_CONSTANT: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApproxError {
    #[error("invalid width class: {0}")]
    InvalidClass(String),
    #[error(transparent)]
    Width(#[from] DecompositionError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// A width measure together with its bound `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WidthClass {
    pub kind: WidthKind,
    pub k: usize,
}

impl WidthClass {
    pub fn new(kind: WidthKind, k: usize) -> Result<WidthClass, ApproxError> {
        if k == 0 {
            return Err(ApproxError::InvalidClass(format!("{}: k must be positive", kind.name())));
        }
        Ok(WidthClass { kind, k })
    }

    /// Parses `kind:k`, e.g. `tw:2` or `cpw1:1`.
    pub fn parse(text: &str) -> Result<WidthClass, ApproxError> {
        let (kind, k) = text
            .split_once(':')
            .ok_or_else(|| ApproxError::InvalidClass(format!("expected kind:k, got '{text}'")))?;
        let kind = WidthKind::parse(kind).ok_or_else(|| ApproxError::InvalidClass(format!("unknown kind '{kind}'")))?;
        let k = k.parse().map_err(|_| ApproxError::InvalidClass(format!("bad bound '{k}'")))?;
        WidthClass::new(kind, k)
    }

    /// Membership test for one query.
    pub fn admits(&self, q: &C2rpq) -> Result<bool, DecompositionError> {
        if self.kind.is_one_way() && q.has_inverted_letters() {
            return Ok(false);
        }
        Ok(query_width(q, self.kind)? <= self.k)
    }

    /// Whether the refinement bound is the cubic one.
    pub fn cubic(&self) -> bool {
        self.k == 1 && matches!(self.kind, WidthKind::ContractedTreeWidth | WidthKind::OneWayContractedTreeWidth)
    }
}

impl fmt::Display for WidthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.k)
    }
}

/// The explicit refinement bounds for one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WidthBound {
    pub m0: BigUint,
    /// Refinement length sufficient for completeness.
    pub ell: BigUint,
    /// `ell` is `CUBIC_CONSTANT·‖γ‖³` rather than derived from `m0`.
    pub cubic: bool,
}

/// `m₀` and the refinement bound `ℓ = 2(2‖γ‖(m₀−1) − 1)`; the width-1
/// contracted classes use `8‖γ‖³` instead.
pub fn width_bound(gamma: &C2rpq, cls: WidthClass) -> WidthBound {
    let g = gamma.num_atoms();
    let m0 = m0(g, cls.k);
    if cls.cubic() {
        let ell = BigUint::from(CUBIC_CONSTANT) * BigUint::from(g).pow(3);
        return WidthBound { m0, ell, cubic: true };
    }
    let inner = BigUint::from(2 * g) * (&m0 - 1u32);
    let ell = if inner == BigUint::from(0u32) { BigUint::from(0u32) } else { BigUint::from(2u32) * (inner - 1u32) };
    WidthBound { m0, ell, cubic: false }
}

/// The largest word length over all atoms when every atom language is
/// finite. Beyond it, longer refinements do not exist.
pub fn saturation_length(q: &C2rpq) -> Option<usize> {
    q.atoms
        .iter()
        .map(|a| if a.lang.is_empty() { Some(0) } else { a.lang.longest_word() })
        .try_fold(0, |acc, l| l.map(|l| acc.max(l)))
}

/// Whether `Refin≤m` already yields the full approximation of every
/// disjunct of `gamma`.
pub fn complete_at(gamma: &Uc2rpq, cls: WidthClass, m: usize) -> bool {
    gamma.disjuncts.iter().flat_map(split_atoms).all(|d| {
        saturation_length(&d).is_some_and(|s| m >= s) || BigUint::from(m) >= width_bound(&d, cls).ell
    })
}

/// The largest `ℓ` over the disjuncts of `gamma`.
pub fn union_bound(gamma: &Uc2rpq, cls: WidthClass) -> BigUint {
    gamma.disjuncts.iter().map(|d| width_bound(d, cls).ell).max().unwrap_or_default()
}

fn intern(nfa: Nfa) -> Arc<Nfa> {
    match nfa.as_single_letter() {
        Some(l) => automata::single_letter(&l),
        None => Arc::new(nfa),
    }
}

/// Splits every atom whose automaton has several initial or final states
/// into one atom per (initial, final) pair, yielding one disjunct per
/// combination. Pairs with an empty language are skipped.
pub fn split_atoms(q: &C2rpq) -> Vec<C2rpq> {
    let q = if q.equalities.is_empty() { q.clone() } else { collapse_equalities(q).0 };
    let options: Vec<Vec<Arc<Nfa>>> = q
        .atoms
        .iter()
        .map(|a| {
            let n = &a.lang;
            if n.initial().len() <= 1 && n.finals().len() <= 1 {
                return vec![a.lang.clone()];
            }
            let mut out: Vec<Arc<Nfa>> = Vec::new();
            for &i in n.initial() {
                for &f in n.finals() {
                    let part = Nfa::new(n.num_states(), n.transitions().iter().cloned(), [i], [f])
                        .expect("states of an existing automaton")
                        .reduced();
                    if !part.is_empty() && !out.iter().any(|o| automata::equivalent(o, &part)) {
                        out.push(intern(part));
                    }
                }
            }
            out
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let total: usize = options.iter().map(Vec::len).product();
    if total == 1 {
        return vec![q];
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; options.len()];
    for n in 0..total {
        let atoms = q
            .atoms
            .iter()
            .zip(&idx)
            .zip(&options)
            .map(|((a, &i), o)| Atom::new(a.src.clone(), o[i].clone(), a.dst.clone()))
            .collect();
        let mut d = C2rpq::from_parts(format!("{}_{}", q.name, n), q.output.clone(), atoms, Vec::new());
        d.vars = q.vars.clone();
        out.push(d);
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Caps on the enumeration.
#[derive(Clone, Copy, Debug)]
pub struct ApproxLimits {
    /// Refinements examined per split disjunct.
    pub max_refinements: usize,
    /// Disjuncts kept in the output.
    pub max_images: usize,
}

impl Default for ApproxLimits {
    fn default() -> Self {
        ApproxLimits { max_refinements: 200_000, max_images: 100_000 }
    }
}

/// Why a disjunct is in the approximation.
#[derive(Clone, Debug)]
pub struct Certificate {
    /// Index of the split disjunct in [`Approximation::split`].
    pub source: usize,
    /// Position of the refinement in enumeration order.
    pub refinement_index: usize,
    pub refinement: Refinement,
    /// Partition of `refinement.result`'s sorted variables.
    pub partition: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ApproxStats {
    pub refinements: usize,
    pub images: usize,
    pub admitted: usize,
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub union: Uc2rpq,
    /// One certificate per disjunct of `union`.
    pub certificates: Vec<Certificate>,
    /// The input after [`split_atoms`].
    pub split: Vec<C2rpq>,
    pub class: WidthClass,
    pub m: usize,
    /// No cap was hit.
    pub exhaustive: bool,
    /// `m` reaches the bound, so the union is the full approximation
    /// (when also `exhaustive`).
    pub complete: bool,
    pub stats: ApproxStats,
}

const CHUNK: usize = 64;

type Found = (usize, Vec<(C2rpq, Vec<usize>)>);

/// Admitted images of one refinement, in image order.
fn admitted_images(r: &Refinement, cls: WidthClass) -> Result<(usize, Vec<(C2rpq, Vec<usize>)>), DecompositionError> {
    let images = homomorphic_images(&r.result);
    let n = images.len();
    let mut keep = Vec::new();
    for img in images {
        if cls.admits(&img.query)? {
            keep.push((img.query, img.partition));
        }
    }
    Ok((n, keep))
}

/// The union over the disjuncts of `gamma` of all images of refinements of
/// length at most `m` that belong to `cls`, deduplicated up to isomorphism.
///
/// Refinements are processed in parallel in fixed-size chunks and merged in
/// enumeration order, so the output does not depend on scheduling.
pub fn mua_hom_bounded(gamma: &Uc2rpq, cls: WidthClass, m: usize, limits: ApproxLimits) -> Result<Approximation, ApproxError> {
    if m == 0 {
        return Err(ApproxError::InvalidClass("refinement length m must be positive".into()));
    }
    let split: Vec<C2rpq> = gamma.disjuncts.iter().flat_map(split_atoms).collect();
    let mut set = IsoSet::default();
    let mut certificates = Vec::new();
    let mut stats = ApproxStats::default();
    let mut exhaustive = true;
    'outer: for (source, d) in split.iter().enumerate() {
        let it = enumerate_refinements(d, m);
        let total = it.total();
        if total > limits.max_refinements {
            exhaustive = false;
        }
        let total = total.min(limits.max_refinements);
        let mut start = 0;
        while start < total {
            let end = (start + CHUNK * rayon::current_num_threads().max(1)).min(total);
            let found: Vec<Result<(Refinement, Found), DecompositionError>> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let r = it.get(i).expect("index below total");
                    let (n, keep) = admitted_images(&r, cls)?;
                    Ok((r, (n, keep)))
                })
                .collect();
            for (offset, res) in found.into_iter().enumerate() {
                let (r, (n, keep)) = res?;
                stats.refinements += 1;
                stats.images += n;
                stats.admitted += keep.len();
                for (q, partition) in keep {
                    if set.insert(&q) {
                        if set.len() > limits.max_images {
                            exhaustive = false;
                            break 'outer;
                        }
                        certificates.push(Certificate {
                            source,
                            refinement_index: start + offset,
                            refinement: r.clone(),
                            partition,
                        });
                    }
                }
            }
            start = end;
        }
    }
    let mut disjuncts: Vec<C2rpq> = set.items().iter().take(certificates.len()).cloned().collect();
    for (i, q) in disjuncts.iter_mut().enumerate() {
        q.name = format!("{}_app{}", gamma.name, i);
    }
    let union = Uc2rpq::with_arity(format!("{}_app", gamma.name), gamma.arity, disjuncts)?;
    let complete = complete_at(gamma, cls, m);
    Ok(Approximation { union, certificates, split, class: cls, m, exhaustive, complete, stats })
}

impl Approximation {
    /// Re-derives every disjunct from its certificate and re-tests the class.
    pub fn validate(&self) -> Result<(), String> {
        if self.certificates.len() != self.union.disjuncts.len() {
            return Err("certificate count differs from disjunct count".into());
        }
        for (i, (d, c)) in self.union.disjuncts.iter().zip(&self.certificates).enumerate() {
            let base = self.split.get(c.source).ok_or_else(|| format!("disjunct {i}: unknown source"))?;
            let again = enumerate_refinements(base, self.m)
                .get(c.refinement_index)
                .ok_or_else(|| format!("disjunct {i}: refinement index out of range"))?;
            if again.trace_signature() != c.refinement.trace_signature() || c.refinement.length() > self.m {
                return Err(format!("disjunct {i}: refinement does not replay"));
            }
            let img = quotient(&c.refinement.result, &c.partition);
            if !is_isomorphic(&img, d) {
                return Err(format!("disjunct {i}: image differs from certificate"));
            }
            match self.class.admits(d) {
                Ok(true) => {}
                Ok(false) => return Err(format!("disjunct {i}: outside {}", self.class)),
                Err(e) => return Err(format!("disjunct {i}: {e}")),
            }
        }
        Ok(())
    }

    /// One line per disjunct: refinement traces and partition.
    pub fn provenance(&self) -> Vec<String> {
        self.certificates
            .iter()
            .zip(&self.union.disjuncts)
            .map(|(c, d)| {
                let traces: Vec<String> = c
                    .refinement
                    .per_atom
                    .iter()
                    .map(|t| match t {
                        crate::query_model::AtomTrace::EqualityCollapse => "=".to_string(),
                        crate::query_model::AtomTrace::Path { states, segments } => {
                            let segs: Vec<String> = segments.iter().map(|s| s.lang.to_regex()).collect();
                            format!("states {:?} segments [{}]", states, segs.join(", "))
                        }
                    })
                    .collect();
                format!(
                    "{}: source {} refinement #{} ({}) partition {:?}",
                    d.name,
                    c.source,
                    c.refinement_index,
                    traces.join("; "),
                    c.partition
                )
            })
            .collect()
    }
}

fn classes(q: &C2rpq) -> BTreeSet<u32> {
    q.atoms.iter().map(|a| atom_key(a).1).collect()
}

/// Removes every disjunct into which another kept disjunct maps. Among
/// homomorphically equivalent disjuncts the least in canonical order stays,
/// so the result does not depend on the input order.
pub fn minimize_union(u: &Uc2rpq) -> Uc2rpq {
    let mut order: Vec<usize> = (0..u.disjuncts.len()).collect();
    let keys: Vec<(usize, usize, u64, String)> = u
        .disjuncts
        .iter()
        .map(|d| (d.atoms.len(), d.vars.len(), invariant_hash(d), render_query(&C2rpq { name: String::new(), ..d.clone() })))
        .collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    let cls: Vec<BTreeSet<u32>> = u.disjuncts.iter().map(classes).collect();
    let maps = |from: usize, to: usize| cls[from].is_subset(&cls[to]) && find_homomorphism(&u.disjuncts[from], &u.disjuncts[to], false).is_some();
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let dominated = order.iter().enumerate().any(|(p2, &j)| {
            j != i && maps(j, i) && (!maps(i, j) || p2 < pos)
        });
        if !dominated {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    let disjuncts = keep.into_iter().map(|i| u.disjuncts[i].clone()).collect();
    Uc2rpq { name: u.name.clone(), arity: u.arity, disjuncts }
}
