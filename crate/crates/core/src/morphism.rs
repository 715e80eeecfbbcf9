//! Homomorphisms, homomorphic images, isomorphism and CQ cores.
//!
//! Atom languages are compared by their exact language class. A single
//! inverse letter `x -a⁻-> y` is compared as `y -a-> x`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use crate::query_model::{Atom, C2rpq, QueryError, Var};

/// A variable mapping from `source` to `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homomorphism {
    pub mapping: BTreeMap<Var, Var>,
}

impl Homomorphism {
    pub fn apply<'a>(&'a self, v: &'a str) -> &'a str {
        self.mapping.get(v).map(String::as_str).unwrap_or(v)
    }
}

/// Orientation-normalized key of an atom: (src, class, dst).
pub fn atom_key(a: &Atom) -> (Var, u32, Var) {
    match a.lang.as_single_letter() {
        Some(l) if l.inverted => (a.dst.clone(), crate::automata::single_letter(&l.inverse()).class_id(), a.src.clone()),
        _ => (a.src.clone(), a.lang.class_id(), a.dst.clone()),
    }
}

struct Indexed {
    vars: Vec<Var>,
    output: Vec<usize>,
    atoms: Vec<(usize, u32, usize)>,
    set: HashSet<(usize, u32, usize)>,
    // out[v] = (class, dst), inn[v] = (class, src)
    out: Vec<Vec<(u32, usize)>>,
    inn: Vec<Vec<(u32, usize)>>,
}

impl Indexed {
    fn new(q: &C2rpq) -> Indexed {
        let mut vars: BTreeSet<Var> = q.vars.clone();
        for a in &q.atoms {
            vars.insert(a.src.clone());
            vars.insert(a.dst.clone());
        }
        vars.extend(q.output.iter().cloned());
        let vars: Vec<Var> = vars.into_iter().collect();
        let index: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let atoms: Vec<(usize, u32, usize)> = q
            .atoms
            .iter()
            .map(|a| {
                let (s, c, d) = atom_key(a);
                (index[s.as_str()], c, index[d.as_str()])
            })
            .collect();
        let mut out = vec![Vec::new(); vars.len()];
        let mut inn = vec![Vec::new(); vars.len()];
        for &(s, c, d) in &atoms {
            out[s].push((c, d));
            inn[d].push((c, s));
        }
        for l in out.iter_mut().chain(inn.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        let output = q.output.iter().map(|v| index[v.as_str()]).collect();
        let set = atoms.iter().copied().collect();
        Indexed { vars, output, atoms, set, out, inn }
    }

    fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[v].iter().map(|p| p.1).chain(self.inn[v].iter().map(|p| p.1))
    }
}

/// Search order: pinned outputs first, then by number of links to already
/// ordered variables.
fn search_order(src: &Indexed) -> Vec<usize> {
    let n = src.vars.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &o in &src.output {
        if !placed[o] {
            placed[o] = true;
            order.push(o);
        }
    }
    while order.len() < n {
        let mut best = None;
        let mut best_score = (0usize, 0usize);
        for v in 0..n {
            if placed[v] {
                continue;
            }
            let links = src.neighbours(v).filter(|&u| placed[u]).count();
            let deg = src.out[v].len() + src.inn[v].len();
            let score = (links, deg);
            if best.is_none() || score > best_score {
                best = Some(v);
                best_score = score;
            }
        }
        let v = best.expect("unplaced variable");
        placed[v] = true;
        order.push(v);
    }
    order
}

/// Depth-first enumeration; `visit` returns false to stop.
fn search(src: &Indexed, dst: &Indexed, strong_onto: bool, visit: &mut dyn FnMut(&[usize]) -> bool) {
    let n = src.vars.len();
    let mut pinned = vec![None; n];
    for (i, &o) in src.output.iter().enumerate() {
        let t = dst.output[i];
        match pinned[o] {
            Some(p) if p != t => return,
            _ => pinned[o] = Some(t),
        }
    }
    let order = search_order(src);
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    // constraints checked when the later endpoint is assigned
    let mut checks: Vec<Vec<(usize, u32, usize)>> = vec![Vec::new(); n];
    for &(s, c, d) in &src.atoms {
        let later = if pos[s] >= pos[d] { s } else { d };
        checks[later].push((s, c, d));
    }
    let mut f = vec![usize::MAX; n];
    fn rec(
        k: usize,
        order: &[usize],
        pinned: &[Option<usize>],
        checks: &[Vec<(usize, u32, usize)>],
        src: &Indexed,
        dst: &Indexed,
        strong: bool,
        f: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if k == order.len() {
            if strong {
                let image: HashSet<(usize, u32, usize)> = src.atoms.iter().map(|&(s, c, d)| (f[s], c, f[d])).collect();
                if !dst.set.iter().all(|a| image.contains(a)) {
                    return true;
                }
            }
            return visit(f);
        }
        let v = order[k];
        let candidates: Vec<usize> = if let Some(p) = pinned[v] {
            vec![p]
        } else if let Some(&(s, c, d)) = checks[v].iter().find(|&&(s, _, d)| s != d) {
            if s == v {
                dst.inn[f[d]].iter().filter(|p| p.0 == c).map(|p| p.1).collect()
            } else {
                dst.out[f[s]].iter().filter(|p| p.0 == c).map(|p| p.1).collect()
            }
        } else {
            (0..dst.vars.len()).collect()
        };
        for t in candidates {
            f[v] = t;
            let ok = checks[v].iter().all(|&(s, c, d)| dst.set.contains(&(f[s], c, f[d])));
            if ok && !rec(k + 1, order, pinned, checks, src, dst, strong, f, visit) {
                f[v] = usize::MAX;
                return false;
            }
        }
        f[v] = usize::MAX;
        true
    }
    rec(0, &order, &pinned, &checks, src, dst, strong_onto, &mut f, visit);
}

fn to_hom(src: &Indexed, dst: &Indexed, f: &[usize]) -> Homomorphism {
    Homomorphism { mapping: f.iter().enumerate().map(|(i, &t)| (src.vars[i].clone(), dst.vars[t].clone())).collect() }
}

/// Every homomorphism `src → dst`, optionally only strong onto ones.
pub fn find_homomorphisms(src: &C2rpq, dst: &C2rpq, want_strong_onto: bool) -> Result<Vec<Homomorphism>, QueryError> {
    if src.arity() != dst.arity() {
        return Err(QueryError::ArityMismatch(src.arity(), dst.arity()));
    }
    let (a, b) = (Indexed::new(src), Indexed::new(dst));
    let mut out = Vec::new();
    search(&a, &b, want_strong_onto, &mut |f| {
        out.push(to_hom(&a, &b, f));
        true
    });
    Ok(out)
}

/// Some homomorphism `src → dst`, if any.
pub fn find_homomorphism(src: &C2rpq, dst: &C2rpq, strong_onto: bool) -> Option<Homomorphism> {
    if src.arity() != dst.arity() {
        return None;
    }
    let (a, b) = (Indexed::new(src), Indexed::new(dst));
    let mut found = None;
    search(&a, &b, strong_onto, &mut |f| {
        found = Some(to_hom(&a, &b, f));
        false
    });
    found
}

pub fn hom_exists(src: &C2rpq, dst: &C2rpq) -> bool {
    find_homomorphism(src, dst, false).is_some()
}

/// Set partitions of `0..n` as restricted growth strings, lexicographic.
pub fn partitions(n: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = Some(vec![0; n]);
    std::iter::from_fn(move || {
        let out = cur.take()?;
        // next restricted growth string
        let mut next = out.clone();
        let mut i = n;
        while i > 1 {
            i -= 1;
            let max_prefix = next[..i].iter().copied().max().unwrap_or(0);
            if next[i] <= max_prefix {
                next[i] += 1;
                for x in next.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                cur = Some(next);
                break;
            }
        }
        Some(out)
    })
}

/// The quotient of `q` by a partition of its (sorted) variables, given as a
/// restricted growth string. Each class is named by its least variable;
/// atoms that become identical are merged.
pub fn quotient(q: &C2rpq, rgs: &[usize]) -> C2rpq {
    let vars: Vec<&Var> = q.vars.iter().collect();
    let mut rep: Vec<Option<Var>> = Vec::new();
    let mut map = BTreeMap::new();
    for (v, &b) in vars.iter().zip(rgs) {
        if rep.len() <= b {
            rep.resize(b + 1, None);
        }
        let name = rep[b].get_or_insert_with(|| (*v).clone()).clone();
        map.insert((*v).clone(), name);
    }
    let mut img = q.rename(&map);
    let mut seen = HashSet::new();
    img.atoms.retain(|a| seen.insert(atom_key(a)));
    img
}

/// A homomorphic image with the partition that produced it.
#[derive(Clone, Debug)]
pub struct Image {
    pub query: C2rpq,
    pub partition: Vec<usize>,
}

/// All strong onto images of `q` up to isomorphism, the trivial partition
/// (q itself) first.
pub fn homomorphic_images(q: &C2rpq) -> Vec<Image> {
    let n = q.vars.len();
    let mut set = IsoSet::default();
    let mut out = Vec::new();
    let mut parts: Vec<Vec<usize>> = partitions(n).collect();
    // identity partition first
    parts.reverse();
    for p in parts {
        let img = quotient(q, &p);
        if set.insert(&img) {
            out.push(Image { query: img, partition: p });
        }
    }
    out
}

fn pair_labels(ix: &Indexed) -> HashMap<(usize, usize), Vec<u32>> {
    let mut m: HashMap<(usize, usize), Vec<u32>> = HashMap::new();
    for &(s, c, d) in &ix.atoms {
        m.entry((s, d)).or_default().push(c);
    }
    for v in m.values_mut() {
        v.sort_unstable();
    }
    m
}

fn var_signature(ix: &Indexed, labels: &HashMap<(usize, usize), Vec<u32>>, v: usize) -> (Vec<u32>, Vec<u32>, Vec<u32>, Vec<usize>) {
    let mut o = Vec::new();
    let mut i = Vec::new();
    let mut l = Vec::new();
    for (&(s, d), cs) in labels {
        if s == v && d == v {
            l.extend(cs);
        } else if s == v {
            o.extend(cs);
        } else if d == v {
            i.extend(cs);
        }
    }
    o.sort_unstable();
    i.sort_unstable();
    l.sort_unstable();
    let outs = ix.output.iter().enumerate().filter(|(_, &x)| x == v).map(|(k, _)| k).collect();
    (o, i, l, outs)
}

/// Output-preserving bijection on variables that preserves the atom multiset.
pub fn is_isomorphic(a: &C2rpq, b: &C2rpq) -> bool {
    if a.arity() != b.arity() || a.atoms.len() != b.atoms.len() {
        return false;
    }
    let (x, y) = (Indexed::new(a), Indexed::new(b));
    if x.vars.len() != y.vars.len() {
        return false;
    }
    let (lx, ly) = (pair_labels(&x), pair_labels(&y));
    let sx: Vec<_> = (0..x.vars.len()).map(|v| var_signature(&x, &lx, v)).collect();
    let sy: Vec<_> = (0..y.vars.len()).map(|v| var_signature(&y, &ly, v)).collect();
    let mut ms = sx.clone();
    let mut ns = sy.clone();
    ms.sort();
    ns.sort();
    if ms != ns {
        return false;
    }
    let order = search_order(&x);
    let n = order.len();
    let mut f = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let empty = Vec::new();
    fn rec(
        k: usize,
        order: &[usize],
        sx: &[(Vec<u32>, Vec<u32>, Vec<u32>, Vec<usize>)],
        sy: &[(Vec<u32>, Vec<u32>, Vec<u32>, Vec<usize>)],
        lx: &HashMap<(usize, usize), Vec<u32>>,
        ly: &HashMap<(usize, usize), Vec<u32>>,
        f: &mut Vec<usize>,
        used: &mut Vec<bool>,
        empty: &Vec<u32>,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let v = order[k];
        for t in 0..sy.len() {
            if used[t] || sx[v] != sy[t] {
                continue;
            }
            f[v] = t;
            let ok = order[..=k].iter().all(|&u| {
                let fu = f[u];
                lx.get(&(u, v)).unwrap_or(empty) == ly.get(&(fu, t)).unwrap_or(empty)
                    && lx.get(&(v, u)).unwrap_or(empty) == ly.get(&(t, fu)).unwrap_or(empty)
            });
            if ok {
                used[t] = true;
                if rec(k + 1, order, sx, sy, lx, ly, f, used, empty) {
                    return true;
                }
                used[t] = false;
            }
            f[v] = usize::MAX;
        }
        false
    }
    rec(0, &order, &sx, &sy, &lx, &ly, &mut f, &mut used, &empty)
}

/// Isomorphism-invariant hash.
pub fn invariant_hash(q: &C2rpq) -> u64 {
    let ix = Indexed::new(q);
    let labels = pair_labels(&ix);
    let mut sigs: Vec<_> = (0..ix.vars.len()).map(|v| var_signature(&ix, &labels, v)).collect();
    sigs.sort();
    let mut h = DefaultHasher::new();
    ix.output.len().hash(&mut h);
    sigs.hash(&mut h);
    h.finish()
}

/// A collection of queries pairwise non-isomorphic.
#[derive(Default)]
pub struct IsoSet {
    buckets: HashMap<u64, Vec<usize>>,
    items: Vec<C2rpq>,
}

impl IsoSet {
    /// Inserts unless an isomorphic query is present; returns whether inserted.
    pub fn insert(&mut self, q: &C2rpq) -> bool {
        self.position_or_insert(q).1
    }

    /// Index of the isomorphic representative, and whether it was new.
    pub fn position_or_insert(&mut self, q: &C2rpq) -> (usize, bool) {
        let h = invariant_hash(q);
        let bucket = self.buckets.entry(h).or_default();
        for &i in bucket.iter() {
            if is_isomorphic(&self.items[i], q) {
                return (i, false);
            }
        }
        bucket.push(self.items.len());
        self.items.push(q.clone());
        (self.items.len() - 1, true)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[C2rpq] {
        &self.items
    }
}

/// The core of a CQ: atoms are removed one at a time while the query still
/// maps into the remainder, then unused existential variables are dropped.
pub fn cq_core(cq: &C2rpq) -> Result<C2rpq, QueryError> {
    if let Some(i) = cq.atoms.iter().position(|a| a.lang.as_single_letter().is_none()) {
        return Err(QueryError::NotCq(i));
    }
    if !cq.equalities.is_empty() {
        return Err(QueryError::HasEqualities);
    }
    let mut cur = cq.clone();
    let mut seen = HashSet::new();
    cur.atoms.retain(|a| seen.insert(atom_key(a)));
    let mut i = 0;
    while i < cur.atoms.len() {
        let mut smaller = cur.clone();
        smaller.atoms.remove(i);
        if hom_exists(&cur, &smaller) {
            cur = smaller;
            i = 0;
        } else {
            i += 1;
        }
    }
    cur.drop_isolated_existentials();
    Ok(cur)
}
