//! The two rewrites that bound refinement sizes: making every atom
//! refinement induce an acyclic path, then shortening long non-branching
//! paths between bags with equal profiles.
//!
//! Both take a trio with a fine tagged decomposition of width at most `k`
//! and return a trio whose approximation contains the original one, with a
//! fine tagged decomposition of width at most `k`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;

use super::tagged::{cyclic_pair, leave_positions, PathElem, TaggedTreeDecomposition, Trio};
use super::tree::TreeDecomposition;
use super::DecompositionError;
use crate::query_model::{condense, Refinement, Var};

/// One slot of the pigeonhole search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotKind<P> {
    Trap,
    Avoid,
    Profile(P),
}

/// First pair `i < i'` (lexicographically) with equal non-avoid values,
/// `i' - i >= d`, and no trap in between.
pub fn pigeonhole<P: PartialEq>(seq: &[SlotKind<P>], d: usize) -> Option<(usize, usize)> {
    for (i, s) in seq.iter().enumerate() {
        let SlotKind::Profile(p) = s else { continue };
        for (j, t) in seq.iter().enumerate().skip(i + 1) {
            match t {
                SlotKind::Trap => break,
                SlotKind::Profile(q) if j - i >= d && q == p => return Some((i, j)),
                _ => {}
            }
        }
    }
    None
}

/// Length above which a non-branching path always contains a shortenable
/// pair: `2(2g+1)(2k+1)((k+1)^g+1) + 4g` for a query with `g` atoms.
pub fn m0(g: usize, k: usize) -> BigUint {
    let g_ = BigUint::from(g);
    let k_ = BigUint::from(k);
    let pow = (k_.clone() + 1u32).pow(g as u32);
    BigUint::from(2u32) * (BigUint::from(2u32) * &g_ + 1u32) * (BigUint::from(2u32) * k_ + 1u32) * (pow + 1u32)
        + BigUint::from(4u32) * g_
}

/// Condense the refinement of `atom` between path positions `i < j`; the
/// resulting atom is tagged in `bag`, or placed later when `None`.
struct Cut {
    atom: usize,
    i: usize,
    j: usize,
    bag: Option<usize>,
}

/// Applies the cuts and carries the homomorphism and tags over. A cut of
/// width one keeps its segment and only releases its tag.
fn apply_cuts(trio: &Trio, tags: &[usize], cuts: &[Cut]) -> (Refinement, BTreeMap<Var, Var>, Vec<Option<usize>>) {
    let mut rho = trio.rho.clone();
    for c in cuts.iter().filter(|c| c.j >= c.i + 2) {
        rho = condense(&rho, c.atom, c.i, c.j).expect("cut on a refinement path");
    }
    let by_atom: BTreeMap<usize, &Cut> = cuts.iter().filter(|c| c.j > c.i).map(|c| (c.atom, c)).collect();
    let old = &trio.rho;
    let mut f = BTreeMap::new();
    let mut new_tags = vec![None; rho.result.atoms.len()];
    for a in 0..rho.per_atom.len() {
        let shift = |s: usize| match by_atom.get(&a) {
            Some(c) if s > c.i => s + (c.j - c.i - 1),
            _ => s,
        };
        for (s, v) in rho.paths[a].iter().enumerate() {
            f.insert(v.clone(), trio.map(&old.paths[a][shift(s)]).to_string());
        }
        for (s, &(idx, _)) in rho.path_atoms[a].iter().enumerate() {
            new_tags[idx] = match by_atom.get(&a) {
                Some(c) if s == c.i => c.bag,
                _ => Some(tags[old.path_atoms[a][shift(s)].0]),
            };
        }
    }
    for v in &rho.result.vars {
        if !f.contains_key(v) {
            f.insert(v.clone(), trio.map(v).to_string());
        }
    }
    (rho, f, new_tags)
}

/// Drops variables outside the new approximation, restricts to the tagged
/// subtree, and restores fineness.
fn finish(trio: Trio, mut dec: TreeDecomposition, tags: Vec<usize>) -> (Trio, TaggedTreeDecomposition) {
    for b in &mut dec.bags {
        b.retain(|v| trio.alpha.vars.contains(v));
    }
    let mut ttd = TaggedTreeDecomposition { fine: false, dec, tags }.restrict_to_tags();
    let covered: BTreeSet<&Var> = ttd.dec.bags.iter().flatten().collect();
    let missing: Vec<Var> = trio.alpha.vars.iter().filter(|v| !covered.contains(v)).cloned().collect();
    for v in missing {
        ttd.dec.bags.push(BTreeSet::from([v]));
        ttd.dec.parent.push(Some(0));
    }
    let (dec, tags) = ttd.dec.make_fine_with_tags(&ttd.tags);
    (trio, TaggedTreeDecomposition { fine: dec.is_fine(), dec, tags })
}

fn is_pair_second(path: &[PathElem], p: usize) -> bool {
    p > 0 && path[p - 1].block != path[p].block
}

fn is_pair_first(path: &[PathElem], p: usize) -> bool {
    p + 1 < path.len() && path[p + 1].block != path[p].block
}

/// Condenses atom refinements until every one induces an acyclic path.
/// Each step strictly shortens one induced path and leaves the others as
/// they are or shorter.
pub fn make_locally_acyclic(trio: &Trio, ttd: &TaggedTreeDecomposition) -> (Trio, TaggedTreeDecomposition) {
    let (mut trio, mut ttd) = (trio.clone(), ttd.clone());
    if !ttd.dec.is_fine() {
        let (dec, tags) = ttd.dec.make_fine_with_tags(&ttd.tags);
        ttd = TaggedTreeDecomposition { fine: true, dec, tags };
    }
    loop {
        let step = (0..trio.rho.per_atom.len()).find_map(|a| {
            let path = ttd.refinement_path(&trio, a);
            cyclic_pair(&path).map(|(j, jp)| {
                // widen to a pair-first and a pair-second position so that
                // splicing the path strictly shortens it
                let j = if is_pair_second(&path, j) { j - 1 } else { j };
                let jp = if is_pair_first(&path, jp) { jp + 1 } else { jp };
                debug_assert!(path[j].block < path[jp].block);
                Cut { atom: a, i: path[j].block, j: path[jp].block, bag: Some(path[j].bag) }
            })
        });
        let Some(cut) = step else { break };
        let (rho, f, tags) = apply_cuts(&trio, &ttd.tags, &[cut]);
        let next = Trio::onto_image(rho, f, &trio.alpha.name);
        let tags = tags.into_iter().map(|t| t.expect("bag given")).collect();
        (trio, ttd) = finish(next, ttd.dec, tags);
    }
    (trio, ttd)
}

/// Maximal non-branching paths of the tree: interior bags have degree two,
/// ends do not. Each path is listed once.
pub fn nonbranching_paths(dec: &TreeDecomposition) -> Vec<Vec<usize>> {
    let n = dec.len();
    let adj: Vec<Vec<usize>> = (0..n).map(|b| dec.neighbours(b)).collect();
    let mut out = Vec::new();
    for s in 0..n {
        if adj[s].len() == 2 {
            continue;
        }
        if adj[s].is_empty() {
            out.push(vec![s]);
        }
        for &first in &adj[s] {
            let mut path = vec![s, first];
            while adj[*path.last().expect("nonempty")].len() == 2 {
                let cur = *path.last().expect("nonempty");
                let prev = path[path.len() - 2];
                let next = adj[cur].iter().copied().find(|&x| x != prev).expect("degree two");
                path.push(next);
            }
            if s < *path.last().expect("nonempty") {
                out.push(path);
            }
        }
    }
    out
}

/// Repeatedly replaces the stretch between two non-full, non-atomic bags
/// with equal profiles, at distance at least `2k+1` on a non-branching path
/// of at least `min_len` bags, by a chain of at most `2k+1` bags.
pub fn shorten_nonbranching(
    trio: &Trio,
    ttd: &TaggedTreeDecomposition,
    k: usize,
    min_len: usize,
) -> Result<(Trio, TaggedTreeDecomposition), DecompositionError> {
    if !ttd.dec.is_fine() {
        return Err(DecompositionError::NotFine);
    }
    if !ttd.is_locally_acyclic(trio) {
        return Err(DecompositionError::NotLocallyAcyclic);
    }
    let (mut trio, mut ttd) = (trio.clone(), ttd.clone());
    'outer: loop {
        let profiles = ttd.profiles(&trio);
        for path in nonbranching_paths(&ttd.dec) {
            if path.len() < min_len.max(1) {
                continue;
            }
            let slots: Vec<SlotKind<Vec<BTreeSet<usize>>>> = path
                .iter()
                .map(|&b| {
                    if profiles[b].atomic {
                        SlotKind::Trap
                    } else if ttd.dec.bags[b].len() > k {
                        SlotKind::Avoid
                    } else {
                        SlotKind::Profile(profiles[b].profile())
                    }
                })
                .collect();
            if let Some((i, ip)) = pigeonhole(&slots, 2 * k + 1) {
                (trio, ttd) = shorten_between(&trio, &ttd, &path[i..=ip], &profiles)?;
                continue 'outer;
            }
        }
        break;
    }
    Ok((trio, ttd))
}

/// Pairs the variables of two bags with equal type multisets, keeping
/// shared variables paired with themselves where their types agree.
fn match_types(x: &BTreeMap<Var, BTreeSet<usize>>, y: &BTreeMap<Var, BTreeSet<usize>>) -> Vec<(Var, Var)> {
    let mut pairs = Vec::new();
    let mut used_x = BTreeSet::new();
    let mut used_y = BTreeSet::new();
    for (z, t) in x {
        if y.get(z) == Some(t) {
            pairs.push((z.clone(), z.clone()));
            used_x.insert(z.clone());
            used_y.insert(z.clone());
        }
    }
    for (v, t) in x {
        if used_x.contains(v) {
            continue;
        }
        let w = y.iter().find(|(w, u)| !used_y.contains(*w) && *u == t).map(|(w, _)| w.clone()).expect("equal profiles");
        used_y.insert(w.clone());
        pairs.push((v.clone(), w));
    }
    pairs
}

fn shorten_between(
    trio: &Trio,
    ttd: &TaggedTreeDecomposition,
    chain: &[usize],
    profiles: &[super::tagged::BagProfile],
) -> Result<(Trio, TaggedTreeDecomposition), DecompositionError> {
    let (b, bp) = (chain[0], *chain.last().expect("nonempty chain"));
    let pairs = match_types(&profiles[b].types, &profiles[bp].types);
    // condense every refinement in a shared type between its two leave points
    let mut cuts = Vec::new();
    for (x, _) in &pairs {
        for &a in &profiles[b].types[x] {
            let path = ttd.refinement_path(trio, a);
            let leaves = leave_positions(&path);
            let at = |bag: usize| leaves.iter().find(|&&p| path[p].bag == bag).map(|&p| path[p].block).expect("type member leaves bag");
            let (i, j) = (at(b), at(bp));
            let (i, j) = (i.min(j), i.max(j));
            cuts.push(Cut { atom: a, i, j, bag: None });
        }
    }
    let (rho, f, tags) = apply_cuts(trio, &ttd.tags, &cuts);
    let next = Trio::onto_image(rho, f, &trio.alpha.name);

    // reconnect the two halves through a chain adding y_s and removing x_s
    let xb = &ttd.dec.bags[b];
    let yb = &ttd.dec.bags[bp];
    let z: BTreeSet<&Var> = xb.intersection(yb).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in &pairs {
        if !z.contains(x) && !z.contains(y) {
            xs.push(x.clone());
            ys.push(y.clone());
        }
    }
    let rest_x: Vec<Var> = xb.iter().filter(|v| !z.contains(v) && !xs.contains(v)).cloned().collect();
    let rest_y: Vec<Var> = yb.iter().filter(|v| !z.contains(v) && !ys.contains(v)).cloned().collect();
    xs.extend(rest_x);
    ys.extend(rest_y);
    let mut bags = ttd.dec.bags.clone();
    let mut new_chain = vec![b];
    let mut cur = xb.clone();
    for s in 0..xs.len() {
        cur.insert(ys[s].clone());
        new_chain.push(bags.len());
        bags.push(cur.clone());
        cur.remove(&xs[s]);
        if s + 1 < xs.len() {
            new_chain.push(bags.len());
            bags.push(cur.clone());
        }
    }
    new_chain.push(bp);
    let interior: BTreeSet<usize> = chain[1..chain.len() - 1].iter().copied().collect();
    let mut edges: Vec<(usize, usize)> = (0..ttd.dec.len())
        .filter_map(|c| ttd.dec.parent[c].map(|p| (c, p)))
        .filter(|(c, p)| !interior.contains(c) && !interior.contains(p))
        .collect();
    edges.extend(new_chain.windows(2).map(|w| (w[0], w[1])));
    let root = ttd.dec.root().filter(|r| !interior.contains(r)).unwrap_or(b);
    let (dec, map) = TreeDecomposition::from_undirected(ttd.dec.kind, bags, &edges, root);
    let order: Vec<usize> = new_chain.iter().filter_map(|&c| map[c]).collect();
    let full_order = dec.bfs_order();
    let mut placed = Vec::with_capacity(tags.len());
    for (idx, t) in tags.iter().enumerate() {
        match t.and_then(|t| map[t]) {
            Some(t) => placed.push(t),
            None => {
                let a = &next.rho.result.atoms[idx];
                let (s, d) = (next.map(&a.src), next.map(&a.dst));
                let fits = |&c: &usize| dec.bags[c].contains(s) && dec.bags[c].contains(d);
                let bag = order
                    .iter()
                    .copied()
                    .find(fits)
                    .or_else(|| full_order.iter().copied().find(fits))
                    .ok_or(DecompositionError::NoCoveringBag(idx))?;
                placed.push(bag);
            }
        }
    }
    Ok(finish(next, dec, placed))
}
