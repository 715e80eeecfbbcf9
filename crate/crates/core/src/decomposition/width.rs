//! Exact tree-width and path-width.
//!
//! Both are computed per connected component by dynamic programming over
//! vertex subsets, seeded with a greedy ordering as upper bound so that
//! only subsets that can still beat it are explored. Self-loops and parallel
//! edges do not affect width.

use std::collections::{BTreeSet, HashMap};

use super::tree::{DecompositionKind, TreeDecomposition};
use super::DecompositionError;
use crate::graph::Multigraph;
use crate::query_model::Var;

/// Largest component handled by [`exact_treewidth`].
pub const TREEWIDTH_CAP: usize = 20;
/// Largest component handled by [`exact_pathwidth`].
pub const PATHWIDTH_CAP: usize = 18;

/// Component-local simple graph as adjacency bitmasks.
struct Local {
    names: Vec<Var>,
    adj: Vec<u32>,
}

fn components(g: &Multigraph, cap: usize) -> Result<Vec<Local>, DecompositionError> {
    let nb = g.neighbours();
    let mut out = Vec::new();
    for comp in g.components() {
        if comp.len() > cap {
            return Err(DecompositionError::TooLarge { vertices: comp.len(), cap });
        }
        let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj = comp
            .iter()
            .map(|&v| nb[v].iter().fold(0u32, |m, w| m | (1 << pos[w])))
            .collect();
        out.push(Local { names: comp.iter().map(|&v| g.vertices[v].clone()).collect(), adj });
    }
    Ok(out)
}

impl Local {
    fn n(&self) -> usize {
        self.names.len()
    }

    fn nbr(&self, set: u32) -> u32 {
        let mut m = 0;
        let mut s = set;
        while s != 0 {
            let v = s.trailing_zeros() as usize;
            m |= self.adj[v];
            s &= s - 1;
        }
        m
    }

    /// Vertices outside `s ∪ {v}` reachable from `v` through `s`.
    fn q(&self, s: u32, v: usize) -> u32 {
        let mut r = 1u32 << v;
        loop {
            let next = r | (self.nbr(r) & s);
            if next == r {
                break;
            }
            r = next;
        }
        self.nbr(r) & !s & !(1 << v)
    }

    /// Boundary of a prefix: its vertices with a neighbour outside.
    fn boundary(&self, s: u32) -> u32 {
        let mut b = 0;
        let mut rest = s;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            if self.adj[v] & !s != 0 {
                b |= 1 << v;
            }
            rest &= rest - 1;
        }
        b
    }

    fn greedy_elimination(&self) -> Vec<usize> {
        // min-degree on the fill-in graph
        let n = self.n();
        let mut adj = self.adj.clone();
        let mut alive: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
        let mut order = Vec::with_capacity(n);
        while alive != 0 {
            let mut best = usize::MAX;
            let mut bv = 0;
            let mut s = alive;
            while s != 0 {
                let v = s.trailing_zeros() as usize;
                let d = (adj[v] & alive).count_ones() as usize;
                if d < best {
                    best = d;
                    bv = v;
                }
                s &= s - 1;
            }
            let nb = adj[bv] & alive;
            let mut s = nb;
            while s != 0 {
                let w = s.trailing_zeros() as usize;
                adj[w] |= nb & !(1 << w);
                s &= s - 1;
            }
            alive &= !(1 << bv);
            order.push(bv);
        }
        order
    }

    fn elimination_width(&self, order: &[usize]) -> usize {
        let mut s = 0u32;
        let mut w = 0;
        for &v in order {
            w = w.max(self.q(s, v).count_ones() as usize);
            s |= 1 << v;
        }
        w
    }

    fn separation_width(&self, order: &[usize]) -> usize {
        let mut s = 0u32;
        let mut w = 0;
        for &v in order {
            s |= 1 << v;
            w = w.max(self.boundary(s).count_ones() as usize);
        }
        w
    }

    /// Best ordering under `cost(prefix, v)` with max-aggregation, if one
    /// strictly better than `bound` exists.
    fn search(&self, bound: usize, cost: impl Fn(u32, usize) -> usize) -> Option<Vec<usize>> {
        let n = self.n();
        let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
        let mut layer: HashMap<u32, usize> = HashMap::from([(0, 0)]);
        let mut back: HashMap<u32, (u32, usize)> = HashMap::new();
        for _ in 0..n {
            let mut next: HashMap<u32, usize> = HashMap::new();
            let mut keys: Vec<u32> = layer.keys().copied().collect();
            keys.sort_unstable();
            for s in keys {
                let val = layer[&s];
                let mut rest = full & !s;
                while rest != 0 {
                    let v = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    let c = val.max(cost(s, v));
                    if c >= bound {
                        continue;
                    }
                    let t = s | (1 << v);
                    let better = next.get(&t).map_or(true, |&old| c < old);
                    if better {
                        next.insert(t, c);
                        back.insert(t, (s, v));
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            layer = next;
        }
        let mut order = Vec::with_capacity(n);
        let mut cur = full;
        while cur != 0 {
            let (prev, v) = back[&cur];
            order.push(v);
            cur = prev;
        }
        order.reverse();
        Some(order)
    }
}

/// Tree-width with a witnessing decomposition.
pub fn exact_treewidth(g: &Multigraph) -> Result<(usize, TreeDecomposition), DecompositionError> {
    let comps = components(g, TREEWIDTH_CAP)?;
    let mut bags: Vec<BTreeSet<Var>> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut width = 0;
    let mut prev_root: Option<usize> = None;
    for c in &comps {
        let greedy = c.greedy_elimination();
        let gw = c.elimination_width(&greedy);
        let order = c.search(gw, |s, v| c.q(s, v).count_ones() as usize).unwrap_or(greedy);
        width = width.max(c.elimination_width(&order));
        // bag of v = {v} ∪ Q(prefix, v); parent = bag of the earliest later neighbour
        let base = bags.len();
        let mut pos = vec![0; c.n()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut s = 0u32;
        let mut local_parent = Vec::with_capacity(c.n());
        for &v in &order {
            let q = c.q(s, v);
            let mut bag: BTreeSet<Var> = BTreeSet::from([c.names[v].clone()]);
            let mut rest = q;
            let mut first: Option<usize> = None;
            while rest != 0 {
                let w = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                bag.insert(c.names[w].clone());
                if first.map_or(true, |f| pos[w] < pos[f]) {
                    first = Some(w);
                }
            }
            bags.push(bag);
            local_parent.push(first.map(|w| base + pos[w]));
            s |= 1 << v;
        }
        let root = base + c.n() - 1;
        for (i, p) in local_parent.into_iter().enumerate() {
            parent.push(if base + i == root { prev_root } else { p });
        }
        prev_root = Some(root);
    }
    if bags.is_empty() {
        return Ok((0, TreeDecomposition::single_bag(DecompositionKind::Tree, [])));
    }
    // re-root at the last component's root
    let td = reroot(TreeDecomposition { kind: DecompositionKind::Tree, bags, parent });
    Ok((width, td))
}

/// Makes the unique parentless bag the root and renumbers breadth-first.
fn reroot(td: TreeDecomposition) -> TreeDecomposition {
    let all: Vec<usize> = (0..td.len()).collect();
    td.restrict_to(&all).0
}

/// Path-width with a witnessing path decomposition.
pub fn exact_pathwidth(g: &Multigraph) -> Result<(usize, TreeDecomposition), DecompositionError> {
    let comps = components(g, PATHWIDTH_CAP)?;
    let mut seq: Vec<BTreeSet<Var>> = Vec::new();
    let mut width = 0;
    for c in &comps {
        // visiting order; the boundary after adding v bounds the next bag
        let greedy = c.greedy_elimination();
        let gw = c.separation_width(&greedy);
        let order = c.search(gw, |s, v| c.boundary(s | (1 << v)).count_ones() as usize).unwrap_or(greedy);
        let mut s = 0u32;
        for &v in &order {
            let b = c.boundary(s);
            let mut bag: BTreeSet<Var> = BTreeSet::from([c.names[v].clone()]);
            let mut rest = b;
            while rest != 0 {
                let w = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                bag.insert(c.names[w].clone());
            }
            width = width.max(bag.len() - 1);
            seq.push(bag);
            s |= 1 << v;
        }
    }
    if seq.is_empty() {
        return Ok((0, TreeDecomposition::single_bag(DecompositionKind::Path, [])));
    }
    Ok((width, TreeDecomposition::path(seq)))
}
