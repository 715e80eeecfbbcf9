//! Rooted tree decompositions over named vertices.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use super::DecompositionError;
use crate::graph::Multigraph;
use crate::query_model::{C2rpq, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecompositionKind {
    Tree,
    /// The tree is a path rooted at one end.
    Path,
}

/// Bags with parent pointers; exactly one bag has no parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub kind: DecompositionKind,
    pub bags: Vec<BTreeSet<Var>>,
    pub parent: Vec<Option<usize>>,
}

impl TreeDecomposition {
    pub fn single_bag(kind: DecompositionKind, vars: impl IntoIterator<Item = Var>) -> Self {
        TreeDecomposition { kind, bags: vec![vars.into_iter().collect()], parent: vec![None] }
    }

    /// A path decomposition from a bag sequence.
    pub fn path(bags: Vec<BTreeSet<Var>>) -> Self {
        let parent = (0..bags.len()).map(|i| i.checked_sub(1)).collect();
        TreeDecomposition { kind: DecompositionKind::Path, bags, parent }
    }

    /// Orients an undirected tree on `bags` away from `root`, then numbers
    /// the bags breadth-first. Bags unreachable from `root` are dropped.
    /// Returns the old-to-new index map.
    pub fn from_undirected(
        kind: DecompositionKind,
        bags: Vec<BTreeSet<Var>>,
        edges: &[(usize, usize)],
        root: usize,
    ) -> (Self, Vec<Option<usize>>) {
        let n = bags.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        // a path is rooted at one of its ends
        let root = if kind == DecompositionKind::Path && adj[root].len() > 1 {
            let mut prev = root;
            let mut cur = adj[root][0];
            while let Some(&next) = adj[cur].iter().find(|&&x| x != prev) {
                prev = cur;
                cur = next;
            }
            cur
        } else {
            root
        };
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        seen[root] = true;
        let mut i = 0;
        while i < order.len() {
            let b = order[i];
            for &c in &adj[b] {
                if !seen[c] {
                    seen[c] = true;
                    parent[c] = Some(b);
                    order.push(c);
                }
            }
            i += 1;
        }
        let td = TreeDecomposition { kind, bags, parent };
        td.restrict_to(&order)
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    /// Largest bag size minus one (0 for no or empty bags).
    pub fn width(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).max().unwrap_or(0).saturating_sub(1)
    }

    pub fn root(&self) -> Option<usize> {
        self.parent.iter().position(Option::is_none)
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.bags.len()];
        for (b, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(b);
            }
        }
        ch
    }

    pub fn neighbours(&self, b: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.parent[b].into_iter().collect();
        n.extend((0..self.bags.len()).filter(|&c| self.parent[c] == Some(b)));
        n
    }

    /// Bags in breadth-first order from the root, children by index.
    pub fn bfs_order(&self) -> Vec<usize> {
        let ch = self.children();
        let mut order = Vec::with_capacity(self.bags.len());
        let mut queue: VecDeque<usize> = self.root().into_iter().collect();
        while let Some(b) = queue.pop_front() {
            order.push(b);
            queue.extend(ch[b].iter().copied());
        }
        order
    }

    fn depth(&self, mut b: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[b] {
            b = p;
            d += 1;
        }
        d
    }

    /// The unique simple path from `a` to `b`, both included.
    pub fn tree_path(&self, a: usize, b: usize) -> Vec<usize> {
        let (mut x, mut y) = (a, b);
        let (mut dx, mut dy) = (self.depth(x), self.depth(y));
        let mut left = vec![];
        let mut right = vec![];
        while dx > dy {
            left.push(x);
            x = self.parent[x].expect("depth");
            dx -= 1;
        }
        while dy > dx {
            right.push(y);
            y = self.parent[y].expect("depth");
            dy -= 1;
        }
        while x != y {
            left.push(x);
            right.push(y);
            x = self.parent[x].expect("common ancestor");
            y = self.parent[y].expect("common ancestor");
        }
        left.push(x);
        left.extend(right.into_iter().rev());
        left
    }

    pub fn check_tree(&self) -> Result<(), DecompositionError> {
        let n = self.bags.len();
        if self.parent.len() != n {
            return Err(DecompositionError::NotATree(": length mismatch".into()));
        }
        if n == 0 {
            return Err(DecompositionError::NotATree(": no bags".into()));
        }
        let roots = self.parent.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return Err(DecompositionError::NotATree(format!(": {roots} roots")));
        }
        for b in 0..n {
            let mut cur = b;
            let mut steps = 0;
            while let Some(p) = self.parent[cur] {
                if p >= n || steps > n {
                    return Err(DecompositionError::NotATree(": bad parent pointer".into()));
                }
                cur = p;
                steps += 1;
            }
        }
        if self.kind == DecompositionKind::Path && self.children().iter().any(|c| c.len() > 1) {
            return Err(DecompositionError::NotATree(": path decomposition branches".into()));
        }
        Ok(())
    }

    /// The three decomposition conditions against a multigraph.
    pub fn validate(&self, g: &Multigraph) -> Result<(), DecompositionError> {
        self.check_tree()?;
        for v in &g.vertices {
            if !self.bags.iter().any(|b| b.contains(v)) {
                return Err(DecompositionError::MissingVertex(v.clone()));
            }
        }
        for &(a, b) in &g.edges {
            let (x, y) = (&g.vertices[a], &g.vertices[b]);
            if !self.bags.iter().any(|bag| bag.contains(x) && bag.contains(y)) {
                return Err(DecompositionError::UncoveredEdge(x.clone(), y.clone()));
            }
        }
        let all: BTreeSet<&Var> = self.bags.iter().flatten().collect();
        for v in all {
            let tops = (0..self.bags.len())
                .filter(|&b| self.bags[b].contains(v))
                .filter(|&b| self.parent[b].map_or(true, |p| !self.bags[p].contains(v)))
                .count();
            if tops != 1 {
                return Err(DecompositionError::Disconnected(v.clone()));
            }
        }
        Ok(())
    }

    pub fn validate_query(&self, q: &C2rpq) -> Result<(), DecompositionError> {
        self.validate(&q.underlying_multigraph())
    }

    /// Every bag differs from its parent by a nonempty set of only
    /// additions or only removals.
    pub fn is_fine(&self) -> bool {
        (0..self.bags.len()).all(|b| match self.parent[b] {
            None => true,
            Some(p) => {
                let (c, q) = (&self.bags[b], &self.bags[p]);
                c != q && (c.is_subset(q) || q.is_subset(c))
            }
        })
    }

    pub fn make_fine(&self) -> TreeDecomposition {
        self.make_fine_with_tags(&[]).0
    }

    /// Merges children equal to their parent, then inserts the intersection
    /// between incomparable neighbours. Tags (bag indices) follow merged
    /// bags; inserted bags carry no tag. Bags are renumbered breadth-first.
    pub fn make_fine_with_tags(&self, tags: &[usize]) -> (TreeDecomposition, Vec<usize>) {
        let mut bags = self.bags.clone();
        let mut parent = self.parent.clone();
        let mut alive = vec![true; bags.len()];
        let mut tags = tags.to_vec();
        loop {
            let merge = (0..bags.len()).find(|&b| alive[b] && parent[b].is_some_and(|p| bags[p] == bags[b]));
            let Some(b) = merge else { break };
            let p = parent[b].expect("non-root");
            for c in 0..bags.len() {
                if alive[c] && parent[c] == Some(b) {
                    parent[c] = Some(p);
                }
            }
            for t in tags.iter_mut() {
                if *t == b {
                    *t = p;
                }
            }
            alive[b] = false;
        }
        let n = bags.len();
        for b in 0..n {
            if !alive[b] {
                continue;
            }
            if let Some(p) = parent[b] {
                let (c, q) = (&bags[b], &bags[p]);
                if !c.is_subset(q) && !q.is_subset(c) {
                    let mid: BTreeSet<Var> = c.intersection(q).cloned().collect();
                    bags.push(mid);
                    parent.push(Some(p));
                    alive.push(true);
                    parent[b] = Some(bags.len() - 1);
                }
            }
        }
        let tmp = TreeDecomposition { kind: self.kind, bags, parent };
        let keep: Vec<usize> = (0..tmp.bags.len()).filter(|&b| alive[b]).collect();
        let (out, map) = tmp.restrict_to(&keep);
        let tags = tags.iter().map(|&t| map[t].expect("tag on live bag")).collect();
        (out, tags)
    }

    /// The smallest connected set of bags containing `terminals`
    /// (the root alone when there are none).
    pub fn steiner(&self, terminals: &BTreeSet<usize>) -> BTreeSet<usize> {
        let n = self.bags.len();
        if terminals.is_empty() {
            return self.root().into_iter().collect();
        }
        let mut alive = vec![true; n];
        let mut deg: Vec<usize> = (0..n).map(|b| self.neighbours(b).len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&b| deg[b] <= 1 && !terminals.contains(&b)).collect();
        while let Some(b) = queue.pop_front() {
            if !alive[b] || terminals.contains(&b) || deg[b] > 1 {
                continue;
            }
            alive[b] = false;
            for nb in self.neighbours(b) {
                if alive[nb] {
                    deg[nb] -= 1;
                    if deg[nb] <= 1 && !terminals.contains(&nb) {
                        queue.push_back(nb);
                    }
                }
            }
        }
        (0..n).filter(|&b| alive[b]).collect()
    }

    /// Keeps a connected set of bags, renumbered breadth-first. Returns the
    /// old-to-new index map.
    pub fn restrict_to(&self, keep: &[usize]) -> (TreeDecomposition, Vec<Option<usize>>) {
        let kept: BTreeSet<usize> = keep.iter().copied().collect();
        // nearest kept ancestor
        let up = |mut b: usize| -> Option<usize> {
            while let Some(p) = self.parent[b] {
                if kept.contains(&p) {
                    return Some(p);
                }
                b = p;
            }
            None
        };
        let new_parent_old: Vec<(usize, Option<usize>)> = kept.iter().map(|&b| (b, up(b))).collect();
        let roots: Vec<usize> = new_parent_old.iter().filter(|(_, p)| p.is_none()).map(|(b, _)| *b).collect();
        let mut children: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &(b, p) in &new_parent_old {
            if let Some(p) = p {
                children.entry(p).or_default().push(b);
            }
        }
        let mut map = vec![None; self.bags.len()];
        let mut order = Vec::new();
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        while let Some(b) = queue.pop_front() {
            map[b] = Some(order.len());
            order.push(b);
            if let Some(cs) = children.get(&b) {
                queue.extend(cs.iter().copied());
            }
        }
        let bags = order.iter().map(|&b| self.bags[b].clone()).collect();
        let mut parent: Vec<Option<usize>> = order.iter().map(|&b| up(b).and_then(|p| map[p])).collect();
        // several roots (disconnected keep set) are chained under the first
        for r in roots.iter().skip(1) {
            parent[map[*r].expect("mapped")] = Some(0);
        }
        (TreeDecomposition { kind: self.kind, bags, parent }, map)
    }

    /// Removes a variable from every bag.
    pub fn remove_var(&mut self, v: &str) {
        for b in &mut self.bags {
            b.remove(v);
        }
    }

    /// Indented text dump: one line per bag with its tagged atoms.
    pub fn dump(&self, tags: Option<&[usize]>) -> String {
        let ch = self.children();
        let mut out = String::new();
        fn rec(td: &TreeDecomposition, ch: &[Vec<usize>], b: usize, depth: usize, tags: Option<&[usize]>, out: &mut String) {
            let vars: Vec<&str> = td.bags[b].iter().map(String::as_str).collect();
            let parent = td.parent[b].map_or("-".to_string(), |p| p.to_string());
            let _ = write!(out, "{}bag {} parent {} {{{}}}", "  ".repeat(depth), b, parent, vars.join(", "));
            if let Some(t) = tags {
                let here: Vec<String> = t.iter().enumerate().filter(|(_, &x)| x == b).map(|(i, _)| i.to_string()).collect();
                if !here.is_empty() {
                    let _ = write!(out, " tags [{}]", here.join(", "));
                }
            }
            out.push('\n');
            for &c in &ch[b] {
                rec(td, ch, c, depth + 1, tags, out);
            }
        }
        if let Some(r) = self.root() {
            rec(self, &ch, r, 0, tags, &mut out);
        }
        out
    }
}
