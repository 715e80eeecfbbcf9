//! Query evaluation over graph databases.
//!
//! Three engines with identical results:
//! - [`evaluate_naive`]: backtracking over variable assignments
//! - [`evaluate_treewidth`]: per-bag relations, semi-join reduction over the
//!   decomposition tree, then a bottom-up join that carries output bindings
//! - [`evaluate_pathwidth`]: a left-to-right frontier of partial assignments
//!   restricted to the current bag

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::automata::{path_relation, Nfa, PathRelation};
use crate::decomposition::{
    exact_pathwidth, exact_treewidth, tag_atoms, DecompositionError, DecompositionKind, TaggedTreeDecomposition,
};
use crate::graphdb::GraphDb;
use crate::query_model::{collapse_equalities, C2rpq, Uc2rpq, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error("query has equality atoms; collapse them before decomposing")]
    Equalities,
    #[error("{0} tags for {1} atoms")]
    TagCount(usize, usize),
    #[error("atom {0} is tagged in a bag that misses an endpoint")]
    BadTag(usize),
    #[error("expected a path decomposition")]
    NotAPath,
    #[error("bag {bag} would materialize {cells} tuples, above the cap of {cap}")]
    TooLarge { bag: usize, cells: u128, cap: u128 },
}

/// Node tuples, named, in sorted order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ResultSet {
    pub arity: usize,
    pub tuples: BTreeSet<Vec<String>>,
}

impl ResultSet {
    fn from_indices(arity: usize, db: &GraphDb, raw: impl IntoIterator<Item = Vec<usize>>) -> ResultSet {
        let tuples = raw.into_iter().map(|t| t.iter().map(|&i| db.node_name(i).to_string()).collect()).collect();
        ResultSet { arity, tuples }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[&str]) -> bool {
        self.tuples.contains(&tuple.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    /// Tab-separated lines; a Boolean `true` is a single empty line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.tuples {
            out.push_str(&t.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// A path relation with its reverse adjacency.
pub struct Relation {
    pub fwd: PathRelation,
    pred: Vec<Vec<usize>>,
}

impl Relation {
    fn new(fwd: PathRelation, n: usize) -> Relation {
        let mut pred = vec![Vec::new(); n];
        for (u, v) in fwd.pairs() {
            pred[v].push(u);
        }
        Relation { fwd, pred }
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }
}

/// Per-atom path relations on one database, keyed by automaton identity.
pub struct RelationCache<'a> {
    db: &'a GraphDb,
    map: HashMap<usize, (Arc<Nfa>, Arc<Relation>)>,
}

impl<'a> RelationCache<'a> {
    pub fn new(db: &'a GraphDb) -> Self {
        RelationCache { db, map: HashMap::new() }
    }

    pub fn db(&self) -> &'a GraphDb {
        self.db
    }

    pub fn get(&mut self, nfa: &Arc<Nfa>) -> Arc<Relation> {
        let key = Arc::as_ptr(nfa) as usize;
        let db = self.db;
        self.map
            .entry(key)
            .or_insert_with(|| (nfa.clone(), Arc::new(Relation::new(path_relation(nfa, db), db.num_nodes()))))
            .1
            .clone()
    }
}

/// Variables of `q` in a fixed order with its atoms as index triples.
struct Indexed {
    vars: Vec<Var>,
    output: Vec<usize>,
    atoms: Vec<(usize, Arc<Relation>, usize)>,
}

impl Indexed {
    fn new(q: &C2rpq, cache: &mut RelationCache) -> Indexed {
        let mut set: BTreeSet<Var> = q.vars.clone();
        for a in &q.atoms {
            set.insert(a.src.clone());
            set.insert(a.dst.clone());
        }
        set.extend(q.output.iter().cloned());
        let vars: Vec<Var> = set.into_iter().collect();
        let ix = |v: &Var| vars.binary_search(v).expect("collected above");
        let atoms = q.atoms.iter().map(|a| (ix(&a.src), cache.get(&a.lang), ix(&a.dst))).collect();
        let output = q.output.iter().map(ix).collect();
        Indexed { vars, output, atoms }
    }

    fn var_index(&self, v: &str) -> usize {
        self.vars.iter().position(|x| x == v).expect("known variable")
    }
}

/// A variable order where each variable after the first of its component
/// is adjacent to an earlier one, with the atoms to check at each step.
struct Plan {
    order: Vec<usize>,
    // checks[p]: atoms (index into Indexed::atoms) whose later endpoint is order[p]
    checks: Vec<Vec<usize>>,
}

impl Plan {
    fn new(ix: &Indexed, pinned: &[usize]) -> Plan {
        let n = ix.vars.len();
        let mut adj = vec![Vec::new(); n];
        for (i, (s, _, d)) in ix.atoms.iter().enumerate() {
            adj[*s].push(i);
            adj[*d].push(i);
        }
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for &p in pinned {
            if !placed[p] {
                placed[p] = true;
                order.push(p);
            }
        }
        while order.len() < n {
            // most atoms to placed variables, then highest degree, then index
            let next = (0..n)
                .filter(|&v| !placed[v])
                .max_by_key(|&v| {
                    let links = adj[v]
                        .iter()
                        .filter(|&&a| {
                            let (s, _, d) = &ix.atoms[a];
                            let other = if *s == v { *d } else { *s };
                            placed[other]
                        })
                        .count();
                    (links, adj[v].len(), std::cmp::Reverse(v))
                })
                .expect("unplaced variable exists");
            placed[next] = true;
            order.push(next);
        }
        let mut pos = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        let mut checks = vec![Vec::new(); n];
        for (i, (s, _, d)) in ix.atoms.iter().enumerate() {
            checks[pos[*s].max(pos[*d])].push(i);
        }
        Plan { order, checks }
    }
}

/// Backtracking search; `visit` returns `false` to stop. `assignment`
/// entries for pinned variables must be set by the caller.
fn search(
    ix: &Indexed,
    plan: &Plan,
    n_nodes: usize,
    pinned: usize,
    assignment: &mut [usize],
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    fn ok(ix: &Indexed, checks: &[usize], a: &[usize]) -> bool {
        checks.iter().all(|&i| {
            let (s, r, d) = &ix.atoms[i];
            r.fwd.contains(a[*s], a[*d])
        })
    }
    fn rec(
        ix: &Indexed,
        plan: &Plan,
        n_nodes: usize,
        p: usize,
        a: &mut [usize],
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if p == plan.order.len() {
            return visit(a);
        }
        let v = plan.order[p];
        let checks = &plan.checks[p];
        // candidates from the first atom linking v to an earlier variable
        let link = checks.iter().find_map(|&i| {
            let (s, r, d) = &ix.atoms[i];
            if *s == v && *d != v {
                Some(r.predecessors(a[*d]).to_vec())
            } else if *d == v && *s != v {
                Some(r.fwd.successors(a[*s]).to_vec())
            } else {
                None
            }
        });
        let cands: Vec<usize> = link.unwrap_or_else(|| (0..n_nodes).collect());
        for c in cands {
            a[v] = c;
            if ok(ix, checks, a) && !rec(ix, plan, n_nodes, p + 1, a, visit) {
                return false;
            }
        }
        true
    }
    for p in 0..pinned {
        if !ok(ix, &plan.checks[p], assignment) {
            return true;
        }
    }
    rec(ix, plan, n_nodes, pinned, assignment, visit)
}

fn normalized(q: &C2rpq) -> C2rpq {
    if q.equalities.is_empty() {
        q.clone()
    } else {
        collapse_equalities(q).0
    }
}

/// Output tuples (node indices) of one C2RPQ.
pub fn evaluate_c2rpq(q: &C2rpq, cache: &mut RelationCache) -> BTreeSet<Vec<usize>> {
    let q = normalized(q);
    let ix = Indexed::new(&q, cache);
    let n = cache.db().num_nodes();
    let plan = Plan::new(&ix, &ix.output);
    let mut out = BTreeSet::new();
    let mut a = vec![0; ix.vars.len()];
    // enumerate output variables first, then look for one witness each
    let distinct_out: BTreeSet<usize> = ix.output.iter().copied().collect();
    let k = distinct_out.len();
    let outs: Vec<usize> = plan.order[..k].to_vec();
    let mut idx = vec![0usize; k];
    if k > 0 && n == 0 {
        return out;
    }
    loop {
        for (j, &v) in outs.iter().enumerate() {
            a[v] = idx[j];
        }
        let mut found = false;
        search(&ix, &plan, n, k, &mut a, &mut |_| {
            found = true;
            false
        });
        if found {
            out.insert(ix.output.iter().map(|&v| a[v]).collect());
        }
        let mut j = k;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Whether `q` holds with its output variables sent to `tuple`.
pub fn satisfies_at(q: &C2rpq, tuple: &[usize], cache: &mut RelationCache) -> bool {
    let q = normalized(q);
    if tuple.len() != q.output.len() {
        return false;
    }
    let ix = Indexed::new(&q, cache);
    let n = cache.db().num_nodes();
    let mut a = vec![usize::MAX; ix.vars.len()];
    for (&v, &t) in ix.output.iter().zip(tuple) {
        if a[v] != usize::MAX && a[v] != t {
            return false;
        }
        a[v] = t;
    }
    let plan = Plan::new(&ix, &ix.output);
    let pinned = ix.output.iter().collect::<BTreeSet<_>>().len();
    let mut found = false;
    search(&ix, &plan, n, pinned, &mut a, &mut |_| {
        found = true;
        false
    });
    found
}

/// Union of the disjunct evaluations.
pub fn evaluate_naive(q: &Uc2rpq, db: &GraphDb) -> ResultSet {
    let mut cache = RelationCache::new(db);
    let mut raw = BTreeSet::new();
    for d in &q.disjuncts {
        raw.extend(evaluate_c2rpq(d, &mut cache));
    }
    ResultSet::from_indices(q.arity, db, raw)
}

/// Sizes observed by the decomposition-based engines.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EvalStats {
    pub bags: usize,
    pub width: usize,
    /// Largest per-bag relation or frontier.
    pub max_relation: usize,
    /// `|V(G)|^(width+1)`, saturating.
    pub size_bound: u128,
}

fn size_bound(n: usize, width: usize) -> u128 {
    (n as u128).checked_pow(width as u32 + 1).unwrap_or(u128::MAX)
}

fn check_tags(q: &C2rpq, ttd: &TaggedTreeDecomposition) -> Result<(), EvalError> {
    if !q.equalities.is_empty() {
        return Err(EvalError::Equalities);
    }
    ttd.dec.validate_query(q)?;
    if ttd.tags.len() != q.atoms.len() {
        return Err(EvalError::TagCount(ttd.tags.len(), q.atoms.len()));
    }
    for (i, (a, &t)) in q.atoms.iter().zip(&ttd.tags).enumerate() {
        let bag = ttd.dec.bags.get(t).ok_or(EvalError::BadTag(i))?;
        if !bag.contains(&a.src) || !bag.contains(&a.dst) {
            return Err(EvalError::BadTag(i));
        }
    }
    Ok(())
}

/// Default cap on `|V(G)|^|bag|` for [`evaluate_treewidth`].
pub const MATERIALIZATION_CAP: u128 = 20_000_000;

/// A relation over a fixed list of variables.
#[derive(Clone, Debug)]
struct Table {
    vars: Vec<usize>,
    rows: HashSet<Vec<usize>>,
}

impl Table {
    fn positions(&self, of: &[usize]) -> Vec<usize> {
        of.iter().map(|v| self.vars.iter().position(|x| x == v).expect("shared variable")).collect()
    }

    fn shared(&self, other: &Table) -> Vec<usize> {
        self.vars.iter().copied().filter(|v| other.vars.contains(v)).collect()
    }

    /// Keeps the rows of `self` that agree with some row of `other`.
    fn semijoin(&mut self, other: &Table) {
        let shared = self.shared(other);
        let (ps, po) = (self.positions(&shared), other.positions(&shared));
        let keys: HashSet<Vec<usize>> = other.rows.iter().map(|r| po.iter().map(|&i| r[i]).collect()).collect();
        self.rows.retain(|r| keys.contains(&ps.iter().map(|&i| r[i]).collect::<Vec<_>>()));
    }

    /// Natural join projected onto `keep`.
    fn join_project(&self, other: &Table, keep: &[usize]) -> Table {
        let shared = self.shared(other);
        let (ps, po) = (self.positions(&shared), other.positions(&shared));
        let mut index: HashMap<Vec<usize>, Vec<&Vec<usize>>> = HashMap::new();
        for r in &other.rows {
            index.entry(po.iter().map(|&i| r[i]).collect()).or_default().push(r);
        }
        let take: Vec<(bool, usize)> = keep
            .iter()
            .map(|v| match self.vars.iter().position(|x| x == v) {
                Some(i) => (true, i),
                None => (false, other.vars.iter().position(|x| x == v).expect("variable in join")),
            })
            .collect();
        let mut rows = HashSet::new();
        for r in &self.rows {
            let key: Vec<usize> = ps.iter().map(|&i| r[i]).collect();
            for o in index.get(&key).into_iter().flatten() {
                rows.insert(take.iter().map(|&(mine, i)| if mine { r[i] } else { o[i] }).collect());
            }
        }
        Table { vars: keep.to_vec(), rows }
    }
}

/// Evaluation along a tagged tree decomposition of `q`.
///
/// Each bag relation is the set of bag assignments satisfying the atoms
/// tagged there; a bottom-up and a top-down semi-join pass make them
/// globally consistent, and a final bottom-up join carries the output
/// variables of each subtree to the root.
pub fn evaluate_treewidth(
    q: &C2rpq,
    db: &GraphDb,
    ttd: &TaggedTreeDecomposition,
    cap: u128,
) -> Result<(ResultSet, EvalStats), EvalError> {
    check_tags(q, ttd)?;
    let dec = &ttd.dec;
    let mut cache = RelationCache::new(db);
    let ix = Indexed::new(q, &mut cache);
    let n = db.num_nodes();
    let width = dec.width();
    let mut stats = EvalStats { bags: dec.len(), width, max_relation: 0, size_bound: size_bound(n, width) };
    let mut tables: Vec<Table> = Vec::with_capacity(dec.len());
    for (b, bag) in dec.bags.iter().enumerate() {
        let cells = (n as u128).checked_pow(bag.len() as u32).unwrap_or(u128::MAX);
        if cells > cap {
            return Err(EvalError::TooLarge { bag: b, cells, cap });
        }
        let vars: Vec<usize> = bag.iter().map(|v| ix.var_index(v)).collect();
        let tagged: Vec<usize> = (0..q.atoms.len()).filter(|&i| ttd.tags[i] == b).collect();
        let sub = Indexed {
            vars: vars.iter().map(|&v| ix.vars[v].clone()).collect(),
            output: Vec::new(),
            atoms: tagged
                .iter()
                .map(|&i| {
                    let (s, r, d) = &ix.atoms[i];
                    let p = |x: &usize| vars.iter().position(|y| y == x).expect("tag covers endpoints");
                    (p(s), r.clone(), p(d))
                })
                .collect(),
        };
        let plan = Plan::new(&sub, &[]);
        let mut rows = HashSet::new();
        let mut a = vec![0; vars.len()];
        search(&sub, &plan, n, 0, &mut a, &mut |t| {
            rows.insert(t.to_vec());
            true
        });
        assert!(rows.len() as u128 <= stats.size_bound, "bag relation exceeds |V|^(k+1)");
        stats.max_relation = stats.max_relation.max(rows.len());
        tables.push(Table { vars, rows });
    }
    let order = dec.bfs_order();
    for &b in order.iter().rev() {
        if let Some(p) = dec.parent[b] {
            let child = tables[b].clone();
            tables[p].semijoin(&child);
        }
    }
    for &b in &order {
        if let Some(p) = dec.parent[b] {
            let parent = tables[p].clone();
            tables[b].semijoin(&parent);
        }
    }
    // carry output bindings upward
    let outputs: BTreeSet<usize> = ix.output.iter().copied().collect();
    let children = dec.children();
    let mut carried: Vec<Option<Table>> = vec![None; dec.len()];
    for &b in order.iter().rev() {
        let mut acc = tables[b].clone();
        for &c in &children[b] {
            let sub = carried[c].take().expect("children first");
            let mut keep = acc.vars.clone();
            let extra: Vec<usize> = sub.vars.iter().copied().filter(|v| outputs.contains(v) && !keep.contains(v)).collect();
            keep.extend(extra);
            acc = acc.join_project(&sub, &keep);
        }
        let mut keep: Vec<usize> = dec.bags[b].iter().map(|v| ix.var_index(v)).collect();
        let extra: Vec<usize> = acc.vars.iter().copied().filter(|v| outputs.contains(v) && !keep.contains(v)).collect();
        keep.extend(extra);
        let proj = acc.positions(&keep);
        let rows = acc.rows.iter().map(|r| proj.iter().map(|&i| r[i]).collect()).collect();
        carried[b] = Some(Table { vars: keep, rows });
    }
    let root = carried[dec.root().expect("validated tree")].take().expect("root computed");
    let pos = root.positions(&ix.output);
    let raw: BTreeSet<Vec<usize>> = root.rows.iter().map(|r| pos.iter().map(|&i| r[i]).collect()).collect();
    Ok((ResultSet::from_indices(q.output.len(), db, raw), stats))
}

/// Evaluation along a path decomposition, scanning the bags from the root
/// end. The frontier holds every consistent assignment of the current bag
/// together with the values of output variables already left behind.
pub fn evaluate_pathwidth(
    q: &C2rpq,
    db: &GraphDb,
    pd: &TaggedTreeDecomposition,
) -> Result<(ResultSet, EvalStats), EvalError> {
    if pd.dec.kind != DecompositionKind::Path {
        return Err(EvalError::NotAPath);
    }
    check_tags(q, pd)?;
    let dec = &pd.dec;
    let mut cache = RelationCache::new(db);
    let ix = Indexed::new(q, &mut cache);
    let n = db.num_nodes();
    let width = dec.width();
    let mut stats = EvalStats { bags: dec.len(), width, max_relation: 0, size_bound: size_bound(n, width) };
    let outputs: BTreeSet<usize> = ix.output.iter().copied().collect();
    // entries: sorted (variable, node) pairs
    let mut frontier: HashSet<Vec<(usize, usize)>> = HashSet::from([Vec::new()]);
    for b in dec.bfs_order() {
        let bag: BTreeSet<usize> = dec.bags[b].iter().map(|v| ix.var_index(v)).collect();
        let tagged: Vec<usize> = (0..q.atoms.len()).filter(|&i| pd.tags[i] == b).collect();
        let mut next = HashSet::new();
        for entry in &frontier {
            let kept: Vec<(usize, usize)> =
                entry.iter().copied().filter(|(v, _)| bag.contains(v) || outputs.contains(v)).collect();
            let fresh: Vec<usize> = bag.iter().copied().filter(|v| !kept.iter().any(|(w, _)| w == v)).collect();
            let mut vals = vec![usize::MAX; ix.vars.len()];
            for &(v, x) in &kept {
                vals[v] = x;
            }
            extend_frontier(&ix, &tagged, &fresh, 0, n, &mut vals, &kept, &mut next);
        }
        frontier = next;
        stats.max_relation = stats.max_relation.max(frontier.len());
        if frontier.is_empty() {
            break;
        }
    }
    let raw: BTreeSet<Vec<usize>> = frontier
        .iter()
        .map(|e| {
            ix.output
                .iter()
                .map(|v| e.iter().find(|(w, _)| w == v).map(|&(_, x)| x).expect("output variable bound"))
                .collect()
        })
        .collect();
    Ok((ResultSet::from_indices(q.output.len(), db, raw), stats))
}

#[allow(clippy::too_many_arguments)]
fn extend_frontier(
    ix: &Indexed,
    tagged: &[usize],
    fresh: &[usize],
    p: usize,
    n: usize,
    vals: &mut [usize],
    kept: &[(usize, usize)],
    out: &mut HashSet<Vec<(usize, usize)>>,
) {
    let ready = |vals: &[usize]| {
        tagged.iter().all(|&i| {
            let (s, r, d) = &ix.atoms[i];
            vals[*s] == usize::MAX || vals[*d] == usize::MAX || r.fwd.contains(vals[*s], vals[*d])
        })
    };
    if !ready(vals) {
        return;
    }
    if p == fresh.len() {
        let mut e: Vec<(usize, usize)> = kept.to_vec();
        e.extend(fresh.iter().map(|&v| (v, vals[v])));
        e.sort_unstable();
        out.insert(e);
        return;
    }
    let v = fresh[p];
    for x in 0..n {
        vals[v] = x;
        extend_frontier(ix, tagged, fresh, p + 1, n, vals, kept, out);
    }
    vals[v] = usize::MAX;
}

/// An optimal tagged decomposition of `q` (equalities collapsed) of the
/// given kind.
pub fn optimal_decomposition(q: &C2rpq, kind: DecompositionKind) -> Result<(C2rpq, TaggedTreeDecomposition), EvalError> {
    let q = normalized(q);
    let g = q.underlying_multigraph();
    let (_, dec) = match kind {
        DecompositionKind::Tree => exact_treewidth(&g)?,
        DecompositionKind::Path => exact_pathwidth(&g)?,
    };
    let ttd = tag_atoms(&q, &dec, None)?;
    Ok((q, ttd))
}
