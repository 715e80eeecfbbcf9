//! Refinements, condensations and expansions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use super::{collapse_equalities, Atom, C2rpq, QueryError, Var};
use crate::automata::{self, Letter, Nfa, StateId, Word};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SegmentKind {
    /// The whole sublanguage `A[q, q']`.
    Sublanguage,
    /// A single letter of `A[q, q']`.
    SingleLetter(Letter),
}

#[derive(Clone)]
pub struct Segment {
    pub kind: SegmentKind,
    pub lang: Arc<Nfa>,
}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.kind, self.lang.to_regex())
    }
}

/// How one atom is refined: an equality, or a path witnessed by NFA states.
#[derive(Clone, Debug)]
pub enum AtomTrace {
    EqualityCollapse,
    Path { states: Vec<StateId>, segments: Vec<Segment> },
}

impl AtomTrace {
    /// Number of segments; an equality has none.
    pub fn len(&self) -> usize {
        match self {
            AtomTrace::EqualityCollapse => 0,
            AtomTrace::Path { segments, .. } => segments.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Language classes of the segments; `None` for an equality.
    pub fn signature(&self) -> Option<Vec<u32>> {
        match self {
            AtomTrace::EqualityCollapse => None,
            AtomTrace::Path { segments, .. } => Some(segments.iter().map(|s| s.lang.class_id()).collect()),
        }
    }

    pub fn is_all_letters(&self) -> bool {
        match self {
            AtomTrace::EqualityCollapse => true,
            AtomTrace::Path { segments, .. } => segments.iter().all(|s| s.lang.as_single_letter().is_some()),
        }
    }
}

/// A refinement of `base`, keeping the per-atom traces.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub base: C2rpq,
    pub per_atom: Vec<AtomTrace>,
    /// The assembled, equality-collapsed query.
    pub result: C2rpq,
    /// Pre-collapse variable name to `result` variable name.
    pub renaming: BTreeMap<Var, Var>,
    /// Per base atom, the result variables `t0, …, tn` along its path.
    pub paths: Vec<Vec<Var>>,
    /// Per base atom and segment: index in `result.atoms` and whether the
    /// stored atom runs against the path direction.
    pub path_atoms: Vec<Vec<(usize, bool)>>,
}

impl Refinement {
    /// Largest number of segments used for a single atom.
    pub fn length(&self) -> usize {
        self.per_atom.iter().map(AtomTrace::len).max().unwrap_or(0)
    }

    /// For each result atom: (base atom index, segment index).
    pub fn atom_origins(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(usize::MAX, usize::MAX); self.result.atoms.len()];
        for (i, segs) in self.path_atoms.iter().enumerate() {
            for (k, &(idx, _)) in segs.iter().enumerate() {
                out[idx] = (i, k);
            }
        }
        out
    }

    /// Stable signature of the chosen traces (used for deduplication).
    pub fn trace_signature(&self) -> Vec<Option<Vec<u32>>> {
        self.per_atom.iter().map(AtomTrace::signature).collect()
    }
}

fn middle_name(atom: usize, k: usize) -> Var {
    format!("{atom}#{k}")
}

/// Substitutes each base atom by its trace and collapses equalities.
pub(crate) fn assemble(base: &C2rpq, per_atom: Vec<AtomTrace>) -> Refinement {
    let mut atoms = Vec::new();
    let mut eqs = Vec::new();
    let mut raw_paths = Vec::with_capacity(per_atom.len());
    let mut path_atoms = Vec::with_capacity(per_atom.len());
    let mut vars = base.vars.clone();
    for (i, (atom, trace)) in base.atoms.iter().zip(per_atom.iter()).enumerate() {
        match trace {
            AtomTrace::EqualityCollapse => {
                eqs.push((atom.src.clone(), atom.dst.clone()));
                raw_paths.push(vec![atom.src.clone(), atom.dst.clone()]);
                path_atoms.push(Vec::new());
            }
            AtomTrace::Path { segments, .. } => {
                let n = segments.len();
                let names: Vec<Var> = (0..=n)
                    .map(|k| {
                        if k == 0 {
                            atom.src.clone()
                        } else if k == n {
                            atom.dst.clone()
                        } else {
                            middle_name(i, k)
                        }
                    })
                    .collect();
                let mut pa = Vec::with_capacity(n);
                for (k, seg) in segments.iter().enumerate() {
                    let (a, flipped) = Atom::normalized(names[k].clone(), seg.lang.clone(), names[k + 1].clone());
                    pa.push((atoms.len(), flipped));
                    atoms.push(a);
                }
                vars.extend(names.iter().cloned());
                raw_paths.push(names);
                path_atoms.push(pa);
            }
        }
    }
    let pre = C2rpq { name: base.name.clone(), vars, output: base.output.clone(), atoms, equalities: eqs };
    let (result, renaming) = collapse_equalities(&pre);
    let paths = raw_paths
        .into_iter()
        .map(|p| p.into_iter().map(|v| renaming.get(&v).cloned().unwrap_or(v)).collect())
        .collect();
    Refinement { base: base.clone(), per_atom, result, renaming, paths, path_atoms }
}

fn intern_segment(sub: Nfa) -> Arc<Nfa> {
    match sub.as_single_letter() {
        Some(l) => automata::single_letter(&l),
        None => Arc::new(sub.reduced()),
    }
}

/// Sublanguage automata of one atom, shared between traces.
struct SublanguageTable {
    nfa: Arc<Nfa>,
    reach1: Vec<Vec<bool>>,
    table: Vec<Vec<Option<Arc<Nfa>>>>,
}

impl SublanguageTable {
    fn new(nfa: Arc<Nfa>) -> Self {
        let reach1 = nfa.nonempty_reach();
        let n = nfa.num_states();
        let table = (0..n)
            .map(|q| {
                (0..n)
                    .map(|q2| {
                        reach1[q][q2].then(|| {
                            let sub = automata::sublanguage(&nfa, q, q2).expect("states in range");
                            intern_segment(sub)
                        })
                    })
                    .collect()
            })
            .collect();
        SublanguageTable { nfa, reach1, table }
    }

    fn get(&self, q: StateId, q2: StateId) -> Arc<Nfa> {
        match &self.table[q][q2] {
            Some(a) => a.clone(),
            None => Arc::new(automata::sublanguage(&self.nfa, q, q2).expect("states in range")),
        }
    }
}

/// All atom refinements of length at most `m`, in a fixed order: the
/// equality first (when `ε ∈ L`), then by length, state sequence, and
/// segment kinds with sublanguages before letters.
///
/// Segments are only taken between states `q, q'` where some nonempty word
/// leads from `q` to `q'`; a segment whose sublanguage is `∅` or `{ε}` would
/// only restate a shorter refinement.
pub fn enumerate_atom_refinements(atom: &Atom, m: usize) -> impl Iterator<Item = AtomTrace> {
    let table = Arc::new(SublanguageTable::new(atom.lang.clone()));
    AtomRefinementIter::new(table, m)
}

struct AtomRefinementIter {
    table: Arc<SublanguageTable>,
    m: usize,
    n: usize,
    // ok[r][q]: a final state is reachable from q in exactly r nonempty hops
    ok: Vec<Vec<bool>>,
    seq: Vec<StateId>,
    started: bool,
    eq_pending: bool,
    pending: VecDeque<AtomTrace>,
}

impl AtomRefinementIter {
    fn new(table: Arc<SublanguageTable>, m: usize) -> Self {
        let nfa = &table.nfa;
        let ns = nfa.num_states();
        let mut ok = vec![vec![false; ns]; m + 1];
        for &f in nfa.finals() {
            ok[0][f] = true;
        }
        for r in 1..=m {
            for q in 0..ns {
                ok[r][q] = (0..ns).any(|q2| table.reach1[q][q2] && ok[r - 1][q2]);
            }
        }
        let eq_pending = nfa.accepts_epsilon();
        AtomRefinementIter { table, m, n: 1, ok, seq: Vec::new(), started: false, eq_pending, pending: VecDeque::new() }
    }

    fn candidates(&self, pos: usize, prev: Option<StateId>) -> impl Iterator<Item = StateId> + '_ {
        let ns = self.table.nfa.num_states();
        let rem = self.n - pos;
        (0..ns).filter(move |&q| {
            let linked = match prev {
                None => self.table.nfa.initial().contains(&q),
                Some(p) => self.table.reach1[p][q],
            };
            linked && self.ok[rem][q]
        })
    }

    fn first_from(&mut self, pos: usize) -> bool {
        // fill seq[pos..] with the least valid continuation
        self.seq.truncate(pos);
        let mut p = pos;
        while p <= self.n {
            let prev = if p == 0 { None } else { Some(self.seq[p - 1]) };
            let first = self.candidates(p, prev).next();
            match first {
                Some(q) => {
                    self.seq.push(q);
                    p += 1;
                }
                None => return false,
            }
        }
        true
    }

    fn advance(&mut self) -> bool {
        // next state sequence of the current length, lexicographically
        let mut pos = self.seq.len();
        while pos > 0 {
            pos -= 1;
            let cur = self.seq[pos];
            let prev = if pos == 0 { None } else { Some(self.seq[pos - 1]) };
            let next = self.candidates(pos, prev).find(|&q| q > cur);
            if let Some(q) = next {
                self.seq.truncate(pos);
                self.seq.push(q);
                if pos == self.n || self.first_from(pos + 1) {
                    return true;
                }
                // dead end: retry from this position
                pos += 1;
                self.seq.truncate(pos);
                continue;
            }
        }
        false
    }

    fn next_sequence(&mut self) -> bool {
        loop {
            if self.n > self.m {
                return false;
            }
            let found = if !self.started {
                self.started = true;
                self.first_from(0)
            } else {
                self.advance()
            };
            if found {
                return true;
            }
            self.n += 1;
            self.started = false;
        }
    }

    fn expand_kinds(&mut self) {
        let states = self.seq.clone();
        let choices: Vec<Vec<Segment>> = states
            .windows(2)
            .map(|w| {
                let sub = self.table.get(w[0], w[1]);
                // a sublanguage that is already one letter would repeat that letter's segment
                let same = sub.as_single_letter();
                let mut v = vec![Segment { kind: SegmentKind::Sublanguage, lang: sub }];
                for l in self.table.nfa.letters_between(w[0], w[1]) {
                    if same.as_ref() == Some(&l) {
                        continue;
                    }
                    v.push(Segment { lang: automata::single_letter(&l), kind: SegmentKind::SingleLetter(l) });
                }
                v
            })
            .collect();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let segments = idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect();
            self.pending.push_back(AtomTrace::Path { states: states.clone(), segments });
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

impl Iterator for AtomRefinementIter {
    type Item = AtomTrace;

    fn next(&mut self) -> Option<AtomTrace> {
        if self.eq_pending {
            self.eq_pending = false;
            return Some(AtomTrace::EqualityCollapse);
        }
        loop {
            if let Some(t) = self.pending.pop_front() {
                return Some(t);
            }
            if !self.next_sequence() {
                return None;
            }
            self.expand_kinds();
        }
    }
}

/// Cartesian product of per-atom traces, assembled on demand.
///
/// Random access by index makes it easy to split the work across threads.
pub struct RefinementIter {
    base: C2rpq,
    traces: Vec<Vec<AtomTrace>>,
    next: usize,
    total: usize,
}

impl RefinementIter {
    /// Number of refinements (saturating).
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn per_atom_counts(&self) -> Vec<usize> {
        self.traces.iter().map(Vec::len).collect()
    }

    /// The refinement at `index` in enumeration order.
    pub fn get(&self, index: usize) -> Option<Refinement> {
        if index >= self.total {
            return None;
        }
        let mut rem = index;
        let mut choice = vec![0; self.traces.len()];
        for k in (0..self.traces.len()).rev() {
            let len = self.traces[k].len();
            choice[k] = rem % len;
            rem /= len;
        }
        let per_atom = choice.iter().zip(&self.traces).map(|(&c, t)| t[c].clone()).collect();
        Some(assemble(&self.base, per_atom))
    }
}

impl Iterator for RefinementIter {
    type Item = Refinement;

    fn next(&mut self) -> Option<Refinement> {
        let r = self.get(self.next)?;
        self.next += 1;
        Some(r)
    }
}

/// All refinements of `q` of length at most `m`. Equality atoms of `q` are
/// collapsed first.
pub fn enumerate_refinements(q: &C2rpq, m: usize) -> RefinementIter {
    let base = if q.equalities.is_empty() { q.clone() } else { collapse_equalities(q).0 };
    let traces: Vec<Vec<AtomTrace>> = base.atoms.iter().map(|a| enumerate_atom_refinements(a, m).collect()).collect();
    let total = traces.iter().fold(1usize, |acc, t| acc.saturating_mul(t.len()));
    RefinementIter { base, traces, next: 0, total }
}

/// Replaces segments `i+1 ..= j` of the given atom's trace by the single
/// sublanguage `A[q_i, q_j]` and reassembles.
pub fn condense(r: &Refinement, atom: usize, i: usize, j: usize) -> Result<Refinement, QueryError> {
    let limit = r.per_atom.len();
    let trace = r.per_atom.get(atom).ok_or(QueryError::IndexOutOfRange { index: atom, limit })?;
    let AtomTrace::Path { states, segments } = trace else {
        return Err(QueryError::NotAPath(atom));
    };
    let n = segments.len();
    if j > n {
        return Err(QueryError::IndexOutOfRange { index: j, limit: n });
    }
    if j <= i + 1 {
        return Err(QueryError::CondenseTooShort { i, j });
    }
    let lang = &r.base.atoms[atom].lang;
    let sub = automata::sublanguage(lang, states[i], states[j]).map_err(|_| QueryError::NotAPath(atom))?;
    let sub = intern_segment(sub);
    let mut new_states = states[..=i].to_vec();
    new_states.extend_from_slice(&states[j..]);
    let mut new_segments = segments[..i].to_vec();
    new_segments.push(Segment { kind: SegmentKind::Sublanguage, lang: sub });
    new_segments.extend_from_slice(&segments[j..]);
    let mut per_atom = r.per_atom.clone();
    per_atom[atom] = AtomTrace::Path { states: new_states, segments: new_segments };
    Ok(assemble(&r.base, per_atom))
}

/// A CQ obtained by substituting one word per atom.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub query: C2rpq,
    pub words: Vec<Word>,
}

impl Expansion {
    pub fn total_length(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }
}

/// Builds the expansion of `q` for one chosen word per atom.
pub fn expansion_from_words(q: &C2rpq, words: &[Word]) -> C2rpq {
    let mut atoms = Vec::new();
    let mut eqs = Vec::new();
    let mut vars: BTreeSet<Var> = q.vars.clone();
    for (i, (atom, w)) in q.atoms.iter().zip(words).enumerate() {
        if w.is_empty() {
            eqs.push((atom.src.clone(), atom.dst.clone()));
            continue;
        }
        let n = w.len();
        let name = |k: usize| {
            if k == 0 {
                atom.src.clone()
            } else if k == n {
                atom.dst.clone()
            } else {
                middle_name(i, k)
            }
        };
        for (k, l) in w.iter().enumerate() {
            let (s, d) = (name(k), name(k + 1));
            vars.insert(s.clone());
            vars.insert(d.clone());
            atoms.push(Atom::letter(s, l, d));
        }
    }
    let pre = C2rpq { name: q.name.clone(), vars, output: q.output.clone(), atoms, equalities: eqs };
    collapse_equalities(&pre).0
}

/// Expansions with per-atom word length at most `max_len`, shortest total
/// length first.
pub fn enumerate_expansions(q: &C2rpq, max_len: usize) -> ExpansionIter {
    let base = if q.equalities.is_empty() { q.clone() } else { collapse_equalities(q).0 };
    let by_len: Vec<Vec<Vec<Word>>> = base
        .atoms
        .iter()
        .map(|a| {
            let mut v = vec![Vec::new(); max_len + 1];
            for w in a.lang.words_up_to(max_len, None) {
                v[w.len()].push(w);
            }
            v
        })
        .collect();
    let max_total = by_len
        .iter()
        .map(|v| v.iter().rposition(|ws| !ws.is_empty()).unwrap_or(0))
        .sum();
    let empty = by_len.iter().any(|v| v.iter().all(Vec::is_empty));
    ExpansionIter {
        base,
        by_len,
        level: 0,
        max_total,
        exhausted: empty,
        compositions: VecDeque::new(),
        pending: VecDeque::new(),
        level_loaded: false,
    }
}

pub struct ExpansionIter {
    base: C2rpq,
    by_len: Vec<Vec<Vec<Word>>>,
    level: usize,
    max_total: usize,
    exhausted: bool,
    compositions: VecDeque<Vec<usize>>,
    pending: VecDeque<Vec<Word>>,
    level_loaded: bool,
}

impl ExpansionIter {
    /// Total length of the expansions currently being produced.
    pub fn current_level(&self) -> usize {
        self.level
    }

    fn load_level(&mut self) {
        let n = self.by_len.len();
        let mut comps = Vec::new();
        let mut cur = Vec::with_capacity(n);
        fn rec(by_len: &[Vec<Vec<Word>>], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            let k = cur.len();
            if k == by_len.len() {
                if left == 0 {
                    out.push(cur.clone());
                }
                return;
            }
            for l in 0..by_len[k].len().min(left + 1) {
                if by_len[k][l].is_empty() {
                    continue;
                }
                cur.push(l);
                rec(by_len, left - l, cur, out);
                cur.pop();
            }
        }
        rec(&self.by_len, self.level, &mut cur, &mut comps);
        self.compositions = comps.into();
        self.level_loaded = true;
    }

    fn load_composition(&mut self, comp: &[usize]) {
        let lists: Vec<&Vec<Word>> = comp.iter().enumerate().map(|(i, &l)| &self.by_len[i][l]).collect();
        let mut idx = vec![0usize; lists.len()];
        loop {
            self.pending.push_back(idx.iter().zip(&lists).map(|(&i, l)| l[i].clone()).collect());
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

impl Iterator for ExpansionIter {
    type Item = Expansion;

    fn next(&mut self) -> Option<Expansion> {
        if self.exhausted {
            return None;
        }
        loop {
            if let Some(words) = self.pending.pop_front() {
                let query = expansion_from_words(&self.base, &words);
                return Some(Expansion { query, words });
            }
            if !self.level_loaded {
                self.load_level();
            }
            if let Some(c) = self.compositions.pop_front() {
                self.load_composition(&c);
                continue;
            }
            if self.level >= self.max_total {
                self.exhausted = true;
                return None;
            }
            self.level += 1;
            self.level_loaded = false;
        }
    }
}
