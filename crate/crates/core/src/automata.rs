//! Regular languages over the two-way alphabet `A ∪ A⁻`.
//!
//! Every public [`Nfa`] is ε-free. Regexes are compiled with a Thompson
//! construction, ε-eliminated, trimmed and reduced by forward bisimulation,
//! so `(a.a^-)*` yields the two-state automaton `q0 -a-> q1 -a^-> q0`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;
use thiserror::Error;

use crate::graphdb::GraphDb;

pub type StateId = usize;

/// A letter `a` or its inverse `a⁻`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Letter {
    pub base: String,
    pub inverted: bool,
}

impl Letter {
    pub fn new(base: impl Into<String>) -> Self {
        Letter { base: base.into(), inverted: false }
    }

    pub fn inv(base: impl Into<String>) -> Self {
        Letter { base: base.into(), inverted: true }
    }

    pub fn inverse(&self) -> Letter {
        Letter { base: self.base.clone(), inverted: !self.inverted }
    }

    /// Parses `a` or `a^-`.
    pub fn parse(text: &str) -> Option<Letter> {
        let (base, inverted) = match text.strip_suffix("^-") {
            Some(b) => (b, true),
            None => (text, false),
        };
        if is_identifier(base) {
            Some(Letter { base: base.to_string(), inverted })
        } else {
            None
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "{}^-", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub type Word = Vec<Letter>;

pub fn word_to_string(w: &[Letter]) -> String {
    if w.is_empty() {
        return "<eps>".to_string();
    }
    w.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(".")
}

/// Reverse-and-invert: `(l1 ⋯ ln)⁻ = ln⁻ ⋯ l1⁻`.
pub fn inverse_word(w: &[Letter]) -> Word {
    w.iter().rev().map(Letter::inverse).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegexError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown operator '{op}' at position {pos}")]
    UnknownOperator { pos: usize, op: char },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NfaError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
}

/// An ε-free nondeterministic automaton.
#[derive(Clone)]
pub struct Nfa {
    num_states: usize,
    transitions: Vec<(StateId, Letter, StateId)>,
    out: Vec<Vec<(Letter, StateId)>>,
    initial: BTreeSet<StateId>,
    finals: BTreeSet<StateId>,
    label: Option<String>,
    class: OnceLock<u32>,
    single: OnceLock<Option<Letter>>,
}

impl fmt::Debug for Nfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nfa")
            .field("states", &self.num_states)
            .field("initial", &self.initial)
            .field("finals", &self.finals)
            .field("transitions", &self.transitions)
            .field("label", &self.label)
            .finish()
    }
}

impl Nfa {
    /// Builds an automaton from explicit parts; states are `0..num_states`.
    pub fn new(
        num_states: usize,
        transitions: impl IntoIterator<Item = (StateId, Letter, StateId)>,
        initial: impl IntoIterator<Item = StateId>,
        finals: impl IntoIterator<Item = StateId>,
    ) -> Result<Nfa, NfaError> {
        let mut ts: Vec<_> = transitions.into_iter().collect();
        for (p, _, q) in &ts {
            if *p >= num_states {
                return Err(NfaError::UnknownState(*p));
            }
            if *q >= num_states {
                return Err(NfaError::UnknownState(*q));
            }
        }
        let initial: BTreeSet<_> = initial.into_iter().collect();
        let finals: BTreeSet<_> = finals.into_iter().collect();
        if let Some(&s) = initial.iter().chain(finals.iter()).find(|&&s| s >= num_states) {
            return Err(NfaError::UnknownState(s));
        }
        ts.sort();
        ts.dedup();
        let mut out = vec![Vec::new(); num_states];
        for (p, l, q) in &ts {
            out[*p].push((l.clone(), *q));
        }
        Ok(Nfa {
            num_states,
            transitions: ts,
            out,
            initial,
            finals,
            label: None,
            class: OnceLock::new(),
            single: OnceLock::new(),
        })
    }

    fn from_parts_unchecked(
        num_states: usize,
        transitions: Vec<(StateId, Letter, StateId)>,
        initial: BTreeSet<StateId>,
        finals: BTreeSet<StateId>,
    ) -> Nfa {
        Nfa::new(num_states, transitions, initial, finals).expect("internal automaton is well formed")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Nfa {
        self.label = Some(label.into());
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn transitions(&self) -> &[(StateId, Letter, StateId)] {
        &self.transitions
    }

    pub fn successors(&self, q: StateId) -> &[(Letter, StateId)] {
        &self.out[q]
    }

    pub fn initial(&self) -> &BTreeSet<StateId> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn alphabet(&self) -> BTreeSet<Letter> {
        self.transitions.iter().map(|(_, l, _)| l.clone()).collect()
    }

    pub fn has_inverted_letters(&self) -> bool {
        self.transitions.iter().any(|(_, l, _)| l.inverted)
    }

    fn step(&self, set: &BTreeSet<StateId>, letter: &Letter) -> BTreeSet<StateId> {
        let mut next = BTreeSet::new();
        for &q in set {
            for (l, r) in &self.out[q] {
                if l == letter {
                    next.insert(*r);
                }
            }
        }
        next
    }

    /// Membership by subset simulation.
    pub fn accepts(&self, word: &[Letter]) -> bool {
        let mut cur = self.initial.clone();
        for l in word {
            cur = self.step(&cur, l);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    pub fn accepts_epsilon(&self) -> bool {
        self.initial.iter().any(|q| self.finals.contains(q))
    }

    fn reachable_from(&self, start: impl IntoIterator<Item = StateId>) -> Vec<bool> {
        let mut seen = vec![false; self.num_states];
        let mut queue: VecDeque<StateId> = VecDeque::new();
        for s in start {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(p) = queue.pop_front() {
            for (_, q) in &self.out[p] {
                if !seen[*q] {
                    seen[*q] = true;
                    queue.push_back(*q);
                }
            }
        }
        seen
    }

    fn coreachable(&self) -> Vec<bool> {
        let mut rev = vec![Vec::new(); self.num_states];
        for (p, _, q) in &self.transitions {
            rev[*q].push(*p);
        }
        let mut seen = vec![false; self.num_states];
        let mut queue: VecDeque<StateId> = VecDeque::new();
        for &f in &self.finals {
            seen[f] = true;
            queue.push_back(f);
        }
        while let Some(q) = queue.pop_front() {
            for &p in &rev[q] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    pub fn is_empty(&self) -> bool {
        let r = self.reachable_from(self.initial.iter().copied());
        !self.finals.iter().any(|&f| r[f])
    }

    /// Length of the longest accepted word; `None` when the language is
    /// infinite or empty.
    pub fn longest_word(&self) -> Option<usize> {
        let t = self.trimmed();
        if t.is_empty() {
            return None;
        }
        let co = t.coreachable();
        // useful states only: initial states kept by trimming may be dead
        let n = t.num_states;
        let mut indeg = vec![0usize; n];
        for (p, _, q) in &t.transitions {
            if co[*p] && co[*q] {
                indeg[*q] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<StateId> = (0..n).filter(|&q| co[q] && indeg[q] == 0).collect();
        while let Some(p) = stack.pop() {
            order.push(p);
            for (_, q) in &t.out[p] {
                if co[*q] {
                    indeg[*q] -= 1;
                    if indeg[*q] == 0 {
                        stack.push(*q);
                    }
                }
            }
        }
        if order.len() < (0..n).filter(|&q| co[q]).count() {
            return None;
        }
        let mut best: Vec<Option<usize>> = vec![None; n];
        for &q in &t.initial {
            if co[q] {
                best[q] = Some(0);
            }
        }
        for &p in &order {
            let Some(d) = best[p] else { continue };
            for (_, q) in &t.out[p] {
                if co[*q] {
                    best[*q] = Some(best[*q].map_or(d + 1, |e| e.max(d + 1)));
                }
            }
        }
        t.finals.iter().filter_map(|&f| best[f]).max()
    }

    /// `reach1[q][q2]` iff some nonempty word leads from `q` to `q2`.
    pub fn nonempty_reach(&self) -> Vec<Vec<bool>> {
        (0..self.num_states)
            .map(|q| {
                let starts: Vec<StateId> = self.out[q].iter().map(|(_, r)| *r).collect();
                self.reachable_from(starts)
            })
            .collect()
    }

    /// Letters `l` with `l ∈ A[q, q2]`.
    pub fn letters_between(&self, q: StateId, q2: StateId) -> BTreeSet<Letter> {
        self.out[q].iter().filter(|(_, r)| *r == q2).map(|(l, _)| l.clone()).collect()
    }

    /// Returns `Some(l)` iff the language is exactly `{l}`.
    pub fn as_single_letter(&self) -> Option<Letter> {
        self.single
            .get_or_init(|| {
                if self.accepts_epsilon() {
                    return None;
                }
                let co = self.coreachable();
                let mut one: BTreeSet<StateId> = BTreeSet::new();
                let mut letters = BTreeSet::new();
                for &i in &self.initial {
                    for (l, r) in &self.out[i] {
                        if co[*r] {
                            one.insert(*r);
                            if self.finals.contains(r) {
                                letters.insert(l.clone());
                            }
                        }
                    }
                }
                if letters.len() != 1 {
                    return None;
                }
                let two: Vec<StateId> = one
                    .iter()
                    .flat_map(|&p| self.out[p].iter().map(|(_, r)| *r))
                    .collect();
                let longer = self.reachable_from(two);
                if self.finals.iter().any(|&f| longer[f]) {
                    return None;
                }
                letters.into_iter().next()
            })
            .clone()
    }

    /// All accepted words of length ≤ `max_len`, sorted by (length, lexicographic).
    pub fn words_up_to(&self, max_len: usize, limit: Option<usize>) -> Vec<Word> {
        let co = self.coreachable();
        let alphabet: Vec<Letter> = self.alphabet().into_iter().collect();
        let mut result = Vec::new();
        let start: BTreeSet<StateId> = self.initial.iter().copied().filter(|&q| co[q]).collect();
        let mut level: Vec<(Word, BTreeSet<StateId>)> = vec![(Vec::new(), start)];
        for len in 0..=max_len {
            for (w, set) in &level {
                if set.iter().any(|q| self.finals.contains(q)) {
                    result.push(w.clone());
                    if limit.is_some_and(|lim| result.len() >= lim) {
                        return result;
                    }
                }
            }
            if len == max_len {
                break;
            }
            let mut next = Vec::new();
            for (w, set) in &level {
                for l in &alphabet {
                    let s: BTreeSet<StateId> = self.step(set, l).into_iter().filter(|&q| co[q]).collect();
                    if !s.is_empty() {
                        let mut w2 = w.clone();
                        w2.push(l.clone());
                        next.push((w2, s));
                    }
                }
            }
            level = next;
            if level.is_empty() {
                break;
            }
        }
        result
    }

    /// Canonical exact-language class id; equal ids iff equal languages.
    pub fn class_id(&self) -> u32 {
        *self.class.get_or_init(|| intern_language(self))
    }

    /// Renders the language as a regex in the crate's grammar.
    pub fn to_regex(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if let Some(l) = self.as_single_letter() {
            return l.to_string();
        }
        state_elimination(self).render()
    }

    fn trimmed(&self) -> Nfa {
        let reach = self.reachable_from(self.initial.iter().copied());
        let co = self.coreachable();
        let keep: Vec<bool> = (0..self.num_states)
            .map(|q| (reach[q] && co[q]) || self.initial.contains(&q))
            .collect();
        let mut map = vec![usize::MAX; self.num_states];
        let mut n = 0;
        for q in 0..self.num_states {
            if keep[q] {
                map[q] = n;
                n += 1;
            }
        }
        let ts = self
            .transitions
            .iter()
            .filter(|(p, _, q)| keep[*p] && keep[*q] && reach[*p] && co[*q])
            .map(|(p, l, q)| (map[*p], l.clone(), map[*q]))
            .collect();
        let initial = self.initial.iter().map(|&q| map[q]).collect();
        let finals = self.finals.iter().filter(|&&q| keep[q]).map(|&q| map[q]).collect();
        Nfa::from_parts_unchecked(n, ts, initial, finals)
    }

    /// Quotient by the coarsest forward bisimulation; preserves the language.
    fn bisimulation_reduced(&self) -> Nfa {
        let n = self.num_states;
        let mut block: Vec<usize> = (0..n).map(|q| usize::from(self.finals.contains(&q))).collect();
        let mut count = block.iter().copied().collect::<BTreeSet<_>>().len();
        loop {
            let mut sigs: BTreeMap<(usize, BTreeSet<(Letter, usize)>), usize> = BTreeMap::new();
            let mut next = vec![0; n];
            for q in 0..n {
                let sig: BTreeSet<(Letter, usize)> =
                    self.out[q].iter().map(|(l, r)| (l.clone(), block[*r])).collect();
                let key = (block[q], sig);
                let len = sigs.len();
                next[q] = *sigs.entry(key).or_insert(len);
            }
            let new_count = sigs.len();
            block = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let ts = self.transitions.iter().map(|(p, l, q)| (block[*p], l.clone(), block[*q])).collect();
        let initial = self.initial.iter().map(|&q| block[q]).collect();
        let finals = self.finals.iter().map(|&q| block[q]).collect();
        Nfa::from_parts_unchecked(count, ts, initial, finals)
    }

    /// Renumbers states in BFS order from the initial states.
    fn canonically_numbered(&self) -> Nfa {
        let mut map = vec![usize::MAX; self.num_states];
        let mut order = Vec::new();
        let mut queue: VecDeque<StateId> = VecDeque::new();
        for &i in &self.initial {
            if map[i] == usize::MAX {
                map[i] = order.len();
                order.push(i);
                queue.push_back(i);
            }
        }
        while let Some(p) = queue.pop_front() {
            for (_, q) in &self.out[p] {
                if map[*q] == usize::MAX {
                    map[*q] = order.len();
                    order.push(*q);
                    queue.push_back(*q);
                }
            }
        }
        for q in 0..self.num_states {
            if map[q] == usize::MAX {
                map[q] = order.len();
                order.push(q);
            }
        }
        let ts = self.transitions.iter().map(|(p, l, q)| (map[*p], l.clone(), map[*q])).collect();
        let initial = self.initial.iter().map(|&q| map[q]).collect();
        let finals = self.finals.iter().map(|&q| map[q]).collect();
        Nfa::from_parts_unchecked(self.num_states, ts, initial, finals)
    }

    /// Trim, bisimulation quotient, canonical numbering. Keeps the label.
    pub fn reduced(&self) -> Nfa {
        let mut r = self.trimmed().bisimulation_reduced().canonically_numbered();
        r.label = self.label.clone();
        r
    }
}

/// The automaton `A[q, q2]`: same transitions, initial `{q}`, final `{q2}`.
pub fn sublanguage(nfa: &Nfa, q: StateId, q2: StateId) -> Result<Nfa, NfaError> {
    for s in [q, q2] {
        if s >= nfa.num_states {
            return Err(NfaError::UnknownState(s));
        }
    }
    Ok(Nfa::from_parts_unchecked(
        nfa.num_states,
        nfa.transitions.clone(),
        BTreeSet::from([q]),
        BTreeSet::from([q2]),
    ))
}

/// The automaton for `L⁻`.
pub fn inverse_language(nfa: &Nfa) -> Nfa {
    let ts = nfa.transitions.iter().map(|(p, l, q)| (*q, l.inverse(), *p)).collect();
    let mut r = Nfa::from_parts_unchecked(nfa.num_states, ts, nfa.finals.clone(), nfa.initial.clone());
    if let Some(l) = &nfa.label {
        r.label = Some(format!("({l})^-"));
    }
    r
}

/// The automaton for `L1 · L2`, reduced.
pub fn concat(a: &Nfa, b: &Nfa) -> Nfa {
    let off = a.num_states;
    let mut ts: Vec<(StateId, Letter, StateId)> = a.transitions.clone();
    ts.extend(b.transitions.iter().map(|(p, l, q)| (p + off, l.clone(), q + off)));
    for (p, l, q) in &a.transitions {
        if a.finals.contains(q) {
            for &i in &b.initial {
                ts.push((*p, l.clone(), i + off));
            }
        }
    }
    let mut initial: BTreeSet<StateId> = a.initial.clone();
    if a.accepts_epsilon() {
        initial.extend(b.initial.iter().map(|&i| i + off));
    }
    let mut finals: BTreeSet<StateId> = b.finals.iter().map(|&f| f + off).collect();
    if b.accepts_epsilon() {
        finals.extend(a.finals.iter().copied());
    }
    let label = format!("({}).({})", a.to_regex(), b.to_regex());
    Nfa::from_parts_unchecked(off + b.num_states, ts, initial, finals).reduced().with_label(label)
}

/// The shared canonical two-state automaton for `{l}`.
pub fn single_letter(l: &Letter) -> Arc<Nfa> {
    static TABLE: OnceLock<Mutex<HashMap<Letter, Arc<Nfa>>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = table.lock().expect("letter table poisoned");
    guard
        .entry(l.clone())
        .or_insert_with(|| {
            Arc::new(
                Nfa::from_parts_unchecked(2, vec![(0, l.clone(), 1)], BTreeSet::from([0]), BTreeSet::from([1]))
                    .with_label(l.to_string()),
            )
        })
        .clone()
}

/// Exact language equivalence by exploring pairs of reachable subsets.
pub fn equivalent(a: &Nfa, b: &Nfa) -> bool {
    let mut alphabet = a.alphabet();
    alphabet.extend(b.alphabet());
    let start = (a.initial.clone(), b.initial.clone());
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some((s, t)) = queue.pop_front() {
        let fa = s.iter().any(|q| a.finals.contains(q));
        let fb = t.iter().any(|q| b.finals.contains(q));
        if fa != fb {
            return false;
        }
        for l in &alphabet {
            let s2 = a.step(&s, l);
            let t2 = b.step(&t, l);
            if s2.is_empty() && t2.is_empty() {
                continue;
            }
            let key = (s2, t2);
            if seen.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    true
}

/// Language equality: pointer identity first, then the exact class id.
pub fn same_language(a: &Arc<Nfa>, b: &Arc<Nfa>) -> bool {
    Arc::ptr_eq(a, b) || a.class_id() == b.class_id()
}

/// Word-sampled comparison up to `max_len` over the union alphabet.
pub fn sampled_equal(a: &Nfa, b: &Nfa, max_len: usize) -> bool {
    a.words_up_to(max_len, None) == b.words_up_to(max_len, None)
}

fn intern_language(nfa: &Nfa) -> u32 {
    struct Interner {
        reps: Vec<Nfa>,
        buckets: HashMap<u64, Vec<u32>>,
    }
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    let sample = nfa.words_up_to(3, Some(256));
    let mut h = std::collections::hash_map::DefaultHasher::new();
    sample.hash(&mut h);
    let key = h.finish();
    let lock = INTERNER.get_or_init(|| Mutex::new(Interner { reps: Vec::new(), buckets: HashMap::new() }));
    let mut guard = lock.lock().expect("language interner poisoned");
    let inner = &mut *guard;
    let bucket = inner.buckets.entry(key).or_default();
    for &id in bucket.iter() {
        if equivalent(&inner.reps[id as usize], nfa) {
            return id;
        }
    }
    let id = inner.reps.len() as u32;
    let mut rep = nfa.clone();
    rep.class = OnceLock::new();
    inner.reps.push(rep);
    bucket.push(id);
    id
}

// ---------------------------------------------------------------------------
// Regex syntax

/// Regex syntax tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regex {
    Empty,
    Eps,
    Letter(Letter),
    Concat(Vec<Regex>),
    Union(Vec<Regex>),
    Star(Box<Regex>),
    Plus(Box<Regex>),
}

impl Regex {
    fn concat(a: Regex, b: Regex) -> Regex {
        match (a, b) {
            (Regex::Empty, _) | (_, Regex::Empty) => Regex::Empty,
            (Regex::Eps, x) | (x, Regex::Eps) => x,
            (Regex::Concat(mut xs), Regex::Concat(ys)) => {
                xs.extend(ys);
                Regex::Concat(xs)
            }
            (Regex::Concat(mut xs), y) => {
                xs.push(y);
                Regex::Concat(xs)
            }
            (x, Regex::Concat(mut ys)) => {
                ys.insert(0, x);
                Regex::Concat(ys)
            }
            (x, y) => Regex::Concat(vec![x, y]),
        }
    }

    fn union(a: Regex, b: Regex) -> Regex {
        match (a, b) {
            (Regex::Empty, x) | (x, Regex::Empty) => x,
            (x, y) if x == y => x,
            (Regex::Union(mut xs), Regex::Union(ys)) => {
                for y in ys {
                    if !xs.contains(&y) {
                        xs.push(y);
                    }
                }
                Regex::Union(xs)
            }
            (Regex::Union(mut xs), y) | (y, Regex::Union(mut xs)) => {
                if !xs.contains(&y) {
                    xs.push(y);
                }
                Regex::Union(xs)
            }
            (x, y) => Regex::Union(vec![x, y]),
        }
    }

    fn star(a: Regex) -> Regex {
        match a {
            Regex::Empty | Regex::Eps => Regex::Eps,
            Regex::Star(x) | Regex::Plus(x) => Regex::Star(x),
            x => Regex::Star(Box::new(x)),
        }
    }

    /// Pushes an inverse through the tree: `(r1 r2)⁻ = r2⁻ r1⁻`.
    pub fn inverse(self) -> Regex {
        match self {
            Regex::Empty | Regex::Eps => self,
            Regex::Letter(l) => Regex::Letter(l.inverse()),
            Regex::Concat(xs) => Regex::Concat(xs.into_iter().rev().map(Regex::inverse).collect()),
            Regex::Union(xs) => Regex::Union(xs.into_iter().map(Regex::inverse).collect()),
            Regex::Star(x) => Regex::Star(Box::new(x.inverse())),
            Regex::Plus(x) => Regex::Plus(Box::new(x.inverse())),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Regex::Union(_) => 0,
            Regex::Concat(_) => 1,
            _ => 2,
        }
    }

    pub fn render(&self) -> String {
        fn wrap(r: &Regex, min: u8) -> String {
            if r.prec() < min {
                format!("({})", r.render())
            } else {
                r.render()
            }
        }
        match self {
            Regex::Empty => "<empty>".to_string(),
            Regex::Eps => "<eps>".to_string(),
            Regex::Letter(l) => l.to_string(),
            Regex::Concat(xs) => xs.iter().map(|x| wrap(x, 2)).collect::<Vec<_>>().join("."),
            Regex::Union(xs) => xs.iter().map(|x| wrap(x, 1)).collect::<Vec<_>>().join("|"),
            Regex::Star(x) => format!("{}*", wrap(x, 3)),
            Regex::Plus(x) => format!("{}+", wrap(x, 3)),
        }
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or(self.text.len())
    }

    fn err(&self, msg: &str) -> RegexError {
        RegexError::Syntax { pos: self.offset(), msg: msg.to_string() }
    }

    fn union(&mut self) -> Result<Regex, RegexError> {
        let mut parts = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            parts.push(self.concat()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Regex::Union(parts) })
    }

    fn starts_atom(c: char) -> bool {
        c.is_ascii_alphanumeric() || c == '_' || c == '(' || c == '<'
    }

    fn concat(&mut self) -> Result<Regex, RegexError> {
        let mut parts = vec![self.postfix()?];
        loop {
            match self.peek() {
                Some('.') => {
                    self.pos += 1;
                    parts.push(self.postfix()?);
                }
                Some(c) if Self::starts_atom(c) => parts.push(self.postfix()?),
                _ => break,
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Regex::Concat(parts) })
    }

    fn postfix(&mut self) -> Result<Regex, RegexError> {
        let mut r = self.atom()?;
        loop {
            // postfix operators bind tightly: no whitespace skipping needed, but allow it
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    r = Regex::Star(Box::new(r));
                }
                Some('+') => {
                    self.pos += 1;
                    r = Regex::Plus(Box::new(r));
                }
                Some('^') => {
                    if self.chars.get(self.pos + 1).map(|c| c.1) == Some('-') {
                        self.pos += 2;
                        r = r.inverse();
                    } else {
                        return Err(self.err("expected '-' after '^'"));
                    }
                }
                _ => break,
            }
        }
        Ok(r)
    }

    fn atom(&mut self) -> Result<Regex, RegexError> {
        match self.peek() {
            None => Err(self.err("unexpected end of regex")),
            Some('(') => {
                self.pos += 1;
                let r = self.union()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(r)
            }
            Some('<') => {
                let rest: String = self.chars[self.pos..].iter().take(5).map(|c| c.1).collect();
                let long: String = self.chars[self.pos..].iter().take(7).map(|c| c.1).collect();
                if rest == "<eps>" {
                    self.pos += 5;
                    Ok(Regex::Eps)
                } else if long == "<empty>" {
                    self.pos += 7;
                    Ok(Regex::Empty)
                } else {
                    Err(self.err("expected '<eps>' or '<empty>'"))
                }
            }
            Some(c) if c.is_ascii_alphanumeric() || c == '_' => {
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].1.is_ascii_alphanumeric() || self.chars[self.pos].1 == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                Ok(Regex::Letter(Letter::new(name)))
            }
            Some(c) if matches!(c, ')' | '|' | '.' | '*' | '+' | '^') => {
                Err(self.err(&format!("unexpected '{c}'")))
            }
            Some(c) => Err(RegexError::UnknownOperator { pos: self.offset(), op: c }),
        }
    }
}

/// Parses the crate's regex grammar into a syntax tree.
pub fn parse_regex_ast(text: &str) -> Result<Regex, RegexError> {
    let mut p = Parser { chars: text.char_indices().collect(), pos: 0, text };
    let r = p.union()?;
    match p.peek() {
        None => Ok(r),
        Some(c) if matches!(c, ')' | '|' | '.' | '*' | '+' | '^') => Err(p.err(&format!("unexpected '{c}'"))),
        Some(c) => Err(RegexError::UnknownOperator { pos: p.offset(), op: c }),
    }
}

/// Compiles a regex to a reduced ε-free automaton with one initial state.
pub fn parse_regex(text: &str) -> Result<Nfa, RegexError> {
    let ast = parse_regex_ast(text)?;
    Ok(compile(&ast).with_label(text.trim().to_string()))
}

/// Thompson construction followed by ε-elimination and reduction.
pub fn compile(ast: &Regex) -> Nfa {
    let mut t = Thompson { eps: Vec::new(), letters: Vec::new() };
    let (s, a) = t.build(ast);
    t.eliminate(s, a).reduced()
}

struct Thompson {
    eps: Vec<Vec<usize>>,
    letters: Vec<Vec<(Letter, usize)>>,
}

impl Thompson {
    fn fresh(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.letters.push(Vec::new());
        self.eps.len() - 1
    }

    fn build(&mut self, r: &Regex) -> (usize, usize) {
        let s = self.fresh();
        let a = self.fresh();
        match r {
            Regex::Empty => {}
            Regex::Eps => self.eps[s].push(a),
            Regex::Letter(l) => self.letters[s].push((l.clone(), a)),
            Regex::Concat(xs) => {
                let mut cur = s;
                for x in xs {
                    let (xs_, xa) = self.build(x);
                    self.eps[cur].push(xs_);
                    cur = xa;
                }
                self.eps[cur].push(a);
            }
            Regex::Union(xs) => {
                for x in xs {
                    let (xs_, xa) = self.build(x);
                    self.eps[s].push(xs_);
                    self.eps[xa].push(a);
                }
            }
            Regex::Star(x) | Regex::Plus(x) => {
                let (xs_, xa) = self.build(x);
                self.eps[s].push(xs_);
                self.eps[xa].push(xs_);
                self.eps[xa].push(a);
                if matches!(r, Regex::Star(_)) {
                    self.eps[s].push(a);
                }
            }
        }
        (s, a)
    }

    fn closure(&self, p: usize) -> Vec<usize> {
        let mut seen = vec![false; self.eps.len()];
        let mut stack = vec![p];
        seen[p] = true;
        let mut out = Vec::new();
        while let Some(q) = stack.pop() {
            out.push(q);
            for &r in &self.eps[q] {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        out
    }

    fn eliminate(&self, start: usize, accept: usize) -> Nfa {
        let mut keep = vec![start];
        let mut is_target = vec![false; self.eps.len()];
        for ls in &self.letters {
            for (_, r) in ls {
                is_target[*r] = true;
            }
        }
        keep.extend((0..self.eps.len()).filter(|&q| is_target[q] && q != start));
        let mut map = vec![usize::MAX; self.eps.len()];
        for (i, &q) in keep.iter().enumerate() {
            map[q] = i;
        }
        let mut ts = Vec::new();
        let mut finals = BTreeSet::new();
        for &p in &keep {
            for q in self.closure(p) {
                if q == accept {
                    finals.insert(map[p]);
                }
                for (l, r) in &self.letters[q] {
                    ts.push((map[p], l.clone(), map[*r]));
                }
            }
        }
        Nfa::from_parts_unchecked(keep.len(), ts, BTreeSet::from([0]), finals)
    }
}

/// Brzozowski–McCluskey state elimination to a regex.
fn state_elimination(nfa: &Nfa) -> Regex {
    let n = nfa.num_states;
    let s = n;
    let f = n + 1;
    let total = n + 2;
    let mut edge: Vec<Vec<Regex>> = vec![vec![Regex::Empty; total]; total];
    for (p, l, q) in &nfa.transitions {
        let cur = std::mem::replace(&mut edge[*p][*q], Regex::Empty);
        edge[*p][*q] = Regex::union(cur, Regex::Letter(l.clone()));
    }
    for &i in &nfa.initial {
        edge[s][i] = Regex::union(std::mem::replace(&mut edge[s][i], Regex::Empty), Regex::Eps);
    }
    for &q in &nfa.finals {
        edge[q][f] = Regex::union(std::mem::replace(&mut edge[q][f], Regex::Empty), Regex::Eps);
    }
    let mut alive: Vec<bool> = vec![true; total];
    for k in 0..n {
        let loop_r = Regex::star(edge[k][k].clone());
        let ins: Vec<usize> = (0..total).filter(|&i| alive[i] && i != k && edge[i][k] != Regex::Empty).collect();
        let outs: Vec<usize> = (0..total).filter(|&j| alive[j] && j != k && edge[k][j] != Regex::Empty).collect();
        for &i in &ins {
            for &j in &outs {
                let via = Regex::concat(Regex::concat(edge[i][k].clone(), loop_r.clone()), edge[k][j].clone());
                let cur = std::mem::replace(&mut edge[i][j], Regex::Empty);
                edge[i][j] = Regex::union(cur, via);
            }
        }
        alive[k] = false;
        for i in 0..total {
            edge[i][k] = Regex::Empty;
            edge[k][i] = Regex::Empty;
        }
    }
    edge[s][f].clone()
}

// ---------------------------------------------------------------------------
// Regular-path reachability

/// A binary relation on database nodes (by index).
#[derive(Clone, Debug)]
pub struct PathRelation {
    n: usize,
    succ: Vec<Vec<usize>>,
    bits: Vec<u64>,
}

impl PathRelation {
    pub fn contains(&self, u: usize, v: usize) -> bool {
        let i = u * self.n + v;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.succ[u]
    }

    pub fn len(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }
}

/// All `(u, v)` joined by a path in `G±` whose label is in `L(nfa)`.
pub fn path_relation(nfa: &Nfa, db: &GraphDb) -> PathRelation {
    let n = db.num_nodes();
    let q = nfa.num_states();
    let adj = db.adjacency();
    // letter ids of each NFA transition in the database's letter table
    let nfa_out: Vec<Vec<(Option<u32>, StateId)>> = (0..q)
        .map(|p| nfa.successors(p).iter().map(|(l, r)| (adj.letter_id(l), *r)).collect())
        .collect();
    let mut succ = vec![Vec::new(); n];
    let mut bits = vec![0u64; (n * n).div_ceil(64).max(1)];
    let mut seen = vec![false; n * q];
    let mut queue = VecDeque::new();
    for u in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        for &i in nfa.initial() {
            seen[u * q + i] = true;
            queue.push_back((u, i));
        }
        let mut hit = vec![false; n];
        while let Some((v, p)) = queue.pop_front() {
            if nfa.finals().contains(&p) {
                hit[v] = true;
            }
            for (lid, r) in &nfa_out[p] {
                let Some(lid) = lid else { continue };
                for &w in adj.targets(v, *lid) {
                    let key = w * q + r;
                    if !seen[key] {
                        seen[key] = true;
                        queue.push_back((w, *r));
                    }
                }
            }
        }
        for (v, h) in hit.into_iter().enumerate() {
            if h {
                succ[u].push(v);
                let i = u * n + v;
                bits[i / 64] |= 1 << (i % 64);
            }
        }
    }
    PathRelation { n, succ, bits }
}

/// Node-name pairs of [`path_relation`].
pub fn regular_path_pairs(nfa: &Nfa, db: &GraphDb) -> BTreeSet<(String, String)> {
    path_relation(nfa, db)
        .pairs()
        .map(|(u, v)| (db.node_name(u).to_string(), db.node_name(v).to_string()))
        .collect()
}
