//! Brute-force reference implementations. Everything here works on plain
//! strings, tuples and integers; nothing calls into the library.

use std::collections::{BTreeMap, BTreeSet};

/// Regular expressions over tokens such as `a` and `a^-`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Re {
    Eps,
    Sym(String),
    Cat(Box<Re>, Box<Re>),
    Alt(Box<Re>, Box<Re>),
    Star(Box<Re>),
}

impl Re {
    pub fn sym(s: &str) -> Re {
        Re::Sym(s.to_string())
    }

    pub fn cat(a: Re, b: Re) -> Re {
        Re::Cat(Box::new(a), Box::new(b))
    }

    pub fn alt(a: Re, b: Re) -> Re {
        Re::Alt(Box::new(a), Box::new(b))
    }

    pub fn star(a: Re) -> Re {
        Re::Star(Box::new(a))
    }

    /// Fully parenthesized text in the query-file regex syntax.
    pub fn render(&self) -> String {
        match self {
            Re::Eps => "<eps>".into(),
            Re::Sym(s) => s.clone(),
            Re::Cat(a, b) => format!("({}.{})", a.render(), b.render()),
            Re::Alt(a, b) => format!("({}|{})", a.render(), b.render()),
            Re::Star(a) => format!("({})*", a.render()),
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Re::Eps => {}
            Re::Sym(s) => {
                out.insert(s.clone());
            }
            Re::Cat(a, b) | Re::Alt(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Re::Star(a) => a.symbols(out),
        }
    }
}

/// Membership by recursion on the expression and every split of the word.
pub fn matches(re: &Re, w: &[String]) -> bool {
    match re {
        Re::Eps => w.is_empty(),
        Re::Sym(s) => w.len() == 1 && &w[0] == s,
        Re::Alt(a, b) => matches(a, w) || matches(b, w),
        Re::Cat(a, b) => (0..=w.len()).any(|k| matches(a, &w[..k]) && matches(b, &w[k..])),
        Re::Star(a) => w.is_empty() || (1..=w.len()).any(|k| matches(a, &w[..k]) && matches(re, &w[k..])),
    }
}

pub fn invert_token(t: &str) -> String {
    match t.strip_suffix("^-") {
        Some(base) => base.to_string(),
        None => format!("{t}^-"),
    }
}

/// Reverse the word and invert every letter.
pub fn inverse_word(w: &[String]) -> Vec<String> {
    w.iter().rev().map(|t| invert_token(t)).collect()
}

/// The inverse expression, built by the recursive definition.
pub fn inverse_re(re: &Re) -> Re {
    match re {
        Re::Eps => Re::Eps,
        Re::Sym(s) => Re::Sym(invert_token(s)),
        Re::Cat(a, b) => Re::cat(inverse_re(b), inverse_re(a)),
        Re::Alt(a, b) => Re::alt(inverse_re(a), inverse_re(b)),
        Re::Star(a) => Re::star(inverse_re(a)),
    }
}

/// All words over `alphabet` of length at most `max_len`.
pub fn all_words(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for a in alphabet {
                let mut v = w.clone();
                v.push(a.to_string());
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Whether some run of the automaton reads `w` from `from` to `to`.
pub fn has_run(trans: &[(usize, String, usize)], from: usize, to: usize, w: &[String]) -> bool {
    match w.split_first() {
        None => from == to,
        Some((a, rest)) => trans.iter().any(|(p, l, q)| *p == from && l == a && has_run(trans, *q, to, rest)),
    }
}

/// A graph database as node count and labelled edges.
#[derive(Clone, Debug)]
pub struct Db {
    pub nodes: usize,
    pub edges: Vec<(usize, String, usize)>,
}

impl Db {
    pub fn name(i: usize) -> String {
        format!("n{i}")
    }

    /// Text in the database file format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in 0..self.nodes {
            s.push_str(&format!("node {}\n", Db::name(i)));
        }
        for (u, l, v) in &self.edges {
            s.push_str(&format!("{} {} {}\n", Db::name(*u), l, Db::name(*v)));
        }
        s
    }

    fn letter_pairs(&self, tok: &str) -> BTreeSet<(usize, usize)> {
        match tok.strip_suffix("^-") {
            Some(base) => self.edges.iter().filter(|(_, l, _)| l == base).map(|(u, _, v)| (*v, *u)).collect(),
            None => self.edges.iter().filter(|(_, l, _)| l == tok).map(|(u, _, v)| (*u, *v)).collect(),
        }
    }
}

fn compose(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for &(x, y) in a {
        for &(y2, z) in b.range((y, 0)..=(y, usize::MAX)) {
            debug_assert_eq!(y, y2);
            out.insert((x, z));
        }
    }
    out
}

/// Node pairs joined by a walk whose label matches `re`, by relation algebra.
pub fn re_relation(re: &Re, db: &Db) -> BTreeSet<(usize, usize)> {
    match re {
        Re::Eps => (0..db.nodes).map(|v| (v, v)).collect(),
        Re::Sym(s) => db.letter_pairs(s),
        Re::Alt(a, b) => re_relation(a, db).union(&re_relation(b, db)).copied().collect(),
        Re::Cat(a, b) => compose(&re_relation(a, db), &re_relation(b, db)),
        Re::Star(a) => {
            let step = re_relation(a, db);
            let mut acc: BTreeSet<(usize, usize)> = (0..db.nodes).map(|v| (v, v)).collect();
            loop {
                let next: BTreeSet<_> = acc.union(&compose(&acc, &step)).copied().collect();
                if next.len() == acc.len() {
                    return acc;
                }
                acc = next;
            }
        }
    }
}

/// A conjunctive query with expression atoms, as plain data.
#[derive(Clone, Debug)]
pub struct OQuery {
    pub output: Vec<String>,
    pub atoms: Vec<(String, Re, String)>,
}

impl OQuery {
    pub fn vars(&self) -> Vec<String> {
        let mut vs: BTreeSet<String> = self.output.iter().cloned().collect();
        for (x, _, y) in &self.atoms {
            vs.insert(x.clone());
            vs.insert(y.clone());
        }
        vs.into_iter().collect()
    }

    pub fn render(&self, name: &str) -> String {
        let body: Vec<String> = self.atoms.iter().map(|(x, r, y)| format!("{x} -[{}]-> {y}", r.render())).collect();
        format!("query {name}({}) := {} ;", self.output.join(", "), body.join(", "))
    }
}

/// Answers by backtracking over variable assignments, each atom checked
/// against its relation once both ends are bound.
pub fn evaluate(q: &OQuery, db: &Db) -> BTreeSet<Vec<usize>> {
    let vars = q.vars();
    let index: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let rels: Vec<(usize, BTreeSet<(usize, usize)>, usize)> =
        q.atoms.iter().map(|(x, r, y)| (index[x.as_str()], re_relation(r, db), index[y.as_str()])).collect();
    let mut out = BTreeSet::new();
    let mut asg = vec![usize::MAX; vars.len()];
    fn rec(
        i: usize,
        asg: &mut Vec<usize>,
        db: &Db,
        rels: &[(usize, BTreeSet<(usize, usize)>, usize)],
        outs: &[usize],
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if i == asg.len() {
            out.insert(outs.iter().map(|&o| asg[o]).collect());
            return;
        }
        for v in 0..db.nodes {
            asg[i] = v;
            let ok = rels.iter().all(|(x, r, y)| {
                let (a, b) = (asg[*x], asg[*y]);
                *x > i || *y > i || r.contains(&(a, b))
            });
            if ok {
                rec(i + 1, asg, db, rels, outs, out);
            }
        }
        asg[i] = usize::MAX;
    }
    let outs: Vec<usize> = q.output.iter().map(|v| index[v.as_str()]).collect();
    rec(0, &mut asg, db, &rels, &outs, &mut out);
    out
}

/// Named tuples, for comparison with engine output.
pub fn named(tuples: &BTreeSet<Vec<usize>>) -> BTreeSet<Vec<String>> {
    tuples.iter().map(|t| t.iter().map(|&v| Db::name(v)).collect()).collect()
}

/// Set partitions of `0..n` as restricted growth strings, by inserting each
/// element into an existing block or a new one.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(i: usize, n: usize, blocks: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=blocks {
            cur.push(b);
            rec(i + 1, n, blocks.max(b + 1), cur, out);
            cur.pop();
        }
    }
    rec(0, n, 0, &mut Vec::new(), &mut out);
    out
}

/// Bell numbers from the Bell triangle.
pub fn bell(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// A conjunctive query over letters: atoms `(src, token, dst)`.
#[derive(Clone, Debug)]
pub struct Cq {
    pub output: Vec<String>,
    pub atoms: Vec<(String, String, String)>,
}

impl Cq {
    pub fn vars(&self) -> Vec<String> {
        let mut vs: BTreeSet<String> = self.output.iter().cloned().collect();
        for (x, _, y) in &self.atoms {
            vs.insert(x.clone());
            vs.insert(y.clone());
        }
        vs.into_iter().collect()
    }

    /// Atoms with inverse tokens flipped to forward ones.
    fn normal(&self) -> BTreeSet<(String, String, String)> {
        self.atoms
            .iter()
            .map(|(x, l, y)| match l.strip_suffix("^-") {
                Some(b) => (y.clone(), b.to_string(), x.clone()),
                None => (x.clone(), l.clone(), y.clone()),
            })
            .collect()
    }

    pub fn render(&self, name: &str) -> String {
        let body: Vec<String> = self.atoms.iter().map(|(x, l, y)| format!("{x} -[{l}]-> {y}")).collect();
        format!("query {name}({}) := {} ;", self.output.join(", "), body.join(", "))
    }
}

/// Every map from the variables of `src` to those of `dst`, tried in turn.
pub fn hom_exists(src: &Cq, dst: &Cq) -> bool {
    let sv = src.vars();
    let dv = dst.vars();
    if src.output.len() != dst.output.len() {
        return false;
    }
    if dv.is_empty() {
        return sv.is_empty();
    }
    let s_atoms = src.normal();
    let d_atoms = dst.normal();
    let n = sv.len();
    let mut choice = vec![0usize; n];
    loop {
        let map: BTreeMap<&String, &String> = sv.iter().zip(choice.iter().map(|&c| &dv[c])).collect();
        let outs_ok = src.output.iter().zip(&dst.output).all(|(a, b)| map[a] == b);
        if outs_ok && s_atoms.iter().all(|(x, l, y)| d_atoms.contains(&(map[x].clone(), l.clone(), map[y].clone()))) {
            return true;
        }
        let mut k = 0;
        loop {
            if k == n {
                return false;
            }
            choice[k] += 1;
            if choice[k] < dv.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Adjacency bitmasks of a simple graph on `n <= 32` vertices.
pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    let mut adj = vec![0u32; n];
    for &(u, v) in edges {
        if u != v {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
    }
    adj
}

/// Width of the elimination ordering: largest number of later neighbours
/// in the filled graph.
pub fn elimination_width(adj: &[u32], order: &[usize]) -> usize {
    let mut g = adj.to_vec();
    let mut gone = 0u32;
    let mut width = 0;
    for &v in order {
        let nb = g[v] & !gone;
        width = width.max(nb.count_ones() as usize);
        for u in 0..g.len() {
            if nb & (1 << u) != 0 {
                g[u] |= nb & !(1 << u);
            }
        }
        gone |= 1 << v;
    }
    width
}

/// Tree-width as the least elimination width over all orders.
pub fn treewidth_by_elimination(n: usize, edges: &[(usize, usize)], perms: &[Vec<usize>]) -> usize {
    let adj = adjacency(n, edges);
    perms.iter().map(|p| elimination_width(&adj, p)).min().unwrap_or(0)
}

/// Path-width as the vertex separation number: least, over orders, of the
/// largest count of placed vertices with a neighbour not yet placed.
pub fn pathwidth_by_separation(n: usize, edges: &[(usize, usize)], perms: &[Vec<usize>]) -> usize {
    let adj = adjacency(n, edges);
    perms
        .iter()
        .map(|p| {
            let mut placed = 0u32;
            let mut worst = 0;
            for &v in p {
                placed |= 1 << v;
                let sep = (0..n).filter(|&u| placed & (1 << u) != 0 && adj[u] & !placed != 0).count();
                worst = worst.max(sep);
            }
            worst
        })
        .min()
        .unwrap_or(0)
}

/// Union-find over named variables; every class is named by its least member.
pub fn equality_classes(vars: &[&str], eqs: &[(&str, &str)]) -> BTreeMap<String, String> {
    let mut parent: BTreeMap<String, String> = vars.iter().map(|v| (v.to_string(), v.to_string())).collect();
    fn find(p: &mut BTreeMap<String, String>, v: &str) -> String {
        let up = p[v].clone();
        if up == v {
            return up;
        }
        let r = find(p, &up);
        p.insert(v.to_string(), r.clone());
        r
    }
    for (a, b) in eqs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(hi, lo);
        }
    }
    vars.iter().map(|v| (v.to_string(), find(&mut parent, v))).collect()
}

/// Number of atom traces of length at most `m`: state sequences from an
/// initial to a final state, each step joined by a nonempty word, with one
/// sublanguage segment or one letter per step (a letter that repeats a
/// one-letter sublanguage is not counted twice), plus the equality trace
/// when the empty word is accepted. Words are probed up to length
/// `states + 1`, enough to find a shortest word of length at least two.
pub fn trace_count(trans: &[(usize, String, usize)], states: usize, initial: &[usize], finals: &[usize], alphabet: &[&str], m: usize) -> usize {
    let words = all_words(alphabet, states + 1);
    let kinds = |p: usize, q: usize| -> usize {
        let joined: Vec<&Vec<String>> = words.iter().filter(|w| !w.is_empty() && has_run(trans, p, q, w)).collect();
        if joined.is_empty() {
            return 0;
        }
        let letters: BTreeSet<&String> = trans.iter().filter(|(a, _, b)| *a == p && *b == q).map(|(_, l, _)| l).collect();
        let one_letter = joined.len() == 1 && joined[0].len() == 1;
        1 + letters.len() - usize::from(one_letter)
    };
    let table: Vec<Vec<usize>> = (0..states).map(|p| (0..states).map(|q| kinds(p, q)).collect()).collect();
    fn walks(table: &[Vec<usize>], from: usize, left: usize, finals: &[usize]) -> usize {
        if left == 0 {
            return usize::from(finals.contains(&from));
        }
        (0..table.len()).filter(|&q| table[from][q] > 0).map(|q| table[from][q] * walks(table, q, left - 1, finals)).sum()
    }
    let mut count = usize::from(initial.iter().any(|i| finals.contains(i)));
    for n in 1..=m {
        count += initial.iter().map(|&i| walks(&table, i, n, finals)).sum::<usize>();
    }
    count
}

/// Hand-enumerated answers on the eight-node bibliography database.
pub mod biblio {
    use std::collections::BTreeSet;

    fn pairs(items: &[(&str, &str)]) -> BTreeSet<Vec<String>> {
        items.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect()
    }

    /// Co-authors `zp` of `x` (including `x`), then `y` any ancestor of
    /// `zp` along advised edges (including `zp`).
    pub fn gamma2() -> BTreeSet<Vec<String>> {
        pairs(&[
            ("author1", "author1"),
            ("author1", "author2"),
            ("author2", "author1"),
            ("author2", "author2"),
            ("author2", "author3"),
            ("author2", "author4"),
            ("author2", "author5"),
            ("author3", "author2"),
            ("author3", "author3"),
            ("author3", "author4"),
            ("author3", "author5"),
            ("author4", "author4"),
            ("author4", "author5"),
            ("author5", "author4"),
            ("author5", "author5"),
        ])
    }

    /// Co-authorship components {1,2,3} and {4,5}, plus every node with itself.
    pub fn gamma3() -> BTreeSet<Vec<String>> {
        let mut s = BTreeSet::new();
        for comp in [&["author1", "author2", "author3"][..], &["author4", "author5"][..]] {
            for a in comp {
                for b in comp {
                    s.insert(vec![a.to_string(), b.to_string()]);
                }
            }
        }
        for p in ["paper1", "paper2", "paper3"] {
            s.insert(vec![p.to_string(), p.to_string()]);
        }
        s
    }

    pub fn gamma4() -> BTreeSet<Vec<String>> {
        BTreeSet::from([Vec::new()])
    }

    /// Papers of each author and of each author's advisor.
    pub fn gamma5() -> BTreeSet<Vec<String>> {
        pairs(&[
            ("author1", "paper1"),
            ("author2", "paper1"),
            ("author2", "paper2"),
            ("author3", "paper2"),
            ("author4", "paper3"),
            ("author5", "paper3"),
            ("author3", "paper3"),
        ])
    }
}
