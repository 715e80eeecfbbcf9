//! Edge-labelled graph databases.
//!
//! Text format, one item per line:
//!
//! ```text
//! # comment
//! node isolated_node
//! author1 wrote paper1
//! ```
//!
//! Queries always read a database as `G±`: each stored edge `u -a-> v` can
//! also be traversed backwards as `v -a⁻-> u`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::automata::{is_identifier, Letter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphDbError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("database already contains inverse edges")]
    AlreadyExpanded,
}

#[derive(Debug, Default)]
pub struct Adjacency {
    letters: HashMap<Letter, u32>,
    // out[node][letter] -> sorted targets
    out: Vec<Vec<Vec<usize>>>,
}

impl Adjacency {
    pub fn letter_id(&self, l: &Letter) -> Option<u32> {
        self.letters.get(l).copied()
    }

    pub fn targets(&self, node: usize, letter: u32) -> &[usize] {
        &self.out[node][letter as usize]
    }
}

#[derive(Debug, Default)]
pub struct GraphDb {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: Vec<(usize, Letter, usize)>,
    expanded: bool,
    adjacency: OnceLock<Adjacency>,
}

impl Clone for GraphDb {
    fn clone(&self) -> Self {
        GraphDb {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            edges: self.edges.clone(),
            expanded: self.expanded,
            adjacency: OnceLock::new(),
        }
    }
}

impl GraphDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.adjacency = OnceLock::new();
        i
    }

    pub fn add_edge(&mut self, src: &str, label: Letter, dst: &str) {
        let s = self.add_node(src);
        let d = self.add_node(dst);
        if label.inverted {
            self.expanded = true;
        }
        self.edges.push((s, label, d));
        self.adjacency = OnceLock::new();
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, Letter, usize)] {
        &self.edges
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    /// `G±` adjacency indexed by letter id, built on first use.
    pub fn adjacency(&self) -> &Adjacency {
        self.adjacency.get_or_init(|| {
            let mut adj = Adjacency { letters: HashMap::new(), out: vec![Vec::new(); self.nodes.len()] };
            let push = |adj: &mut Adjacency, u: usize, l: Letter, v: usize| {
                let next = adj.letters.len() as u32;
                let id = *adj.letters.entry(l).or_insert(next) as usize;
                let row = &mut adj.out[u];
                if row.len() <= id {
                    row.resize(id + 1, Vec::new());
                }
                row[id].push(v);
            };
            for (u, l, v) in &self.edges {
                push(&mut adj, *u, l.clone(), *v);
                push(&mut adj, *v, l.inverse(), *u);
            }
            let width = adj.letters.len();
            for row in &mut adj.out {
                row.resize(width, Vec::new());
                for ts in row.iter_mut() {
                    ts.sort_unstable();
                    ts.dedup();
                }
            }
            adj
        })
    }

    /// Adds every reversed edge explicitly.
    pub fn expand_inverses(&self) -> Result<GraphDb, GraphDbError> {
        if self.expanded {
            return Err(GraphDbError::AlreadyExpanded);
        }
        let mut g = self.clone();
        for (u, l, v) in &self.edges {
            let (un, vn) = (self.nodes[*u].clone(), self.nodes[*v].clone());
            g.add_edge(&vn, l.inverse(), &un);
        }
        g.expanded = true;
        Ok(g)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut used = vec![false; self.nodes.len()];
        for (u, _, v) in &self.edges {
            used[*u] = true;
            used[*v] = true;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !used[i] {
                let _ = writeln!(out, "node {n}");
            }
        }
        for (u, l, v) in &self.edges {
            let _ = writeln!(out, "{} {} {}", self.nodes[*u], l, self.nodes[*v]);
        }
        out
    }
}

/// Parses the line format; inverse labels are rejected unless `allow_inverse`.
pub fn parse_db(text: &str, allow_inverse: bool) -> Result<GraphDb, GraphDbError> {
    let mut db = GraphDb::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| GraphDbError::Parse { line: no + 1, msg };
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["node", name] => {
                if !is_identifier(name) {
                    return Err(err(format!("bad node name '{name}'")));
                }
                db.add_node(name);
            }
            [src, label, dst] => {
                for n in [src, dst] {
                    if !is_identifier(n) {
                        return Err(err(format!("bad node name '{n}'")));
                    }
                }
                let l = Letter::parse(label).ok_or_else(|| err(format!("bad label '{label}'")))?;
                if l.inverted && !allow_inverse {
                    return Err(err(format!("inverse label '{label}' not allowed in a database")));
                }
                db.add_edge(src, l, dst);
            }
            _ => return Err(err(format!("expected 'src label dst' or 'node name', got '{line}'"))),
        }
    }
    Ok(db)
}

pub fn load_db(text: &str) -> Result<GraphDb, GraphDbError> {
    parse_db(text, false)
}
