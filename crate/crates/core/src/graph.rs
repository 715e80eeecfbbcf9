//! Undirected multigraphs over named vertices.

use std::collections::BTreeMap;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Multigraph {
    pub vertices: Vec<String>,
    /// One entry per edge; self-loops and parallel edges are kept.
    pub edges: Vec<(usize, usize)>,
}

impl Multigraph {
    pub fn new(vertices: Vec<String>) -> Self {
        Multigraph { vertices, edges: Vec::new() }
    }

    /// Builds a graph from named edges, creating vertices on first use.
    pub fn from_edges<'a>(isolated: &[&str], edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = Multigraph::default();
        let mut index = BTreeMap::new();
        let mut id = |g: &mut Multigraph, name: &str| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                g.vertices.push(name.to_string());
                g.vertices.len() - 1
            })
        };
        for v in isolated {
            id(&mut g, v);
        }
        for (a, b) in edges {
            let x = id(&mut g, a);
            let y = id(&mut g, b);
            g.edges.push((x, y));
        }
        g
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    /// Simple adjacency (no loops, no multiplicities).
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for n in &mut adj {
            n.sort_unstable();
            n.dedup();
        }
        adj
    }

    /// Degree with multiplicities, self-loops counted twice.
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().map(|&(a, b)| usize::from(a == v) + usize::from(b == v)).sum()
    }

    /// Connected components as sorted vertex lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.neighbours();
        let mut seen = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for s in 0..self.vertices.len() {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                for &w in &adj[comp[i]] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Subgraph induced on `keep` (in the given order).
    pub fn induced(&self, keep: &[usize]) -> Multigraph {
        let mut map = vec![usize::MAX; self.vertices.len()];
        for (i, &v) in keep.iter().enumerate() {
            map[v] = i;
        }
        Multigraph {
            vertices: keep.iter().map(|&v| self.vertices[v].clone()).collect(),
            edges: self
                .edges
                .iter()
                .filter(|&&(a, b)| map[a] != usize::MAX && map[b] != usize::MAX)
                .map(|&(a, b)| (map[a], map[b]))
                .collect(),
        }
    }
}
