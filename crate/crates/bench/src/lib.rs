//! Deterministic workloads for the engine benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpqwidth::graphdb::{load_db, GraphDb};
use rpqwidth::query_model::parse_union;
use rpqwidth::{C2rpq, Uc2rpq};

/// A random database with `nodes` nodes and `edges` edges over {a, b}.
pub fn random_db(nodes: usize, edges: usize, seed: u64) -> GraphDb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for i in 0..nodes {
        text.push_str(&format!("node n{i}\n"));
    }
    for _ in 0..edges {
        let (u, v) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
        let l = if rng.gen_bool(0.5) { "a" } else { "b" };
        text.push_str(&format!("n{u} {l} n{v}\n"));
    }
    load_db(&text).expect("generated database parses")
}

pub fn query(text: &str) -> C2rpq {
    parse_union(text).expect("benchmark query parses").disjuncts.remove(0)
}

pub fn single(q: &C2rpq) -> Uc2rpq {
    Uc2rpq::single(q.clone())
}

/// Width-1 chain, width-2 cycle, and a width-2 query with two outputs.
pub const QUERIES: [(&str, &str); 3] = [
    ("chain", "query P(x, w) := x -[a]-> y, y -[b*]-> z, z -[a.b]-> w ;"),
    ("cycle", "query C(x) := x -[a]-> y, y -[b+]-> z, z -[a|b]-> u, u -[a^-]-> x ;"),
    ("diamond", "query D(x, u) := x -[a]-> y, x -[b]-> z, y -[a*]-> u, z -[b*]-> u, y -[a.b]-> z ;"),
];
