//! Proptest strategies for expressions, queries and databases, and a runner
//! with a fixed seed.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::oracles::{Cq, Db, OQuery, Re};

pub const SEED: u64 = 0x5eed_2024;

/// Runs `test` on `cases` inputs drawn from `strategy` with a fixed seed.
/// Returns the number of cases run or the failure message.
pub fn check<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&SEED.to_le_bytes());
    for (i, b) in name.bytes().enumerate() {
        seed[8 + i % 24] ^= b;
    }
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 256, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed));
    runner.run(&strategy, test).map(|_| cases).map_err(|e| format!("{name}: {e}"))
}

pub fn letter(alphabet: &'static [&'static str]) -> impl Strategy<Value = Re> {
    prop::sample::select(alphabet).prop_map(Re::sym)
}

/// Expressions of bounded depth over `alphabet`.
pub fn re(alphabet: &'static [&'static str], depth: u32) -> impl Strategy<Value = Re> {
    letter(alphabet).prop_recursive(depth, 12, 2, |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Re::cat(a, b)),
            2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Re::alt(a, b)),
            2 => inner.prop_map(Re::star),
        ]
    })
}

/// Random automata: `(states, transitions, initial, finals)`.
pub fn nfa(states: usize, alphabet: &'static [&'static str]) -> impl Strategy<Value = (usize, Vec<(usize, String, usize)>, Vec<usize>, Vec<usize>)> {
    (
        prop::collection::vec((0..states, prop::sample::select(alphabet), 0..states), 1..=3 * states),
        prop::collection::btree_set(0..states, 1..=2),
        prop::collection::btree_set(0..states, 1..=2),
    )
        .prop_map(move |(t, i, f)| {
            let t = t.into_iter().map(|(p, l, q)| (p, l.to_string(), q)).collect();
            (states, t, i.into_iter().collect(), f.into_iter().collect())
        })
}

const VARS: [&str; 5] = ["x", "y", "z", "u", "v"];

/// Queries with `1..=max_atoms` atoms over `max_vars` variables; outputs are
/// chosen among the variables that occur.
pub fn query(
    alphabet: &'static [&'static str],
    depth: u32,
    max_atoms: usize,
    max_vars: usize,
    max_outputs: usize,
) -> impl Strategy<Value = OQuery> {
    let vars = &VARS[..max_vars];
    (
        prop::collection::vec((prop::sample::select(vars), re(alphabet, depth), prop::sample::select(vars)), 1..=max_atoms),
        prop::collection::vec(any::<prop::sample::Index>(), 0..=max_outputs),
    )
        .prop_map(|(atoms, outs)| {
            let atoms: Vec<(String, Re, String)> = atoms.into_iter().map(|(x, r, y)| (x.to_string(), r, y.to_string())).collect();
            let mut q = OQuery { output: Vec::new(), atoms };
            let vs = q.vars();
            q.output = outs.iter().map(|i| vs[i.index(vs.len())].clone()).collect();
            q
        })
}

/// Conjunctive queries over letters.
pub fn cq(alphabet: &'static [&'static str], max_atoms: usize, max_vars: usize, max_outputs: usize) -> impl Strategy<Value = Cq> {
    let vars = &VARS[..max_vars];
    (
        prop::collection::vec((prop::sample::select(vars), prop::sample::select(alphabet), prop::sample::select(vars)), 1..=max_atoms),
        prop::collection::vec(any::<prop::sample::Index>(), 0..=max_outputs),
    )
        .prop_map(|(atoms, outs)| {
            let atoms = atoms.into_iter().map(|(x, l, y)| (x.to_string(), l.to_string(), y.to_string())).collect();
            let mut q = Cq { output: Vec::new(), atoms };
            let vs = q.vars();
            q.output = outs.iter().map(|i| vs[i.index(vs.len())].clone()).collect();
            q
        })
}

/// Databases with `1..=max_nodes` nodes over `labels`.
pub fn db(max_nodes: usize, labels: &'static [&'static str]) -> impl Strategy<Value = Db> {
    (1..=max_nodes).prop_flat_map(move |n| {
        prop::collection::vec((0..n, prop::sample::select(labels), 0..n), 0..=2 * n)
            .prop_map(move |e| Db { nodes: n, edges: e.into_iter().map(|(u, l, v)| (u, l.to_string(), v)).collect() })
    })
}

/// Simple graphs on `1..=max_n` vertices.
pub fn graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        prop::collection::vec(any::<bool>(), m).prop_map(move |keep| {
            (n, pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect())
        })
    })
}
