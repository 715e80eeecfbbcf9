//! Semantic tree-width and path-width for unions of conjunctive two-way
//! regular path queries.
//!
//! Layout:
//! - [`automata`]: regexes, NFAs and regular path reachability
//! - [`query_model`]: C2RPQs, refinements, expansions and contractions
//! - [`graphdb`]: graph databases
//! - [`morphism`]: homomorphisms, isomorphisms and cores
//! - [`decomposition`]: tree/path decompositions and width computation
//! - [`approximation`]: maximal under-approximations of bounded width
//! - [`semantics`]: containment and semantic-width decision
//! - [`evaluation`]: width-aware query evaluation

pub mod approximation;
pub mod automata;
pub mod decomposition;
pub mod evaluation;
pub mod graph;
pub mod graphdb;
pub mod morphism;
pub mod query_model;
pub mod semantics;

pub use approximation::{mua_hom_bounded, Approximation, WidthClass};
pub use automata::{Letter, Nfa, Regex, RegexError};
pub use decomposition::{DecompositionKind, TreeDecomposition, WidthKind};
pub use evaluation::{evaluate_naive, ResultSet};
pub use graph::Multigraph;
pub use graphdb::{GraphDb, GraphDbError};
pub use semantics::{contained_bounded, cq_contained, decide_semantic_width, equivalent_bounded, Verdict, VerdictKind};
pub use query_model::{Atom, C2rpq, QueryError, Uc2rpq, Var};
