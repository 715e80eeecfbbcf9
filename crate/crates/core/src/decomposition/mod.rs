//! Tree and path decompositions.
//!
//! - [`width`]: exact tree-width and path-width by subset dynamic programming
//! - [`tree`]: the decomposition type, validation, fineness, restriction
//! - [`tagged`]: tagged decompositions of homomorphisms, induced paths, profiles
//! - [`keylemma`]: the local-acyclicity and path-shortening rewrites

pub mod keylemma;
pub mod tagged;
pub mod tree;
pub mod width;

use thiserror::Error;

use crate::query_model::{contract, C2rpq, ContractionMode, Var};

pub use keylemma::{m0, make_locally_acyclic, pigeonhole, shorten_nonbranching, SlotKind};
pub use tagged::{image, induced_path, tag_atoms, BagProfile, PathElem, TaggedTreeDecomposition, Trio};
pub use tree::{DecompositionKind, TreeDecomposition};
pub use width::{exact_pathwidth, exact_treewidth, PATHWIDTH_CAP, TREEWIDTH_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("component with {vertices} vertices exceeds the exact-width cap of {cap}")]
    TooLarge { vertices: usize, cap: usize },
    #[error("variable '{0}' is in no bag")]
    MissingVertex(Var),
    #[error("no bag contains both '{0}' and '{1}'")]
    UncoveredEdge(Var, Var),
    #[error("bags containing '{0}' are not connected")]
    Disconnected(Var),
    #[error("parent pointers do not form a tree{0}")]
    NotATree(String),
    #[error("atom {0} has no bag containing both endpoint images")]
    NoCoveringBag(usize),
    #[error("decomposition is not fine")]
    NotFine,
    #[error("decomposition is not locally acyclic")]
    NotLocallyAcyclic,
    #[error("atoms do not form a path")]
    NotAPath,
    #[error("variable map is not a strong onto homomorphism")]
    NotAHomomorphism,
}

/// The width measures used by approximation classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WidthKind {
    TreeWidth,
    PathWidth,
    ContractedTreeWidth,
    ContractedPathWidth,
    OneWayContractedTreeWidth,
    OneWayContractedPathWidth,
}

impl WidthKind {
    pub const ALL: [WidthKind; 6] = [
        WidthKind::TreeWidth,
        WidthKind::PathWidth,
        WidthKind::ContractedTreeWidth,
        WidthKind::ContractedPathWidth,
        WidthKind::OneWayContractedTreeWidth,
        WidthKind::OneWayContractedPathWidth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WidthKind::TreeWidth => "tw",
            WidthKind::PathWidth => "pw",
            WidthKind::ContractedTreeWidth => "ctw",
            WidthKind::ContractedPathWidth => "cpw",
            WidthKind::OneWayContractedTreeWidth => "ctw1",
            WidthKind::OneWayContractedPathWidth => "cpw1",
        }
    }

    pub fn parse(s: &str) -> Option<WidthKind> {
        WidthKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_path(self) -> bool {
        matches!(self, WidthKind::PathWidth | WidthKind::ContractedPathWidth | WidthKind::OneWayContractedPathWidth)
    }

    pub fn contraction(self) -> Option<ContractionMode> {
        match self {
            WidthKind::TreeWidth | WidthKind::PathWidth => None,
            WidthKind::ContractedTreeWidth | WidthKind::ContractedPathWidth => Some(ContractionMode::TwoWay),
            WidthKind::OneWayContractedTreeWidth | WidthKind::OneWayContractedPathWidth => Some(ContractionMode::OneWay),
        }
    }

    pub fn is_one_way(self) -> bool {
        self.contraction() == Some(ContractionMode::OneWay)
    }
}

/// Width of `q` under `kind`; contracted kinds measure the full contraction,
/// which never has larger width than any partial one.
pub fn query_width(q: &C2rpq, kind: WidthKind) -> Result<usize, DecompositionError> {
    let target = match kind.contraction() {
        Some(mode) => contract(q, mode),
        None => q.clone(),
    };
    let g = target.underlying_multigraph();
    if kind.is_path() {
        Ok(exact_pathwidth(&g)?.0)
    } else {
        Ok(exact_treewidth(&g)?.0)
    }
}
