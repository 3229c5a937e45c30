//! Chip-firing (Abelian sandpile) prediction toolkit.
//!
//! Exact terminal-configuration solvers specialized per graph class (trees,
//! paths, cliques, pseudotrees, general graphs with sinks), all
//! cross-validated against a brute-force oracle.

pub mod clique;
pub mod format;
pub mod graph;
pub mod greedy;
pub mod oracle;
pub mod path;
pub mod reduction;
pub mod result;
pub mod store;
pub mod tree;

pub use graph::{Configuration, FiringVector, Graph, GraphError, MergedSinks, SandpileInstance};
pub use result::{SolveResult, Status};
