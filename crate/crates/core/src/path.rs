//! The provably linear solver for `Path_n`.
//!
//! Shares the bottom-up pass with the tree solver (single-child merges are
//! O(1) handle inheritance) and replaces the top-down pass with a variant
//! that aggregates already-consumed key pairs into one running counter, so
//! every store access touches the minimum-rank node.

use thiserror::Error;

use crate::graph::{Configuration, FiringVector, Graph};
use crate::result::SolveResult;
use crate::tree::{self, NoObserver, RootedTree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("input graph is not Path_n")]
    NotAPath,
}

/// Terminal-or-recurrent verdict for a sink-free `Path_n` (vertices labeled
/// 0..n along the path).
pub fn solve_path(graph: &Graph, sigma: &Configuration) -> Result<SolveResult, PathError> {
    let n = graph.vertex_count();
    if sigma.len() != n || !graph.is_canonical_path() {
        return Err(PathError::NotAPath);
    }
    if n == 1 {
        return Ok(if sigma.chips(0) == 0 {
            SolveResult::terminal(sigma.clone(), FiringVector::zeros(1))
        } else {
            SolveResult::recurrent(FiringVector::zeros(1), 0)
        });
    }
    if sigma.total() > (n as u128) - 2 {
        return Ok(SolveResult::recurrent(FiringVector::zeros(n), 0));
    }
    // Root fixed at vertex 0: every vertex has exactly one child, u + 1.
    let tree = RootedTree::build(graph, 0).expect("canonical path is a tree");
    let mut state = tree::solve_partial(graph, tree, sigma, &mut NoObserver);
    // After the bottom-up pass the one live store sits at the root handle;
    // the whole top-down walk operates on it in place.
    let live = 0usize;
    let mut firings = vec![0i64; n];
    let mut aggregated: i64 = 0;
    for u in 0..n {
        let k = if u == 0 {
            0
        } else {
            aggregated += state.stores.path_query(live, firings[u - 1]);
            firings[u - 1] - aggregated
        };
        let s = state.q_start[u] as usize;
        let e = s + state.q_len[u] as usize;
        aggregated = state.stores.path_revert(
            live,
            state.subtree_firings[u],
            state.inserted[u],
            aggregated,
            &state.q_stack[s..e],
        );
        firings[u] = state.subtree_firings[u] + k;
    }
    assert!(
        state.stores.node_count() <= 2 * n,
        "store arena exceeded its O(n) budget"
    );
    let config = tree::recover_configuration(graph, sigma, &firings);
    Ok(SolveResult::terminal(config, tree::to_firing_vector(&firings)))
}
