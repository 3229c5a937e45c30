//! The O(n log n) tree solver: recurrence gate, bottom-up partial firing,
//! top-down completion, and configuration recovery.
//!
//! Recursion is converted to explicit stacks throughout; path-shaped trees
//! with a million vertices must not overflow the call stack.

use thiserror::Error;

use crate::graph::{Configuration, FiringVector, Graph};
use crate::result::SolveResult;
use crate::store::{delta_sum, NodeId, StoreFamily};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("input graph is not a sink-free tree")]
    NotATree,
}

/// Test/audit hooks into the solve. Every callback receives the store family
/// so it can dump store contents; the default implementation compiles to
/// nothing.
pub trait SolveObserver {
    /// D_u now holds the union of all children key pairs (pre-compute).
    fn before_compute(&mut self, _u: usize, _stores: &StoreFamily) {}
    /// The subtree firing count just computed for u.
    fn computed_subtree_firings(&mut self, _u: usize, _c_down: i64) {}
    /// D_u now holds u's own key pairs (post-update).
    fn after_update(&mut self, _u: usize, _stores: &StoreFamily) {}
    /// D_u is back to the union of children key pairs.
    fn after_revert(&mut self, _u: usize, _stores: &StoreFamily) {}
    /// D_v has been extracted back out of D_u.
    fn after_split(&mut self, _u: usize, _v: usize, _stores: &StoreFamily) {}
}

pub struct NoObserver;

impl SolveObserver for NoObserver {}

pub(crate) struct RootedTree {
    pub root: usize,
    pub parent: Vec<u32>,
    child_off: Vec<usize>,
    children: Vec<u32>,
}

pub(crate) const NO_PARENT: u32 = u32::MAX;

impl RootedTree {
    /// Roots the graph, validating that it is in fact a connected sink-free
    /// tree. Children are listed in ascending vertex id; that order doubles
    /// as the merge order, and splits run through it in exact reverse.
    pub fn build(graph: &Graph, root: usize) -> Result<RootedTree, TreeError> {
        let n = graph.vertex_count();
        if graph.total_sink_multiplicity() != 0 || graph.edge_count() + 1 != n {
            return Err(TreeError::NotATree);
        }
        // Canonical paths root at 0 with v's one child being v + 1; build
        // the arrays directly instead of crawling the CSR.
        if root == 0 && graph.is_canonical_path() {
            let parent: Vec<u32> = (0..n).map(|v| if v == 0 { NO_PARENT } else { v as u32 - 1 }).collect();
            let child_off: Vec<usize> = (0..=n).map(|v| v.min(n - 1)).collect();
            let children: Vec<u32> = (1..n as u32).collect();
            return Ok(RootedTree {
                root,
                parent,
                child_off,
                children,
            });
        }
        let mut parent = vec![NO_PARENT; n];
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        let mut visited = 0usize;
        while let Some(u) = stack.pop() {
            visited += 1;
            for &v in graph.neighbors(u) {
                let v = v as usize;
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u as u32;
                    stack.push(v);
                }
            }
        }
        if visited != n {
            return Err(TreeError::NotATree);
        }
        let mut counts = vec![0usize; n];
        for v in 0..n {
            if v != root {
                counts[parent[v] as usize] += 1;
            }
        }
        let mut child_off = Vec::with_capacity(n + 1);
        let mut acc = 0;
        child_off.push(0);
        for c in &counts {
            acc += c;
            child_off.push(acc);
        }
        let mut cursor = child_off[..n].to_vec();
        let mut children = vec![0u32; acc];
        // Neighbor lists are ascending, so children come out ascending too.
        for u in 0..n {
            for &v in graph.neighbors(u) {
                if parent[v as usize] == u as u32 {
                    children[cursor[u]] = v;
                    cursor[u] += 1;
                }
            }
        }
        Ok(RootedTree {
            root,
            parent,
            child_off,
            children,
        })
    }

    pub fn children(&self, u: usize) -> &[u32] {
        &self.children[self.child_off[u]..self.child_off[u + 1]]
    }

    pub fn child_count(&self, u: usize) -> usize {
        self.child_off[u + 1] - self.child_off[u]
    }
}

/// Everything the bottom-up pass computes, consumed by the top-down pass.
pub(crate) struct PartialState {
    pub tree: RootedTree,
    pub stores: StoreFamily,
    /// First-visit order, 1-based; node timestamps point at these.
    pub visit_order: Vec<u32>,
    /// Firings needed at u to settle its own subtree.
    pub subtree_firings: Vec<i64>,
    /// How many zero-moment nodes each update inserted.
    pub inserted: Vec<u32>,
    /// Working chip counts; meaningful only while the pass runs.
    pub work: Vec<i64>,
    /// Per-vertex popped-node runs, stacked in finish order.
    pub q_stack: Vec<NodeId>,
    pub q_start: Vec<u32>,
    pub q_len: Vec<u32>,
}

enum Frame {
    Enter(usize),
    AfterChild(usize, usize),
}

/// Bottom-up pass: computes subtree firing counts for every vertex and
/// leaves each D_u holding u's key pairs (merged into its parent's store).
pub(crate) fn solve_partial<O: SolveObserver>(
    graph: &Graph,
    tree: RootedTree,
    sigma: &Configuration,
    observer: &mut O,
) -> PartialState {
    let n = graph.vertex_count();
    let mut state = PartialState {
        stores: StoreFamily::with_node_capacity(n, 2 * n),
        visit_order: vec![0; n],
        subtree_firings: vec![0; n],
        inserted: vec![0; n],
        work: (0..n).map(|u| sigma.chips(u) as i64).collect(),
        q_stack: Vec::new(),
        q_start: vec![0; n],
        q_len: vec![0; n],
        tree,
    };
    let root = state.tree.root;
    let mut clock: u32 = 1;
    let mut stack = vec![Frame::Enter(root)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(u) => {
                state.visit_order[u] = clock;
                clock += 1;
                if state.tree.child_count(u) == 0 {
                    // A leaf firing just hands a chip to the parent.
                    state.subtree_firings[u] = state.work[u];
                    observer.computed_subtree_firings(u, state.work[u]);
                    if u != root {
                        let p = state.tree.parent[u] as usize;
                        state.work[p] += state.work[u];
                    }
                    state.work[u] = 0;
                } else {
                    let first = state.tree.children(u)[0] as usize;
                    stack.push(Frame::AfterChild(u, 0));
                    stack.push(Frame::Enter(first));
                }
            }
            Frame::AfterChild(u, i) => {
                let v = state.tree.children(u)[i] as usize;
                state.stores.merge_store(u, v);
                if i + 1 < state.tree.child_count(u) {
                    let next = state.tree.children(u)[i + 1] as usize;
                    stack.push(Frame::AfterChild(u, i + 1));
                    stack.push(Frame::Enter(next));
                } else {
                    finish_vertex(graph, &mut state, u, observer);
                }
            }
        }
    }
    state
}

fn finish_vertex<O: SolveObserver>(
    graph: &Graph,
    state: &mut PartialState,
    u: usize,
    observer: &mut O,
) {
    observer.before_compute(u, &state.stores);
    let root = state.tree.root;
    let degree = graph.degree(u) as i64;
    let sigma_pre = state.work[u];
    state.q_start[u] = state.q_stack.len() as u32;
    let k = state
        .stores
        .compute_c_down(u, sigma_pre, degree, u == root, &mut state.q_stack);
    state.q_len[u] = state.q_stack.len() as u32 - state.q_start[u];
    state.subtree_firings[u] = k;
    observer.computed_subtree_firings(u, k);
    let ds = delta_sum(k, state.tree.child_count(u) as i64, state.q_len[u] as i64);
    state.work[u] = sigma_pre + ds - k * degree;
    if u != root {
        let p = state.tree.parent[u] as usize;
        state.work[p] += k;
    }
    state.inserted[u] = state
        .stores
        .update_store(u, state.work[u], degree, k, state.visit_order[u]);
    observer.after_update(u, &state.stores);
}

/// Top-down pass: recovers the true firing count of every vertex from its
/// parent's, reverting and splitting the stores as it descends.
pub(crate) fn solve_complete<O: SolveObserver>(
    state: &mut PartialState,
    observer: &mut O,
) -> Vec<i64> {
    let n = state.visit_order.len();
    let root = state.tree.root;
    let mut firings = vec![0i64; n];
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        let k = if u == root {
            0
        } else {
            let p = state.tree.parent[u] as usize;
            state.stores.delta_query(u, firings[p])
        };
        {
            let s = state.q_start[u] as usize;
            let popped = &state.q_stack[s..s + state.q_len[u] as usize];
            state
                .stores
                .revert_store(u, state.subtree_firings[u], state.inserted[u], popped);
        }
        observer.after_revert(u, &state.stores);
        firings[u] = state.subtree_firings[u] + k;
        for i in (0..state.tree.child_count(u)).rev() {
            let v = state.tree.children(u)[i] as usize;
            state
                .stores
                .split_store(u, v, state.visit_order[v])
                .expect("splits run in reverse merge order");
            observer.after_split(u, v, &state.stores);
            stack.push(v);
        }
    }
    firings
}

/// Applies the recovery identity terminal = sigma + sum_v c(v) * F(v).
pub(crate) fn recover_configuration(
    graph: &Graph,
    sigma: &Configuration,
    firings: &[i64],
) -> Configuration {
    let n = graph.vertex_count();
    let mut chips = Vec::with_capacity(n);
    for u in 0..n {
        let mut value = sigma.chips(u) as i64 - firings[u] * graph.degree(u) as i64;
        for &v in graph.neighbors(u) {
            value += firings[v as usize];
        }
        debug_assert!(value >= 0, "recovered chips went negative");
        chips.push(value as u64);
    }
    Configuration::new(chips)
}

pub(crate) fn to_firing_vector(firings: &[i64]) -> FiringVector {
    FiringVector::new(firings.iter().map(|&c| c as u64).collect())
}

/// Terminal-or-recurrent verdict plus terminal configuration and firing
/// vector for a sink-free tree.
pub fn solve_tree(graph: &Graph, sigma: &Configuration) -> Result<SolveResult, TreeError> {
    solve_tree_observed(graph, sigma, &mut NoObserver)
}

pub fn solve_tree_observed<O: SolveObserver>(
    graph: &Graph,
    sigma: &Configuration,
    observer: &mut O,
) -> Result<SolveResult, TreeError> {
    let n = graph.vertex_count();
    if sigma.len() != n {
        return Err(TreeError::NotATree);
    }
    let tree = RootedTree::build(graph, 0)?;
    if n == 1 {
        return Ok(if sigma.chips(0) == 0 {
            SolveResult::terminal(sigma.clone(), FiringVector::zeros(1))
        } else {
            SolveResult::recurrent(FiringVector::zeros(1), 0)
        });
    }
    // A tree instance terminates iff the chip total is at most n - 2.
    if sigma.total() > (n as u128) - 2 {
        return Ok(SolveResult::recurrent(FiringVector::zeros(n), 0));
    }
    let mut state = solve_partial(graph, tree, sigma, observer);
    let firings = solve_complete(&mut state, observer);
    assert!(
        state.stores.node_count() <= 2 * n,
        "store arena exceeded its O(n) budget"
    );
    let config = recover_configuration(graph, sigma, &firings);
    Ok(SolveResult::terminal(config, to_firing_vector(&firings)))
}


/// Temporary instrumentation for performance work; prints phase timings.
#[doc(hidden)]
pub fn solve_tree_profiled(graph: &Graph, sigma: &Configuration) {
    use std::time::Instant;
    let n = graph.vertex_count();
    let t0 = Instant::now();
    let tree = RootedTree::build(graph, 0).unwrap();
    let t1 = Instant::now();
    let mut state = solve_partial(graph, tree, sigma, &mut NoObserver);
    let t15 = Instant::now();
    let t2 = Instant::now();
    let firings = solve_complete(&mut state, &mut NoObserver);
    let t3 = Instant::now();
    let _config = recover_configuration(graph, sigma, &firings);
    let t4 = Instant::now();
    eprintln!(
        "n={n}: build {:?} partial {:?} compact {:?} complete {:?} recover {:?} nodes {}",
        t1 - t0,
        t15 - t1,
        t2 - t15,
        t3 - t2,
        t4 - t3,
        state.stores.node_count()
    );
}
