//! Brute-force single-firing simulator and brute-force upward-contribution
//! computation: the ground truth every fast solver is tested against.
//!
//! Deliberately naive and restricted to desk-scale inputs.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Configuration, FiringVector, Graph, SandpileInstance};
use crate::result::SolveResult;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("vertex {0} is not full")]
    NotFull(usize),
    #[error("vertex {0} is a sink")]
    IsSink(usize),
    #[error("firing cap exceeded on an instance with sinks")]
    CapExceededWithSinks,
    #[error("configuration is not local terminal in the subtree of {0}")]
    NotLocalTerminal(usize),
    #[error("vertex {0} is the root and has no parent")]
    IsRoot(usize),
}

/// Which full vertex the simulator fires next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiringOrder {
    LowestId,
    HighestChips,
    RandomSeeded(u64),
}

impl Default for FiringOrder {
    fn default() -> Self {
        FiringOrder::LowestId
    }
}

/// Default cap for no-sink instances: n^4 + 1. Exceeding it certifies
/// recurrence.
pub fn default_firing_cap(n: usize) -> u64 {
    (n as u64)
        .checked_pow(4)
        .and_then(|c| c.checked_add(1))
        .unwrap_or(u64::MAX)
}

fn is_full(graph: &Graph, sink: &[bool], chips: &[u64], u: usize) -> bool {
    let d = graph.degree(u);
    !sink[u] && d > 0 && chips[u] >= d
}

/// One firing: u loses degree(u) chips, each non-sink neighbor gains one,
/// chips sent along sink edges vanish.
pub fn fire(
    config: &Configuration,
    u: usize,
    graph: &Graph,
    sinks: &[usize],
) -> Result<Configuration, OracleError> {
    let mut mask = vec![false; graph.vertex_count()];
    for &s in sinks {
        mask[s] = true;
    }
    if mask[u] {
        return Err(OracleError::IsSink(u));
    }
    let mut chips: Vec<u64> = config.as_slice().to_vec();
    if !is_full(graph, &mask, &chips, u) {
        return Err(OracleError::NotFull(u));
    }
    fire_in_place(graph, &mask, &mut chips, u);
    Ok(Configuration::new(chips))
}

fn fire_in_place(graph: &Graph, sink: &[bool], chips: &mut [u64], u: usize) {
    chips[u] -= graph.degree(u);
    for &v in graph.neighbors(u) {
        let v = v as usize;
        if !sink[v] {
            chips[v] += 1;
        }
    }
}

/// Word-packed membership set with lowest-bit extraction; the firing loop
/// spends most of its time here.
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(n: usize) -> BitSet {
        BitSet {
            words: vec![0; n / 64 + 1],
        }
    }

    fn set(&mut self, v: usize, on: bool) {
        let (w, b) = (v / 64, v % 64);
        if on {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    fn lowest(&self) -> Option<usize> {
        for (w, &word) in self.words.iter().enumerate() {
            if word != 0 {
                return Some(w * 64 + word.trailing_zeros() as usize);
            }
        }
        None
    }
}

enum Chooser {
    ById(BitSet),
    ByChips(BTreeSet<(u64, usize)>),
    Random(Vec<usize>, Vec<bool>, ChaCha8Rng),
}

impl Chooser {
    fn new(order: FiringOrder, n: usize) -> Chooser {
        match order {
            FiringOrder::LowestId => Chooser::ById(BitSet::new(n)),
            FiringOrder::HighestChips => Chooser::ByChips(BTreeSet::new()),
            FiringOrder::RandomSeeded(seed) => {
                Chooser::Random(Vec::new(), Vec::new(), ChaCha8Rng::seed_from_u64(seed))
            }
        }
    }

    fn sync(&mut self, v: usize, chips_before: u64, chips_now: u64, full_now: bool) {
        match self {
            Chooser::ById(set) => {
                set.set(v, full_now);
            }
            Chooser::ByChips(set) => {
                set.remove(&(chips_before, v));
                if full_now {
                    set.insert((chips_now, v));
                }
            }
            Chooser::Random(pool, present, _) => {
                if present.len() <= v {
                    present.resize(v + 1, false);
                }
                if full_now && !present[v] {
                    present[v] = true;
                    pool.push(v);
                }
                // Stale entries are filtered out at pick time.
                if !full_now {
                    present[v] = false;
                }
            }
        }
    }

    fn pick(&mut self) -> Option<usize> {
        match self {
            Chooser::ById(set) => set.lowest(),
            Chooser::ByChips(set) => set.iter().next_back().map(|&(_, v)| v),
            Chooser::Random(pool, present, rng) => loop {
                if pool.is_empty() {
                    return None;
                }
                let i = rng.gen_range(0..pool.len());
                let v = pool[i];
                if present[v] {
                    return Some(v);
                }
                pool.swap_remove(i);
            },
        }
    }
}

/// Repeatedly fires full non-sink vertices until terminal, or reports
/// recurrence once more than `firing_cap` firings were needed. With sinks
/// present stabilization is guaranteed, so running into the cap is an
/// internal invariant violation rather than a verdict.
pub fn stabilize_naive(
    instance: &SandpileInstance,
    firing_cap: u64,
    order: FiringOrder,
) -> Result<SolveResult, OracleError> {
    let graph = &instance.graph;
    let n = graph.vertex_count();
    let sink = instance.sink_mask();
    let has_sinks = instance.has_sinks();

    if n == 1 && !has_sinks {
        return Ok(if instance.config.chips(0) == 0 {
            SolveResult::terminal(instance.config.clone(), FiringVector::zeros(1))
        } else {
            SolveResult::recurrent(FiringVector::zeros(1), 0)
        });
    }
    // Fast recurrence gate on trees: terminal iff the chip total is at most
    // n - 2.
    if !has_sinks && graph.is_tree() && instance.config.total() > (n as u128) - 2 {
        return Ok(SolveResult::recurrent(FiringVector::zeros(n), 0));
    }

    let mut chips: Vec<u64> = instance.config.as_slice().to_vec();
    let mut counts = vec![0u64; n];
    let mut fired = 0u64;
    let mut chooser = Chooser::new(order, n);
    for v in 0..n {
        if is_full(graph, &sink, &chips, v) {
            chooser.sync(v, chips[v], chips[v], true);
        }
    }

    while let Some(u) = chooser.pick() {
        if fired >= firing_cap {
            if has_sinks {
                return Err(OracleError::CapExceededWithSinks);
            }
            return Ok(SolveResult::recurrent(FiringVector::new(counts), fired));
        }
        let before_u = chips[u];
        fire_in_place(graph, &sink, &mut chips, u);
        counts[u] += 1;
        fired += 1;
        chooser.sync(u, before_u, chips[u], is_full(graph, &sink, &chips, u));
        for &v in graph.neighbors(u) {
            let v = v as usize;
            if !sink[v] {
                chooser.sync(v, chips[v] - 1, chips[v], is_full(graph, &sink, &chips, v));
            }
        }
    }

    Ok(SolveResult::terminal(
        Configuration::new(chips),
        FiringVector::new(counts),
    ))
}

/// Fires only vertices of `subset` until none of them is full; returns the
/// resulting configuration and the per-vertex firing counts.
pub fn local_stabilize(
    instance: &SandpileInstance,
    subset: &[usize],
) -> Result<(Configuration, FiringVector), OracleError> {
    let graph = &instance.graph;
    let n = graph.vertex_count();
    let sink = instance.sink_mask();
    let mut member = vec![false; n];
    for &v in subset {
        if sink[v] {
            return Err(OracleError::IsSink(v));
        }
        member[v] = true;
    }
    let mut chips: Vec<u64> = instance.config.as_slice().to_vec();
    let mut counts = vec![0u64; n];
    let mut queue: BTreeSet<usize> = subset
        .iter()
        .copied()
        .filter(|&v| is_full(graph, &sink, &chips, v))
        .collect();
    while let Some(&u) = queue.iter().next() {
        fire_in_place(graph, &sink, &mut chips, u);
        counts[u] += 1;
        if !is_full(graph, &sink, &chips, u) {
            queue.remove(&u);
        }
        for &v in graph.neighbors(u) {
            let v = v as usize;
            if member[v] && is_full(graph, &sink, &chips, v) {
                queue.insert(v);
            }
        }
    }
    Ok((Configuration::new(chips), FiringVector::new(counts)))
}

/// Vertices of `subtree(u)` when `tree` is rooted at `root`, or None when u
/// is unreachable (non-tree input).
pub fn subtree_vertices(tree: &Graph, root: usize, u: usize) -> Option<(Vec<usize>, usize)> {
    let n = tree.vertex_count();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(x) = stack.pop() {
        for &y in tree.neighbors(x) {
            let y = y as usize;
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                stack.push(y);
            }
        }
    }
    if !seen[u] {
        return None;
    }
    let mut subtree = vec![u];
    let mut i = 0;
    while i < subtree.len() {
        let x = subtree[i];
        i += 1;
        for &y in tree.neighbors(x) {
            let y = y as usize;
            if parent[y] == x {
                subtree.push(y);
            }
        }
    }
    Some((subtree, parent[u]))
}

/// Local upward contribution of adding `x` chips at `u`: how many extra
/// chips reach parent(u) once subtree(u) is restabilized. `config` must
/// already be local terminal in subtree(u).
pub fn delta_bruteforce(
    tree: &Graph,
    root: usize,
    config: &Configuration,
    u: usize,
    x: u64,
) -> Result<u64, OracleError> {
    if u == root {
        return Err(OracleError::IsRoot(u));
    }
    let (subtree, parent) = subtree_vertices(tree, root, u).ok_or(OracleError::IsRoot(u))?;
    for &v in &subtree {
        if config.chips(v) >= tree.degree(v) {
            return Err(OracleError::NotLocalTerminal(u));
        }
    }
    if x == 0 {
        return Ok(0);
    }
    let mut bumped = config.as_slice().to_vec();
    bumped[u] += x;
    let inst = SandpileInstance::new(
        tree.clone(),
        Configuration::new(bumped),
        Vec::new(),
    );
    let (after, _) = local_stabilize(&inst, &subtree)?;
    Ok(after.chips(parent) - config.chips(parent))
}

/// Chips drained out of the system by a firing vector: one per firing per
/// incident sink edge.
pub fn absorbed_by_sinks(instance: &SandpileInstance, firings: &FiringVector) -> u128 {
    let sink = instance.sink_mask();
    let mut absorbed: u128 = 0;
    for u in 0..instance.vertex_count() {
        if sink[u] {
            continue;
        }
        let sink_edges = instance.graph.sink_multiplicity(u) as u128
            + instance
                .graph
                .neighbors(u)
                .iter()
                .filter(|&&v| sink[v as usize])
                .count() as u128;
        absorbed += firings.count(u) as u128 * sink_edges;
    }
    absorbed
}

/// Checks the recovery identity: terminal = sigma + sum_v c(v) * F(v),
/// restricted to non-sink vertices.
pub fn satisfies_recovery(
    instance: &SandpileInstance,
    firings: &FiringVector,
    terminal: &Configuration,
) -> bool {
    let graph = &instance.graph;
    let sink = instance.sink_mask();
    for u in 0..graph.vertex_count() {
        if sink[u] {
            continue;
        }
        let mut value = instance.config.chips(u) as i128
            - firings.count(u) as i128 * graph.degree(u) as i128;
        for &v in graph.neighbors(u) {
            let v = v as usize;
            if !sink[v] {
                value += firings.count(v) as i128;
            }
        }
        if value != terminal.chips(u) as i128 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::result::Status;

    fn path(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
        Graph::build(n, &edges).unwrap()
    }

    fn inst(g: Graph, chips: Vec<u64>, sinks: Vec<usize>) -> SandpileInstance {
        SandpileInstance::new(g, Configuration::new(chips), sinks)
    }

    #[test]
    fn fire_moves_chips() {
        let g = path(3);
        let c = fire(&Configuration::new(vec![0, 2, 0]), 1, &g, &[]).unwrap();
        assert_eq!(c.as_slice(), &[1, 0, 1]);
    }

    #[test]
    fn fire_rejects_not_full_and_sinks() {
        let g = path(3);
        assert_eq!(
            fire(&Configuration::new(vec![0, 1, 0]), 1, &g, &[]).unwrap_err(),
            OracleError::NotFull(1)
        );
        assert_eq!(
            fire(&Configuration::new(vec![0, 2, 0]), 1, &g, &[1]).unwrap_err(),
            OracleError::IsSink(1)
        );
    }

    #[test]
    fn fire_absorbs_into_merged_sink() {
        let g = Graph::with_sink_multiplicity(2, &[(0, 1)], vec![1, 0]);
        let c = fire(&Configuration::new(vec![2, 0]), 0, &g, &[]).unwrap();
        assert_eq!(c.as_slice(), &[0, 1]);
    }

    #[test]
    fn naive_one_step() {
        let r = stabilize_naive(&inst(path(3), vec![1, 0, 0], vec![]), 82, FiringOrder::LowestId)
            .unwrap();
        assert_eq!(r.status, Status::Terminal);
        assert_eq!(r.config.unwrap().as_slice(), &[0, 1, 0]);
        assert_eq!(r.firings.as_slice(), &[1, 0, 0]);
    }

    #[test]
    fn naive_recurrent_by_tree_gate() {
        let r = stabilize_naive(&inst(path(2), vec![1, 0], vec![]), 17, FiringOrder::LowestId)
            .unwrap();
        assert_eq!(r.status, Status::Recurrent);
    }

    #[test]
    fn naive_with_sink_absorbs() {
        let instance = inst(path(3), vec![0, 5, 0], vec![2]);
        let r = stabilize_naive(&instance, 1 << 20, FiringOrder::LowestId).unwrap();
        assert_eq!(r.status, Status::Terminal);
        let cfg = r.config.unwrap();
        assert_eq!(cfg.chips(0), 0);
        assert_eq!(cfg.chips(1), 1);
        assert_eq!(r.firings.as_slice(), &[4, 4, 0]);
        assert_eq!(absorbed_by_sinks(&instance, &r.firings), 4);
    }

    #[test]
    fn single_vertex_semantics() {
        let g = Graph::build(1, &[]).unwrap();
        let t = stabilize_naive(&inst(g.clone(), vec![0], vec![]), 2, FiringOrder::LowestId)
            .unwrap();
        assert_eq!(t.status, Status::Terminal);
        let r = stabilize_naive(&inst(g, vec![3], vec![]), 2, FiringOrder::LowestId).unwrap();
        assert_eq!(r.status, Status::Recurrent);
    }

    #[test]
    fn local_stabilize_examples() {
        // After the middle vertex fires, the right end (degree 1, one chip)
        // is itself full and in the subset, so it fires too.
        let instance = inst(path(3), vec![0, 2, 0], vec![]);
        let (cfg, counts) = local_stabilize(&instance, &[1, 2]).unwrap();
        assert_eq!(cfg.as_slice(), &[1, 1, 0]);
        assert_eq!(counts.as_slice(), &[0, 1, 1]);

        let (same, zero) = local_stabilize(&instance, &[]).unwrap();
        assert_eq!(same.as_slice(), instance.config.as_slice());
        assert_eq!(zero.total(), 0);

        let star = Graph::build(4, &[(1, 2), (1, 3), (1, 4)]).unwrap();
        let star_inst = inst(star, vec![0, 1, 1, 1], vec![]);
        let (cfg, counts) = local_stabilize(&star_inst, &[1, 2, 3]).unwrap();
        assert_eq!(cfg.as_slice(), &[3, 0, 0, 0]);
        assert_eq!(counts.as_slice(), &[0, 1, 1, 1]);
    }

    #[test]
    fn delta_bruteforce_examples() {
        // Leaf: delta(u, x) = x.
        let g = path(3);
        let leaf_cfg = Configuration::new(vec![0, 0, 0]);
        assert_eq!(delta_bruteforce(&g, 0, &leaf_cfg, 2, 5).unwrap(), 5);
        // Chain reaction through a child.
        let cfg = Configuration::new(vec![0, 1, 0]);
        assert_eq!(delta_bruteforce(&g, 0, &cfg, 1, 1).unwrap(), 1);
        // x = 0 contributes nothing.
        assert_eq!(delta_bruteforce(&g, 0, &cfg, 1, 0).unwrap(), 0);
        // Not local terminal is rejected.
        let bad = Configuration::new(vec![0, 2, 0]);
        assert_eq!(
            delta_bruteforce(&g, 0, &bad, 1, 1).unwrap_err(),
            OracleError::NotLocalTerminal(1)
        );
    }

    #[test]
    fn orders_agree_on_a_small_instance() {
        let g = Graph::build(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        let instance = inst(g, vec![2, 0, 0, 0], vec![]);
        let base = stabilize_naive(&instance, 257, FiringOrder::LowestId).unwrap();
        for order in [
            FiringOrder::HighestChips,
            FiringOrder::RandomSeeded(7),
            FiringOrder::RandomSeeded(8),
        ] {
            let other = stabilize_naive(&instance, 257, order).unwrap();
            assert_eq!(base, other);
        }
    }
}
