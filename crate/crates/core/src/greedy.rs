//! Batched max-ratio simulation for arbitrary graphs with one merged sink.
//!
//! Each iteration picks the vertex with the largest floor(chips/degree) and
//! executes that many firings at once, so the running time depends on log N
//! rather than N.

use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::{Configuration, FiringVector, SandpileInstance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GreedyError {
    #[error("greedy simulation needs a merged sink")]
    NoSink,
    #[error("chip arithmetic overflowed")]
    ArithmeticOverflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyResult {
    pub terminal_config: Configuration,
    pub firing_vector: FiringVector,
    pub iterations: u64,
    /// Chips sent into the merged sink.
    pub absorbed: u64,
}

/// One batched firing, as reported through the optional trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationTrace {
    pub vertex: usize,
    pub batch: u64,
    /// Chips still on non-sink vertices after the batch.
    pub remaining: u64,
}

/// Stabilizes an instance whose sinks were already merged into
/// sink-multiplicity form. Ties on the ratio break toward the lowest vertex
/// id; the outcome is order-independent anyway.
pub fn stabilize_greedy(instance: &SandpileInstance) -> Result<GreedyResult, GreedyError> {
    stabilize_greedy_impl(instance, None)
}

/// Same, collecting one trace row per iteration.
pub fn stabilize_greedy_traced(
    instance: &SandpileInstance,
) -> Result<(GreedyResult, Vec<IterationTrace>), GreedyError> {
    let mut trace = Vec::new();
    let result = stabilize_greedy_impl(instance, Some(&mut trace))?;
    Ok((result, trace))
}

fn ratio(chips: u64, degree: u64) -> u64 {
    chips / degree
}

fn stabilize_greedy_impl(
    instance: &SandpileInstance,
    mut trace: Option<&mut Vec<IterationTrace>>,
) -> Result<GreedyResult, GreedyError> {
    let graph = &instance.graph;
    let n = graph.vertex_count();
    if !instance.sinks.is_empty() || graph.total_sink_multiplicity() == 0 {
        return Err(GreedyError::NoSink);
    }
    let mut chips: Vec<u64> = instance.config.as_slice().to_vec();
    let mut remaining: u64 = chips
        .iter()
        .try_fold(0u64, |acc, &c| acc.checked_add(c))
        .ok_or(GreedyError::ArithmeticOverflow)?;
    let mut fired = vec![0u64; n];
    let mut iterations: u64 = 0;
    let mut absorbed: u64 = 0;

    // Max-heap on (ratio, lowest id wins ties). `pending` holds each
    // vertex's live ratio; every ratio change pushes one fresh entry and
    // entries that no longer match are dropped on pop, so each entry is
    // popped at most once.
    let mut heap: BinaryHeap<(u64, std::cmp::Reverse<usize>)> = BinaryHeap::new();
    let mut pending: Vec<u64> = vec![0; n];
    for u in 0..n {
        let r = ratio(chips[u], graph.degree(u));
        pending[u] = r;
        if r > 0 {
            heap.push((r, std::cmp::Reverse(u)));
        }
    }

    while let Some((r, std::cmp::Reverse(u))) = heap.pop() {
        if pending[u] != r {
            continue;
        }
        let d = graph.degree(u);
        let batch = r;
        let outflow = batch.checked_mul(d).ok_or(GreedyError::ArithmeticOverflow)?;
        chips[u] -= outflow;
        fired[u] += batch;
        iterations += 1;
        let into_sink = batch * graph.sink_multiplicity(u) as u64;
        absorbed += into_sink;
        remaining -= into_sink;
        for &v in graph.neighbors(u) {
            let v = v as usize;
            chips[v] = chips[v]
                .checked_add(batch)
                .ok_or(GreedyError::ArithmeticOverflow)?;
            let rv = ratio(chips[v], graph.degree(v));
            if rv != pending[v] {
                pending[v] = rv;
                if rv > 0 {
                    heap.push((rv, std::cmp::Reverse(v)));
                }
            }
        }
        let ru = ratio(chips[u], d);
        pending[u] = ru;
        if ru > 0 {
            heap.push((ru, std::cmp::Reverse(u)));
        }
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(IterationTrace {
                vertex: u,
                batch,
                remaining,
            });
        }
    }

    Ok(GreedyResult {
        terminal_config: Configuration::new(chips),
        firing_vector: FiringVector::new(fired),
        iterations,
        absorbed,
    })
}
