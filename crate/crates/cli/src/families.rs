//! Seeded instance generators for the benchmark families.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use sandpile_core::graph::{Configuration, Graph, SandpileInstance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FamilyError {
    #[error("bad family parameters: {0}")]
    BadFamilyParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Path,
    RandomTree,
    Clique,
    Regular,
    Hypercube,
}

impl Family {
    pub fn parse(name: &str) -> Result<Family, FamilyError> {
        match name {
            "path" => Ok(Family::Path),
            "random-tree" => Ok(Family::RandomTree),
            "clique" => Ok(Family::Clique),
            "regular" => Ok(Family::Regular),
            "hypercube" => Ok(Family::Hypercube),
            other => Err(FamilyError::BadFamilyParams(format!(
                "unknown family {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Path => "path",
            Family::RandomTree => "random-tree",
            Family::Clique => "clique",
            Family::Regular => "regular",
            Family::Hypercube => "hypercube",
        }
    }

    /// Families that carry a sink (vertex 1 by convention) and run the
    /// greedy simulator.
    pub fn has_sink(&self) -> bool {
        matches!(self, Family::Regular | Family::Hypercube)
    }
}

fn edges_to_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let shifted: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (u + 1, v + 1)).collect();
    Graph::build(n, &shifted).expect("family generator produced an invalid graph")
}

pub fn path_graph(n: usize) -> Result<Graph, FamilyError> {
    if n == 0 {
        return Err(FamilyError::BadFamilyParams("path needs n >= 1".into()));
    }
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    Ok(edges_to_graph(n, &edges))
}

pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Result<Graph, FamilyError> {
    if n == 0 {
        return Err(FamilyError::BadFamilyParams("tree needs n >= 1".into()));
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    Ok(edges_to_graph(n, &edges))
}

pub fn clique_graph(n: usize) -> Result<Graph, FamilyError> {
    if n < 2 {
        return Err(FamilyError::BadFamilyParams("clique needs n >= 2".into()));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Ok(edges_to_graph(n, &edges))
}

/// Random d-regular graph by repeated pairing, rejecting self-loops and
/// duplicates, retried until connected. Uniformity is not required for
/// benchmarking.
pub fn regular_graph(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Graph, FamilyError> {
    if d < 2 || d >= n {
        return Err(FamilyError::BadFamilyParams(format!(
            "regular needs 2 <= d < n, got n={n} d={d}"
        )));
    }
    if n * d % 2 != 0 {
        return Err(FamilyError::BadFamilyParams(format!(
            "regular needs n*d even, got n={n} d={d}"
        )));
    }
    'attempt: loop {
        let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
        points.shuffle(rng);
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in points.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || !seen.insert((u.min(v), u.max(v))) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        let g = edges_to_graph(n, &edges);
        if g.is_connected() {
            return Ok(g);
        }
    }
}

pub fn hypercube_graph(dim: usize) -> Result<Graph, FamilyError> {
    if dim == 0 || dim > 24 {
        return Err(FamilyError::BadFamilyParams(format!(
            "hypercube dimension {dim} out of range 1..=24"
        )));
    }
    let n = 1usize << dim;
    let mut edges = Vec::with_capacity(n * dim / 2);
    for u in 0..n {
        for bit in 0..dim {
            let v = u ^ (1 << bit);
            if u < v {
                edges.push((u, v));
            }
        }
    }
    Ok(edges_to_graph(n, &edges))
}

/// Builds the instance for one (family, size) cell. `size` is the vertex
/// count, except for hypercubes where it is the dimension.
pub fn build_instance(
    family: Family,
    size: usize,
    degree: usize,
    seed: u64,
) -> Result<SandpileInstance, FamilyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = match family {
        Family::Path => path_graph(size)?,
        Family::RandomTree => random_tree(size, &mut rng)?,
        Family::Clique => clique_graph(size)?,
        Family::Regular => regular_graph(size, degree, &mut rng)?,
        Family::Hypercube => hypercube_graph(size)?,
    };
    let n = graph.vertex_count();
    let (sinks, total) = if family.has_sink() {
        // Large chip totals exercise the log N behavior of the simulator.
        (vec![0usize], 1u64 << 20)
    } else {
        // Sink-free families draw terminal instances.
        (vec![], (n as u64).saturating_sub(2))
    };
    let mut chips = vec![0u64; n];
    if n > sinks.len() {
        for _ in 0..total {
            loop {
                let v = rng.gen_range(0..n);
                if !sinks.contains(&v) {
                    chips[v] += 1;
                    break;
                }
            }
        }
    }
    Ok(SandpileInstance::new(
        graph,
        Configuration::new(chips),
        sinks,
    ))
}
