//! Shared instance generators and the eager reference implementation used
//! by the differential and acceptance suites.
#![allow(dead_code)] // each test binary uses its own slice of this module

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sandpile_core::graph::{Configuration, Graph, SandpileInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree: each vertex v > 0 attaches to a uniformly random earlier
/// vertex.
pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 1..n {
        let p = rng.gen_range(0..v);
        edges.push((p, v));
    }
    graph0(n, &edges)
}

pub fn path_graph(n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    graph0(n, &edges)
}

pub fn cycle_graph(n: usize) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    edges.push((n - 1, 0));
    graph0(n, &edges)
}

pub fn clique_graph(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    graph0(n, &edges)
}

/// Pseudotree: a random tree, optionally with one extra non-edge added.
pub fn random_pseudotree(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::with_capacity(n);
    for v in 1..n {
        let p = rng.gen_range(0..v);
        edges.push((p, v));
    }
    if n >= 3 && rng.gen_bool(0.8) {
        loop {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            let key = (u.min(v), u.max(v));
            if u != v && !edges.contains(&key) {
                edges.push(key);
                break;
            }
        }
    }
    graph0(n, &edges)
}

/// Random connected graph: a random tree plus `extra` random non-edges.
pub fn random_connected(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut present = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for v in 1..n {
        let p = rng.gen_range(0..v);
        present.insert((p, v));
        edges.push((p, v));
    }
    let max_extra = n * (n - 1) / 2 - edges.len();
    for _ in 0..extra.min(max_extra) {
        loop {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if present.insert(key) {
                edges.push(key);
                break;
            }
        }
    }
    graph0(n, &edges)
}

/// Chips with the given total scattered uniformly.
pub fn scatter_chips(n: usize, total: u64, rng: &mut ChaCha8Rng) -> Configuration {
    let mut chips = vec![0u64; n];
    for _ in 0..total {
        chips[rng.gen_range(0..n)] += 1;
    }
    Configuration::new(chips)
}

pub fn instance(graph: Graph, config: Configuration, sinks: Vec<usize>) -> SandpileInstance {
    SandpileInstance::new(graph, config, sinks)
}

/// Builds from 0-based edges by shifting through the 1-based constructor.
pub fn graph0(n: usize, edges: &[(usize, usize)]) -> Graph {
    let shifted: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (u + 1, v + 1)).collect();
    Graph::build(n, &shifted).expect("generator produced an invalid graph")
}

pub mod reference {
    //! Eager reference implementation of the tree algorithm: the store is a
    //! plain sorted vector and every rank-affine update is applied
    //! immediately. Independent of the splay machinery; used to check the
    //! lazy implementation answer for answer.

    use sandpile_core::graph::{Configuration, Graph};

    /// (moment, timestamp) pairs kept sorted by moment, stable on ties.
    #[derive(Clone, Debug, Default, PartialEq, Eq)]
    pub struct EagerStore {
        pub items: Vec<(i64, u32)>,
    }

    impl EagerStore {
        fn inc_time(&mut self, a: i64, b: i64) {
            for (rank0, item) in self.items.iter_mut().enumerate() {
                item.0 += (rank0 as i64 + 1) * a + b;
            }
        }

        fn insert(&mut self, moment: i64, timestamp: u32) {
            let pos = self.items.partition_point(|&(m, _)| m <= moment);
            self.items.insert(pos, (moment, timestamp));
        }
    }

    pub struct RefSolve<'a> {
        graph: &'a Graph,
        root: usize,
        pub work: Vec<i64>,
        pub subtree_firings: Vec<i64>,
        pub firings: Vec<i64>,
        stores: Vec<EagerStore>,
        popped: Vec<Vec<(i64, u32)>>,
        inserted: Vec<usize>,
        visit_order: Vec<u32>,
        clock: u32,
        parent: Vec<Option<usize>>,
        children: Vec<Vec<usize>>,
    }

    impl<'a> RefSolve<'a> {
        pub fn new(graph: &'a Graph, sigma: &Configuration, root: usize) -> Self {
            let n = graph.vertex_count();
            let mut parent = vec![None; n];
            let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut order = vec![root];
            let mut seen = vec![false; n];
            seen[root] = true;
            let mut head = 0;
            while head < order.len() {
                let u = order[head];
                head += 1;
                for &v in graph.neighbors(u) {
                    let v = v as usize;
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some(u);
                        children[u].push(v);
                        order.push(v);
                    }
                }
            }
            for list in &mut children {
                list.sort_unstable();
            }
            RefSolve {
                graph,
                root,
                work: (0..n).map(|u| sigma.chips(u) as i64).collect(),
                subtree_firings: vec![0; n],
                firings: vec![0; n],
                stores: vec![EagerStore::default(); n],
                popped: vec![Vec::new(); n],
                inserted: vec![0; n],
                visit_order: vec![0; n],
                clock: 1,
                parent,
                children,
            }
        }

        pub fn run(&mut self) {
            self.partial(self.root);
            self.complete(self.root);
        }

        fn partial(&mut self, u: usize) {
            self.visit_order[u] = self.clock;
            self.clock += 1;
            if self.children[u].is_empty() {
                self.subtree_firings[u] = self.work[u];
                if let Some(p) = self.parent[u] {
                    self.work[p] += self.work[u];
                }
                self.work[u] = 0;
                return;
            }
            for i in 0..self.children[u].len() {
                let v = self.children[u][i];
                self.partial(v);
                // Merge: reference stores just concatenate stably by moment.
                let moved = std::mem::take(&mut self.stores[v].items);
                for (m, t) in moved {
                    self.stores[u].insert(m, t);
                }
            }
            let degree = self.graph.degree(u) as i64;
            let sigma_pre = self.work[u];
            let is_root = u == self.root;
            let chain = i64::from(!is_root);
            // ComputeC by popping minimum moments.
            let mut now = 0i64;
            let mut count = 0i64;
            while let Some(&(m, t)) = self.stores[u].items.first() {
                let advance = m == now || count + chain * (m - 1 - now) <= sigma_pre - degree;
                if !advance {
                    break;
                }
                self.stores[u].items.remove(0);
                self.popped[u].push((m, t));
                count += 1 + chain * (m - now);
                now = m;
            }
            let extra = if is_root {
                0
            } else {
                (sigma_pre - count - (degree - 1)).max(0)
            };
            let k = now + extra;
            self.subtree_firings[u] = k;
            let delta_sum = k * self.children[u].len() as i64 - self.popped[u].len() as i64;
            self.work[u] = sigma_pre + delta_sum - k * degree;
            if let Some(p) = self.parent[u] {
                self.work[p] += k;
            }
            // Update.
            self.stores[u].inc_time(0, -k);
            let num = degree - 1 - self.work[u];
            assert!(num >= 0, "update with negative insert count");
            self.inserted[u] = num as usize;
            for _ in 0..num {
                let pos = self.stores[u].items.partition_point(|&(m, _)| m <= 0);
                self.stores[u].items.insert(pos, (0, self.visit_order[u]));
            }
            self.stores[u].inc_time(1, 0);
        }

        fn complete(&mut self, u: usize) {
            let k = match self.parent[u] {
                None => 0,
                Some(p) => {
                    let kq = self.firings[p];
                    let below = self.stores[u]
                        .items
                        .iter()
                        .filter(|&&(m, _)| m <= kq)
                        .count() as i64;
                    kq - below
                }
            };
            // Revert.
            self.stores[u].inc_time(-1, 0);
            for _ in 0..self.inserted[u] {
                let pos = self.stores[u]
                    .items
                    .iter()
                    .position(|&(m, _)| m == 0)
                    .expect("inserted node missing");
                self.stores[u].items.remove(pos);
            }
            let c_down = self.subtree_firings[u];
            self.stores[u].inc_time(0, c_down);
            let popped = std::mem::take(&mut self.popped[u]);
            for (m, t) in popped {
                self.stores[u].insert(m, t);
            }
            self.firings[u] = self.subtree_firings[u] + k;
            // Split in reverse, then recurse.
            for i in (0..self.children[u].len()).rev() {
                let v = self.children[u][i];
                let cut = self.visit_order[v];
                let (keep, give): (Vec<_>, Vec<_>) =
                    self.stores[u].items.iter().partition(|&&(_, t)| t < cut);
                self.stores[u].items = keep;
                self.stores[v].items = give;
                self.complete(v);
            }
        }
    }
}
