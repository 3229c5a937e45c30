//! Invariant and property tests: firing-order independence, monotonicity of
//! the local contribution, conservation, least action, threshold behavior of
//! the removal search, and store-level bookkeeping.

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use sandpile_core::graph::{Configuration, SandpileInstance};
use sandpile_core::greedy::stabilize_greedy;
use sandpile_core::oracle::{self, FiringOrder};
use sandpile_core::reduction::{self, check_feasible, solve_by_removal, BoundedProblem};
use sandpile_core::result::Status;
use sandpile_core::store::StoreFamily;
use sandpile_core::tree::solve_tree;

#[test]
fn abelian_orders_agree() {
    let mut rng = rng(0xab_e11a);
    for _ in 0..60 {
        let n = rng.gen_range(2..=10);
        let g = random_connected(n, rng.gen_range(0..n), &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=20), &mut rng);
        let sinks = if rng.gen_bool(0.5) {
            vec![rng.gen_range(0..n)]
        } else {
            vec![]
        };
        let inst = instance(g, sigma, sinks);
        let cap = oracle::default_firing_cap(n);
        let base = oracle::stabilize_naive(&inst, cap, FiringOrder::LowestId).unwrap();
        for seed in 0..10 {
            let other =
                oracle::stabilize_naive(&inst, cap, FiringOrder::RandomSeeded(seed)).unwrap();
            assert_eq!(base.status, other.status);
            if base.status == Status::Terminal {
                assert_eq!(base.config, other.config);
                assert_eq!(base.firings, other.firings);
            }
        }
    }
}

#[test]
fn chip_conservation_under_firing() {
    let mut rng = rng(0xc0_15e1);
    for _ in 0..50 {
        let n = rng.gen_range(2..=12);
        let g = random_connected(n, rng.gen_range(0..n), &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=15), &mut rng);
        let sinks = if rng.gen_bool(0.4) {
            vec![rng.gen_range(0..n)]
        } else {
            vec![]
        };
        let inst = instance(g, sigma, sinks);
        let r = oracle::stabilize_naive(&inst, oracle::default_firing_cap(n), FiringOrder::LowestId)
            .unwrap();
        if r.status != Status::Terminal {
            continue;
        }
        let cfg = r.config.as_ref().unwrap();
        let sink = inst.sink_mask();
        let before: u128 = (0..n)
            .filter(|&u| !sink[u])
            .map(|u| inst.config.chips(u) as u128)
            .sum();
        let after: u128 = (0..n)
            .filter(|&u| !sink[u])
            .map(|u| cfg.chips(u) as u128)
            .sum();
        assert_eq!(before, after + oracle::absorbed_by_sinks(&inst, &r.firings));
        assert!(oracle::satisfies_recovery(&inst, &r.firings, cfg));
    }
}

#[test]
fn merge_sinks_preserves_core_terminal() {
    let mut rng = rng(0x5118_0001);
    for _ in 0..60 {
        let n = rng.gen_range(3..=12);
        let g = random_connected(n, rng.gen_range(0..n), &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=20), &mut rng);
        let k = rng.gen_range(1..n);
        let mut sinks: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        sinks.shuffle(&mut rng);
        sinks.truncate(k);
        let inst = instance(g, sigma, sinks);
        let slow = oracle::stabilize_naive(&inst, u64::MAX, FiringOrder::LowestId).unwrap();
        let merged = inst.merge_sinks().unwrap();
        if merged.instance.vertex_count() == 0 {
            continue;
        }
        let merged_slow =
            oracle::stabilize_naive(&merged.instance, u64::MAX, FiringOrder::LowestId).unwrap();
        for (core, &orig) in merged.core_to_original.iter().enumerate() {
            assert_eq!(
                merged_slow.config.as_ref().unwrap().chips(core),
                slow.config.as_ref().unwrap().chips(orig)
            );
            assert_eq!(merged_slow.firings.count(core), slow.firings.count(orig));
        }
    }
}

#[test]
fn delta_monotonicity_and_psi_decrease() {
    let mut rng = rng(0xde17a);
    for _ in 0..40 {
        let n = rng.gen_range(2..=12);
        let g = random_tree(n, &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=(n as u64 - 2)), &mut rng);
        let inst = instance(g.clone(), sigma, vec![]);
        for u in 1..n {
            let (subtree, _) = oracle::subtree_vertices(&g, 0, u).unwrap();
            let (local, _) = oracle::local_stabilize(&inst, &subtree).unwrap();
            let deltas: Vec<u64> = (0..=21)
                .map(|k| oracle::delta_bruteforce(&g, 0, &local, u, k).unwrap())
                .collect();
            for k in 0..21 {
                assert!(deltas[k] <= deltas[k + 1], "delta not monotone");
                assert!(deltas[k + 1] <= deltas[k] + 1, "delta jumped by more than 1");
            }
            // psi(k) = sigma_u - k*degree(u) + sum of child deltas at k is
            // non-increasing; check through the children of u.
            let children: Vec<usize> = {
                let (sub_u, _) = oracle::subtree_vertices(&g, 0, u).unwrap();
                sub_u
                    .iter()
                    .copied()
                    .filter(|&v| v != u && g.neighbors(u).contains(&(v as u32)))
                    .collect()
            };
            let mut prev: Option<i128> = None;
            for k in 0..=20i128 {
                let mut psi = local.chips(u) as i128 - k * g.degree(u) as i128;
                for &v in &children {
                    psi += oracle::delta_bruteforce(&g, 0, &local, v, k as u64).unwrap() as i128;
                }
                if let Some(p) = prev {
                    assert!(psi <= p, "psi increased");
                }
                prev = Some(psi);
            }
        }
    }
}

#[test]
fn solver_outputs_satisfy_least_action() {
    let mut rng = rng(0x1ea57);
    for _ in 0..100 {
        let n = rng.gen_range(2..=40);
        let g = random_tree(n, &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=(n as u64 - 2)), &mut rng);
        let r = solve_tree(&g, &sigma).unwrap();
        if r.status != Status::Terminal {
            continue;
        }
        let c = r.firings.as_slice();
        assert!(check_feasible(&g, &sigma, c, &[]), "firing vector infeasible");
        // Shifting the whole vector up stays feasible.
        for t in 1..=3u64 {
            let shifted: Vec<u64> = c.iter().map(|&x| x + t).collect();
            assert!(check_feasible(&g, &sigma, &shifted, &[]));
        }
        // Minimality: decrementing any positive entry alone breaks
        // feasibility.
        for u in 0..n {
            if c[u] > 0 {
                let mut lowered = c.to_vec();
                lowered[u] -= 1;
                assert!(
                    !check_feasible(&g, &sigma, &lowered, &[]),
                    "lowered vector still feasible at {u}"
                );
            }
        }
    }
}

#[test]
fn removal_threshold_is_monotone() {
    // For the removed vertex p, the search predicate accepts exactly the
    // trial values at or above the true firing number.
    let mut rng = rng(0x7478_0001);
    for _ in 0..40 {
        let n = rng.gen_range(3..=14);
        let g = random_pseudotree(n, &mut rng);
        let sigma = scatter_chips(n, rng.gen_range(0..=(n as u64)), &mut rng);
        let inst = instance(g.clone(), sigma, vec![]);
        let slow = oracle::stabilize_naive(
            &inst,
            oracle::default_firing_cap(n),
            FiringOrder::LowestId,
        )
        .unwrap();
        if slow.status != Status::Terminal {
            continue;
        }
        let p = rng.gen_range(0..n);
        let truth = slow.firings.count(p);
        for mid in truth.saturating_sub(3)..=truth + 3 {
            let accepted = removal_trial_accepts(&inst, p, mid);
            assert_eq!(accepted, mid >= truth, "mid {mid} truth {truth}");
        }
    }
}

/// Reproduces one binary-search trial: fire p `mid` times, make p a sink,
/// solve the rest exactly, then test p's inequality.
fn removal_trial_accepts(inst: &SandpileInstance, p: usize, mid: u64) -> bool {
    let g = &inst.graph;
    let n = g.vertex_count();
    let mut chips = inst.config.as_slice().to_vec();
    for &v in g.neighbors(p) {
        chips[v as usize] += mid;
    }
    let pushed = SandpileInstance::new(g.clone(), Configuration::new(chips), vec![p]);
    let sub = oracle::stabilize_naive(&pushed, u64::MAX, FiringOrder::LowestId).unwrap();
    let mut f = vec![0u64; n];
    for u in 0..n {
        if u != p {
            f[u] = sub.firings.count(u);
        }
    }
    let degree = g.degree(p) as i128;
    let mut lhs = inst.config.chips(p) as i128 - mid as i128 * degree;
    for &v in g.neighbors(p) {
        lhs += f[v as usize] as i128;
    }
    lhs < degree
}

#[test]
fn bounded_firing_vectors_are_monotone_in_chips() {
    let mut rng = rng(0x09_0901);
    for _ in 0..40 {
        let n = rng.gen_range(2..=30);
        let g = random_connected(n, rng.gen_range(0..n), &mut rng);
        let sigma_lo = scatter_chips(n, rng.gen_range(0..=60), &mut rng);
        let bump = scatter_chips(n, rng.gen_range(0..=30), &mut rng);
        let sigma_hi = Configuration::new(
            (0..n)
                .map(|u| sigma_lo.chips(u) + bump.chips(u))
                .collect(),
        );
        let sink = rng.gen_range(0..n);
        let lo = instance(g.clone(), sigma_lo, vec![sink])
            .merge_sinks()
            .unwrap();
        let hi = instance(g, sigma_hi, vec![sink]).merge_sinks().unwrap();
        let f_lo = stabilize_greedy(&lo.instance).unwrap().firing_vector;
        let f_hi = stabilize_greedy(&hi.instance).unwrap().firing_vector;
        for u in 0..lo.instance.vertex_count() {
            assert!(f_lo.count(u) <= f_hi.count(u), "firing vector not monotone");
        }
    }
}

#[test]
fn removal_overflow_matches_oracle_recurrence() {
    let mut rng = rng(0x0f_1071);
    for _ in 0..30 {
        let n = rng.gen_range(3..=16);
        let g = random_pseudotree(n, &mut rng);
        let m = g.edge_count();
        if m + 1 == n {
            continue; // trees go to the tree solver, not the removal search
        }
        let sigma = scatter_chips(n, rng.gen_range(0..=(2 * m as u64 + 2)), &mut rng);
        let inst = instance(g.clone(), sigma, vec![]);
        let slow = oracle::stabilize_naive(
            &inst,
            oracle::default_firing_cap(n),
            FiringOrder::LowestId,
        )
        .unwrap();
        let cycle = reduction::pseudotree_cycle(&g).unwrap();
        let fast = solve_by_removal(&inst, &[cycle[0]], &reduction::default_subsolver).unwrap();
        assert_eq!(fast.status, slow.status);
    }
}

#[test]
fn solve_bounded_low_cap_overflows() {
    // With the firing cap pinned below the true count the search must give
    // up rather than fabricate a vector.
    let g = cycle_graph(3);
    let inst = instance(g, Configuration::new(vec![2, 0, 0]), vec![]);
    let slow = oracle::stabilize_naive(&inst, 81 + 1, FiringOrder::LowestId).unwrap();
    assert_eq!(slow.status, Status::Terminal);
    let needed = slow.firings.as_slice().iter().max().copied().unwrap();
    assert!(needed >= 1);
    let problem = BoundedProblem {
        instance: inst.clone(),
        chip_budget: inst.config.total(),
        firing_cap: (needed - 1) as u128,
    };
    let r = reduction::solve_bounded(&problem, 0, &reduction::default_subsolver).unwrap();
    assert_eq!(r, reduction::BoundedResult::Overflow);
    // And with the honest cap it matches the oracle.
    let problem = BoundedProblem {
        instance: inst.clone(),
        chip_budget: inst.config.total(),
        firing_cap: 81,
    };
    match reduction::solve_bounded(&problem, 0, &reduction::default_subsolver).unwrap() {
        reduction::BoundedResult::Solved { config, firings } => {
            assert_eq!(Some(config), slow.config);
            assert_eq!(firings, slow.firings);
        }
        reduction::BoundedResult::Overflow => panic!("unexpected overflow"),
    }
}

#[test]
fn path_revert_count_bookkeeping() {
    // Across path_revert, count + store size changes by exactly
    // |popped| - inserted: the update's insertions are undone (physically or
    // out of the aggregate) and the popped run comes back exactly once.
    let build = || {
        // Children pairs {2, 4, 6}; compute with sigma 9, degree 3 pops
        // {2, 4} and settles on c_down = 5; the update leaves {1, 3}.
        let mut f = StoreFamily::new(1);
        for &m in &[2, 4, 6] {
            let x = f.new_node(m, 3);
            f.insert(0, x);
        }
        let mut popped = Vec::new();
        let k = f.compute_c_down(0, 9, 3, false, &mut popped);
        assert_eq!(k, 5);
        assert_eq!(popped.len(), 2);
        let inserted = f.update_store(0, 1, 3, k, 7);
        assert_eq!(inserted, 1);
        assert_eq!(f.moments(0), vec![1, 3]);
        (f, popped, k, inserted)
    };

    // Branch 1: the aggregated prefix covers the inserted node.
    let (mut f, popped, k, inserted) = build();
    let aggregated = f.path_query(0, 1);
    assert_eq!(aggregated, 1);
    let count_before = aggregated;
    let size_before = f.store_size(0) as i64;
    let count_after = f.path_revert(0, k, inserted, count_before, &popped);
    assert_eq!(f.moments(0), vec![2, 4, 6], "children pairs restored");
    assert_eq!(
        count_after + f.store_size(0) as i64,
        count_before + size_before + popped.len() as i64 - i64::from(inserted)
    );

    // Branch 2: nothing aggregated, the inserted node is deleted physically.
    let (mut f, popped, k, inserted) = build();
    let size_before = f.store_size(0) as i64;
    let count_after = f.path_revert(0, k, inserted, 0, &popped);
    assert_eq!(f.moments(0), vec![2, 4, 6]);
    assert_eq!(
        count_after + f.store_size(0) as i64,
        size_before + popped.len() as i64 - i64::from(inserted)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_format_roundtrip(n in 1usize..12, seed in 0u64..5000) {
        let mut rng = rng(seed);
        let g = random_connected(n, seed as usize % (n + 1), &mut rng);
        let sigma = scatter_chips(n, seed % 50, &mut rng);
        let sinks = if n > 1 && seed % 3 == 0 { vec![(seed as usize) % n] } else { vec![] };
        let inst = instance(g, sigma, sinks);
        let text = sandpile_core::format::write_instance(&inst);
        let parsed = sandpile_core::format::parse_instance(&text).unwrap();
        prop_assert_eq!(inst, parsed);
    }

    #[test]
    fn store_moments_stay_sorted_and_match_model(
        moments in proptest::collection::vec(0i64..50, 0..24),
        ops in proptest::collection::vec((0i64..3, -5i64..5), 0..8),
    ) {
        // Drive the lazy store and an eager model through the same
        // rank-affine updates; dumps must agree and stay non-decreasing.
        let mut f = StoreFamily::new(1);
        let mut model: Vec<i64> = Vec::new();
        let mut sorted = moments.clone();
        sorted.sort_unstable();
        for &m in &sorted {
            let x = f.new_node(m, 1);
            f.insert(0, x);
            model.push(m);
        }
        for &(a, b) in &ops {
            f.inc_time_root(0, a, b);
            for (i, v) in model.iter_mut().enumerate() {
                *v += (i as i64 + 1) * a + b;
            }
            // Exercise a search to force partial tag pushes.
            let _ = f.delta_query(0, 10);
        }
        let dumped = f.moments(0);
        prop_assert_eq!(&dumped, &model);
        for w in dumped.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        // delta_query agrees with the counting definition.
        for k in [0i64, 3, 17, 60] {
            let expect = k - model.iter().filter(|&&m| m <= k).count() as i64;
            prop_assert_eq!(f.delta_query(0, k), expect);
        }
    }
}
