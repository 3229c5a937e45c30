//! O(n) clique solver: drain oversized piles with a firing-counter offset,
//! then walk descending buckets firing each vertex at most once.
//!
//! A clique instance terminates iff it needs at most n - 2 firings, so the
//! whole run either finishes within that budget or proves recurrence the
//! moment the counter reaches n - 1.

use thiserror::Error;

use crate::graph::{Configuration, FiringVector};
use crate::result::SolveResult;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CliqueError {
    #[error("clique solver needs at least 2 vertices")]
    TooSmall,
}

/// Solves a sandpile on the complete graph K_n given just the configuration.
pub fn solve_clique(sigma: &Configuration) -> Result<SolveResult, CliqueError> {
    let n = sigma.len();
    if n < 2 {
        return Err(CliqueError::TooSmall);
    }
    let full = (n - 1) as i64;
    let budget = (n - 1) as u64;
    // Actual chips on u are shifted[u] + count: a firing costs n - 1 chips
    // and u misses the count bump everyone else gets, hence -n per firing.
    let mut shifted: Vec<i64> = sigma.as_slice().iter().map(|&c| c as i64).collect();
    let mut count: u64 = 0;
    let mut fires = vec![0u64; n];

    let recurrent = |fires: Vec<u64>, count: u64| Ok(SolveResult::recurrent(FiringVector::new(fires), count));

    // Phase 1: batch-drain every vertex below the firing threshold.
    for u in 0..n {
        if shifted[u] >= full {
            let want = ((shifted[u] - full) / n as i64 + 1) as u64;
            let allowed = budget - count;
            let batch = want.min(allowed);
            shifted[u] -= batch as i64 * n as i64;
            count += batch;
            fires[u] += batch;
            if count >= budget {
                return recurrent(fires, count);
            }
        }
    }

    // Phase 2: bucket by the drained value (0..n-1); vertices fired in
    // phase 1 can sit at -1 and stay out, since count <= n - 2 keeps them
    // below the threshold for good.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n.max(1) - 1];
    for u in 0..n {
        if shifted[u] >= 0 {
            debug_assert!(shifted[u] < full);
            buckets[shifted[u] as usize].push(u as u32);
        } else {
            debug_assert_eq!(shifted[u], -1);
        }
    }
    for j in (1..buckets.len()).rev() {
        for idx in 0..buckets[j].len() {
            let u = buckets[j][idx] as usize;
            if shifted[u] + count as i64 >= full {
                shifted[u] -= n as i64;
                count += 1;
                fires[u] += 1;
                if count >= budget {
                    return recurrent(fires, count);
                }
            }
        }
    }

    let chips: Vec<u64> = shifted
        .iter()
        .map(|&s| {
            let c = s + count as i64;
            debug_assert!(c >= 0);
            c as u64
        })
        .collect();
    Ok(SolveResult::terminal(
        Configuration::new(chips),
        FiringVector::new(fires),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::result::Status;

    #[test]
    fn k4_single_pile() {
        let r = solve_clique(&Configuration::new(vec![5, 0, 0, 0])).unwrap();
        assert_eq!(r.status, Status::Terminal);
        assert_eq!(r.config.as_ref().unwrap().as_slice(), &[2, 1, 1, 1]);
        assert_eq!(r.total_firings, 1);
    }

    #[test]
    fn k3_rotating_recurrence() {
        let r = solve_clique(&Configuration::new(vec![2, 1, 0])).unwrap();
        assert_eq!(r.status, Status::Recurrent);
    }

    #[test]
    fn k3_already_terminal() {
        let r = solve_clique(&Configuration::new(vec![1, 1, 1])).unwrap();
        assert_eq!(r.status, Status::Terminal);
        assert_eq!(r.config.as_ref().unwrap().as_slice(), &[1, 1, 1]);
        assert_eq!(r.total_firings, 0);
    }

    #[test]
    fn rejects_single_vertex() {
        assert_eq!(
            solve_clique(&Configuration::new(vec![0])).unwrap_err(),
            CliqueError::TooSmall
        );
    }

    #[test]
    fn big_pile_batches_in_one_go() {
        // One vertex holding a huge pile must not loop chip by chip.
        let n = 5;
        let big = 1_000_000_007u64;
        let r = solve_clique(&Configuration::new(vec![big, 0, 0, 0, 0])).unwrap();
        // Whatever the verdict, phase 1 must have consumed the pile.
        assert_eq!(r.status, Status::Recurrent);
        assert!(r.total_firings >= (n - 1) as u64);
    }
}
