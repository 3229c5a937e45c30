//! The common result shape returned by the oracle and every exact solver.

use crate::graph::{Configuration, FiringVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Terminal,
    Recurrent,
}

/// Outcome of a stabilization: a terminal configuration with its firing
/// vector, or a recurrence verdict. `firings` on a recurrent result holds
/// whatever counts were accumulated before the verdict and carries no
/// meaning beyond diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: Status,
    pub config: Option<Configuration>,
    pub firings: FiringVector,
    pub total_firings: u64,
}

impl SolveResult {
    pub fn terminal(config: Configuration, firings: FiringVector) -> SolveResult {
        let total = firings.total().min(u64::MAX as u128) as u64;
        SolveResult {
            status: Status::Terminal,
            config: Some(config),
            firings,
            total_firings: total,
        }
    }

    pub fn recurrent(firings: FiringVector, total_firings: u64) -> SolveResult {
        SolveResult {
            status: Status::Recurrent,
            config: None,
            firings,
            total_firings,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.status == Status::Terminal
    }
}
