//! The solve report printed on standard output, with a lossless text
//! round-trip.

use std::fmt;

use sandpile_core::result::Status;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveReport {
    pub status: Status,
    pub config: Option<Vec<u64>>,
    pub firings: Option<Vec<u64>>,
    pub solver: String,
    pub wall_ns: u128,
    /// Batched iterations; greedy runs only.
    pub iterations: Option<u64>,
    /// Chips swallowed by sinks; sink runs only.
    pub absorbed: Option<u64>,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            Status::Terminal => writeln!(f, "status terminal")?,
            Status::Recurrent => writeln!(f, "status recurrent")?,
        }
        if let Some(config) = &self.config {
            writeln!(f, "config {}", join(config))?;
        }
        if let Some(firings) = &self.firings {
            writeln!(f, "firings {}", join(firings))?;
        }
        writeln!(f, "solver {}", self.solver)?;
        writeln!(f, "wall_ns {}", self.wall_ns)?;
        if let Some(iterations) = self.iterations {
            writeln!(f, "iterations {}", iterations)?;
        }
        if let Some(absorbed) = self.absorbed {
            writeln!(f, "absorbed {}", absorbed)?;
        }
        Ok(())
    }
}

fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl SolveReport {
    pub fn parse(text: &str) -> Option<SolveReport> {
        let mut status = None;
        let mut config = None;
        let mut firings = None;
        let mut solver = None;
        let mut wall_ns = None;
        let mut iterations = None;
        let mut absorbed = None;
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            let key = match parts.next() {
                Some(k) => k,
                None => continue,
            };
            match key {
                "status" => {
                    status = Some(match parts.next()? {
                        "terminal" => Status::Terminal,
                        "recurrent" => Status::Recurrent,
                        _ => return None,
                    })
                }
                "config" => config = Some(numbers(parts)?),
                "firings" => firings = Some(numbers(parts)?),
                "solver" => solver = Some(parts.next()?.to_string()),
                "wall_ns" => wall_ns = Some(parts.next()?.parse().ok()?),
                "iterations" => iterations = Some(parts.next()?.parse().ok()?),
                "absorbed" => absorbed = Some(parts.next()?.parse().ok()?),
                _ => return None,
            }
        }
        Some(SolveReport {
            status: status?,
            config,
            firings,
            solver: solver?,
            wall_ns: wall_ns?,
            iterations,
            absorbed,
        })
    }
}

fn numbers(parts: std::str::SplitWhitespace<'_>) -> Option<Vec<u64>> {
    parts.map(|p| p.parse().ok()).collect()
}
