//! Command implementations behind the `sandpile` binary: solve, check and
//! bench, all file-driven.

pub mod families;
pub mod report;

use std::time::Instant;

use thiserror::Error;

use sandpile_core::clique::solve_clique;
use sandpile_core::format;
use sandpile_core::graph::SandpileInstance;
use sandpile_core::greedy;
use sandpile_core::oracle::{self, FiringOrder};
use sandpile_core::path::solve_path;
use sandpile_core::reduction;
use sandpile_core::result::{SolveResult, Status};
use sandpile_core::tree::solve_tree;

use families::Family;
use report::SolveReport;

/// Exit code contract: 0 ok, 1 mismatch, 2 usage or parse error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("solver {0} cannot handle this input shape")]
    SolverMismatch(String),
    #[error("instance too large for the oracle (needs n <= 500 and total chips <= 100000)")]
    TooLargeForOracle,
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Auto,
    Tree,
    Path,
    Clique,
    Greedy,
    Pseudotree,
    Oracle,
    Removal,
}

impl SolverKind {
    pub fn parse(name: &str) -> Result<SolverKind, CliError> {
        Ok(match name {
            "auto" => SolverKind::Auto,
            "tree" => SolverKind::Tree,
            "path" => SolverKind::Path,
            "clique" => SolverKind::Clique,
            "greedy" => SolverKind::Greedy,
            "pseudotree" => SolverKind::Pseudotree,
            "oracle" => SolverKind::Oracle,
            "removal" => SolverKind::Removal,
            other => return Err(CliError::Usage(format!("unknown solver {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Auto => "auto",
            SolverKind::Tree => "tree",
            SolverKind::Path => "path",
            SolverKind::Clique => "clique",
            SolverKind::Greedy => "greedy",
            SolverKind::Pseudotree => "pseudotree",
            SolverKind::Oracle => "oracle",
            SolverKind::Removal => "removal",
        }
    }
}

/// Structure-based dispatch for `--solver auto`.
pub fn detect_solver(instance: &SandpileInstance) -> SolverKind {
    let g = &instance.graph;
    if instance.has_sinks() {
        SolverKind::Greedy
    } else if g.is_canonical_path() {
        SolverKind::Path
    } else if g.is_tree() {
        SolverKind::Tree
    } else if g.is_clique() {
        SolverKind::Clique
    } else if g.is_pseudotree() {
        SolverKind::Pseudotree
    } else if g.vertex_count() <= 12 {
        SolverKind::Oracle
    } else {
        SolverKind::Removal
    }
}

fn solve_result_report(result: SolveResult, solver: &str, wall_ns: u128) -> SolveReport {
    SolveReport {
        status: result.status,
        config: result.config.map(|c| c.as_slice().to_vec()),
        firings: match result.status {
            Status::Terminal => Some(result.firings.as_slice().to_vec()),
            Status::Recurrent => None,
        },
        solver: solver.to_string(),
        wall_ns,
        iterations: None,
        absorbed: None,
    }
}

/// Runs one named solver on a validated instance. Greedy trace rows, when
/// requested, are returned alongside the report.
pub fn run_solver(
    instance: &SandpileInstance,
    kind: SolverKind,
    seed: u64,
    trace: bool,
) -> Result<(SolveReport, Vec<greedy::IterationTrace>), CliError> {
    let g = &instance.graph;
    let n = g.vertex_count();
    let kind = if kind == SolverKind::Auto {
        detect_solver(instance)
    } else {
        kind
    };
    let mismatch = || CliError::SolverMismatch(kind.name().to_string());
    let started = Instant::now();
    let mut trace_rows = Vec::new();
    let report = match kind {
        SolverKind::Auto => unreachable!("resolved above"),
        SolverKind::Tree => {
            if instance.has_sinks() {
                return Err(mismatch());
            }
            let r = solve_tree(g, &instance.config).map_err(|_| mismatch())?;
            solve_result_report(r, "tree", started.elapsed().as_nanos())
        }
        SolverKind::Path => {
            if instance.has_sinks() {
                return Err(mismatch());
            }
            let r = solve_path(g, &instance.config).map_err(|_| mismatch())?;
            solve_result_report(r, "path", started.elapsed().as_nanos())
        }
        SolverKind::Clique => {
            if instance.has_sinks() || !g.is_clique() {
                return Err(mismatch());
            }
            let r = solve_clique(&instance.config).map_err(|_| mismatch())?;
            solve_result_report(r, "clique", started.elapsed().as_nanos())
        }
        SolverKind::Pseudotree => {
            let r = reduction::solve_pseudotree(instance).map_err(|_| mismatch())?;
            solve_result_report(r, "pseudotree", started.elapsed().as_nanos())
        }
        SolverKind::Removal => {
            if instance.has_sinks() || n < 2 {
                return Err(mismatch());
            }
            let p = (0..n).max_by_key(|&u| (g.degree(u), std::cmp::Reverse(u))).unwrap();
            let r = reduction::solve_by_removal(instance, &[p], &reduction::default_subsolver)
                .map_err(|e| CliError::Parse(e.to_string()))?;
            solve_result_report(r, "removal", started.elapsed().as_nanos())
        }
        SolverKind::Oracle => {
            let order = if seed == 0 {
                FiringOrder::LowestId
            } else {
                FiringOrder::RandomSeeded(seed)
            };
            let cap = if instance.has_sinks() {
                u64::MAX
            } else {
                oracle::default_firing_cap(n)
            };
            let r = oracle::stabilize_naive(instance, cap, order)
                .map_err(|e| CliError::Parse(e.to_string()))?;
            solve_result_report(r, "oracle", started.elapsed().as_nanos())
        }
        SolverKind::Greedy => {
            if instance.sinks.is_empty() && g.total_sink_multiplicity() == 0 {
                return Err(mismatch());
            }
            let (report, rows) = run_greedy(instance, trace, started)?;
            trace_rows = rows;
            report
        }
    };
    Ok((report, trace_rows))
}

/// Merges sinks, runs the simulator, and maps the core results back onto the
/// original vertex ids (sinks keep their initial chips and never fire).
fn run_greedy(
    instance: &SandpileInstance,
    trace: bool,
    started: Instant,
) -> Result<(SolveReport, Vec<greedy::IterationTrace>), CliError> {
    let n = instance.vertex_count();
    let (merged, core_to_original) = if instance.sinks.is_empty() {
        // Already in merged form.
        (instance.clone(), (0..n).collect::<Vec<_>>())
    } else {
        let m = instance
            .merge_sinks()
            .map_err(|e| CliError::Parse(e.to_string()))?;
        (m.instance, m.core_to_original)
    };
    let mut config: Vec<u64> = instance.config.as_slice().to_vec();
    let mut firings = vec![0u64; n];
    let (result, rows) = if merged.vertex_count() == 0 {
        (None, Vec::new())
    } else if trace {
        let (r, rows) = greedy::stabilize_greedy_traced(&merged)
            .map_err(|e| CliError::Parse(e.to_string()))?;
        (Some(r), rows)
    } else {
        let r = greedy::stabilize_greedy(&merged).map_err(|e| CliError::Parse(e.to_string()))?;
        (Some(r), Vec::new())
    };
    let (iterations, absorbed) = match &result {
        Some(r) => {
            for (core, &orig) in core_to_original.iter().enumerate() {
                config[orig] = r.terminal_config.chips(core);
                firings[orig] = r.firing_vector.count(core);
            }
            (r.iterations, r.absorbed)
        }
        None => (0, 0),
    };
    let report = SolveReport {
        status: Status::Terminal,
        config: Some(config),
        firings: Some(firings),
        solver: "greedy".to_string(),
        wall_ns: started.elapsed().as_nanos(),
        iterations: Some(iterations),
        absorbed: Some(absorbed),
    };
    Ok((report, rows))
}

pub fn load_instance(path: &std::path::Path) -> Result<SandpileInstance, CliError> {
    let text = std::fs::read_to_string(path)?;
    let instance = format::parse_instance(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    instance
        .validate()
        .map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(instance)
}

/// `solve` command: returns (stdout report, stderr trace CSV).
pub fn cmd_solve(
    path: &std::path::Path,
    solver: SolverKind,
    seed: u64,
    trace: bool,
) -> Result<(String, String), CliError> {
    let instance = load_instance(path)?;
    let (report, rows) = run_solver(&instance, solver, seed, trace)?;
    let mut trace_out = String::new();
    if trace {
        trace_out.push_str("vertex,batch,remaining\n");
        for row in rows {
            trace_out.push_str(&format!("{},{},{}\n", row.vertex + 1, row.batch, row.remaining));
        }
    }
    Ok((report.to_string(), trace_out))
}

/// One solver's verdict, normalized for comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub config: Option<Vec<u64>>,
    pub firings: Option<Vec<u64>>,
}

/// Cross-checks all verdicts against the first (the oracle); returns the
/// number of agreeing solvers or the first divergence, 1-based vertex id.
pub fn compare_verdicts(verdicts: &[Verdict]) -> Result<usize, String> {
    let base = &verdicts[0];
    for other in &verdicts[1..] {
        if other.status != base.status {
            return Err(format!(
                "{} says {:?} but {} says {:?}",
                base.name, base.status, other.name, other.status
            ));
        }
        if base.status != Status::Terminal {
            continue;
        }
        for (what, lhs, rhs) in [
            ("config", &base.config, &other.config),
            ("firings", &base.firings, &other.firings),
        ] {
            let (lhs, rhs) = (lhs.as_ref().unwrap(), rhs.as_ref().unwrap());
            if let Some(v) = (0..lhs.len()).find(|&v| lhs[v] != rhs[v]) {
                return Err(format!(
                    "{} and {} diverge on {} at vertex {}: {} vs {}",
                    base.name,
                    other.name,
                    what,
                    v + 1,
                    lhs[v],
                    rhs[v]
                ));
            }
        }
    }
    Ok(verdicts.len())
}

fn verdict_from_report(name: &str, report: &SolveReport) -> Verdict {
    Verdict {
        name: name.to_string(),
        status: report.status,
        config: report.config.clone(),
        firings: report.firings.clone(),
    }
}

/// Every solver whose shape precondition the instance satisfies.
pub fn applicable_solvers(instance: &SandpileInstance) -> Vec<SolverKind> {
    let g = &instance.graph;
    let mut kinds = Vec::new();
    if instance.has_sinks() {
        kinds.push(SolverKind::Greedy);
        return kinds;
    }
    if g.is_canonical_path() {
        kinds.push(SolverKind::Path);
    }
    if g.is_tree() {
        kinds.push(SolverKind::Tree);
    }
    if g.is_clique() {
        kinds.push(SolverKind::Clique);
    }
    if g.is_pseudotree() && g.edge_count() == g.vertex_count() {
        kinds.push(SolverKind::Pseudotree);
        kinds.push(SolverKind::Removal);
    }
    if kinds.is_empty() && g.vertex_count() >= 2 {
        kinds.push(SolverKind::Removal);
    }
    kinds
}

/// `check` command: differential run of the oracle (several firing orders)
/// plus every applicable solver.
pub fn cmd_check(path: &std::path::Path, seed: u64, trials: u32) -> Result<String, CliError> {
    let instance = load_instance(path)?;
    let n = instance.vertex_count();
    if n > 500 || instance.config.total() > 100_000 {
        return Err(CliError::TooLargeForOracle);
    }
    let cap = if instance.has_sinks() {
        u64::MAX
    } else {
        oracle::default_firing_cap(n)
    };
    let base = oracle::stabilize_naive(&instance, cap, FiringOrder::LowestId)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let mut verdicts = vec![Verdict {
        name: "oracle".into(),
        status: base.status,
        config: base.config.as_ref().map(|c| c.as_slice().to_vec()),
        firings: match base.status {
            Status::Terminal => Some(base.firings.as_slice().to_vec()),
            Status::Recurrent => None,
        },
    }];
    for t in 0..trials {
        let r = oracle::stabilize_naive(&instance, cap, FiringOrder::RandomSeeded(seed + t as u64))
            .map_err(|e| CliError::Parse(e.to_string()))?;
        verdicts.push(Verdict {
            name: format!("oracle-random-{t}"),
            status: r.status,
            config: r.config.as_ref().map(|c| c.as_slice().to_vec()),
            firings: match r.status {
                Status::Terminal => Some(r.firings.as_slice().to_vec()),
                Status::Recurrent => None,
            },
        });
    }
    let solver_count = 1 + applicable_solvers(&instance).len();
    for kind in applicable_solvers(&instance) {
        let (report, _) = run_solver(&instance, kind, 0, false)?;
        verdicts.push(verdict_from_report(kind.name(), &report));
    }
    match compare_verdicts(&verdicts) {
        Ok(_) => Ok(format!("PASS {solver_count} solvers agree\n")),
        Err(diff) => Err(CliError::Mismatch(format!("FAIL {diff}"))),
    }
}

/// One CSV row of the benchmark output.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub family: &'static str,
    pub n: usize,
    pub m: usize,
    pub total_chips: u128,
    pub solver: &'static str,
    pub wall_ns: u128,
    pub iterations: u64,
    pub firings: u128,
}

pub const BENCH_HEADER: &str = "family,n,m,N,solver,wall_ns,iterations,firings";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.family,
            self.n,
            self.m,
            self.total_chips,
            self.solver,
            self.wall_ns,
            self.iterations,
            self.firings
        )
    }
}

fn bench_solvers(family: Family) -> &'static [SolverKind] {
    match family {
        Family::Path => &[SolverKind::Path, SolverKind::Tree],
        Family::RandomTree => &[SolverKind::Tree],
        Family::Clique => &[SolverKind::Clique],
        Family::Regular | Family::Hypercube => &[SolverKind::Greedy],
    }
}

/// `bench` command: builds every (size, trial) instance of the family and
/// times each applicable solver on it. Trials run in parallel; rows come
/// back sorted for determinism.
pub fn cmd_bench(
    family: Family,
    sizes: &[usize],
    degree: usize,
    seed: u64,
    trials: u32,
) -> Result<Vec<BenchRow>, CliError> {
    use rayon::prelude::*;
    if sizes.is_empty() {
        return Err(CliError::Usage("bench needs at least one size".into()));
    }
    let jobs: Vec<(usize, u32)> = sizes
        .iter()
        .flat_map(|&s| (0..trials).map(move |t| (s, t)))
        .collect();
    let mut rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|&(size, trial)| -> Result<Vec<BenchRow>, CliError> {
            let instance =
                families::build_instance(family, size, degree, seed ^ (trial as u64) << 32 ^ size as u64)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut out = Vec::new();
            for &kind in bench_solvers(family) {
                let (report, _) = run_solver(&instance, kind, 0, false)?;
                out.push(BenchRow {
                    family: family.name(),
                    n: instance.vertex_count(),
                    m: instance.graph.edge_count(),
                    total_chips: instance.config.total(),
                    solver: kind.name(),
                    wall_ns: report.wall_ns,
                    iterations: report.iterations.unwrap_or(0),
                    firings: report
                        .firings
                        .as_ref()
                        .map(|f| f.iter().map(|&x| x as u128).sum())
                        .unwrap_or(0),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (a.n, a.solver, a.wall_ns)
            .cmp(&(b.n, b.solver, b.wall_ns))
    });
    Ok(rows)
}
