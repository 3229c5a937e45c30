use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sandpile_cli::families::Family;
use sandpile_cli::{cmd_bench, cmd_check, cmd_solve, CliError, SolverKind, BENCH_HEADER};

#[derive(Parser)]
#[command(name = "sandpile", about = "Chip-firing terminal-configuration solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and print the report.
    Solve {
        input: PathBuf,
        /// auto|tree|path|clique|greedy|pseudotree|oracle|removal
        #[arg(long, default_value = "auto")]
        solver: String,
        /// Random firing order seed for the oracle solver (0 = lowest-id).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit per-iteration trace CSV (greedy runs) on stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Run every applicable solver plus the oracle and compare.
    Check {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra random-order oracle runs.
        #[arg(long, default_value_t = 8)]
        trials: u32,
    },
    /// Generate instance families and time the solvers; writes CSV.
    Bench {
        /// path|random-tree|clique|regular|hypercube
        #[arg(long)]
        family: String,
        /// Vertex counts (hypercube: dimensions), comma-separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Degree for the regular family.
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per size.
        #[arg(long, default_value_t = 1)]
        trials: u32,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            input,
            solver,
            seed,
            trace,
        } => {
            let kind = SolverKind::parse(&solver)?;
            let (report, trace_csv) = cmd_solve(&input, kind, seed, trace)?;
            print!("{report}");
            if !trace_csv.is_empty() {
                eprint!("{trace_csv}");
            }
            Ok(())
        }
        Command::Check {
            input,
            seed,
            trials,
        } => {
            let message = cmd_check(&input, seed, trials)?;
            print!("{message}");
            Ok(())
        }
        Command::Bench {
            family,
            sizes,
            degree,
            seed,
            trials,
            out,
        } => {
            let family = Family::parse(&family).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows = cmd_bench(family, &sizes, degree, seed, trials)?;
            let mut csv = String::from(BENCH_HEADER);
            csv.push('\n');
            for row in rows {
                csv.push_str(&row.to_csv());
                csv.push('\n');
            }
            match out {
                Some(path) => {
                    let mut file = std::fs::File::create(path)?;
                    file.write_all(csv.as_bytes())?;
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
