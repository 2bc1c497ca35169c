//! `bregman`: run experiment specs, the verification sweeps, or list the
//! built-in instances.

use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use bregman_core::harness::{run_experiment, verify_suite_with, ExperimentSpec, VerifyOptions, CATALOG};
use bregman_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bregman",
    version,
    about = "Bregman projection and equilibrium solver harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment specs; independent specs run in parallel.
    Run {
        /// Experiment spec (JSON). Repeat for several runs.
        #[arg(long = "spec", required = true)]
        specs: Vec<PathBuf>,
        /// Overrides the seed of every spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the iteration cap of every spec.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output root; each run writes to `<out>/<name>/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity and inequality sweeps and print a JSON report.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per geometry sweep.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Iterations of each solver run in the solver sweeps.
        #[arg(long, default_value_t = 1000)]
        solver_iters: usize,
        /// Adds a non-monotone bifunction; its axiom sweep must fail.
        #[arg(long)]
        inject_invalid: bool,
    },
    /// List the built-in problem instances.
    ListInstances,
}

/// Process exit status for an error: 2 for bad input, 3 for numerical failure, 4 for I/O.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Validation(_) | Error::Argument(_) => 2,
        Error::Convergence { .. } | Error::Domain(_) | Error::Infeasible(_) => 3,
        Error::Io { .. } => 4,
        Error::AtIteration { .. } => unreachable!("root() strips iteration tags"),
    }
}

fn run(specs: &[PathBuf], seed: Option<u64>, max_iters: Option<usize>, out: Option<PathBuf>) -> u8 {
    let outcomes: Vec<Result<String, Error>> = thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|path| {
                let out = out.clone();
                scope.spawn(move || {
                    let mut spec = ExperimentSpec::load(path)?;
                    if let Some(s) = seed {
                        spec.seed = s;
                    }
                    if let Some(n) = max_iters {
                        spec.config.max_iters = Some(n);
                    }
                    let (summary, artifacts) = run_experiment(&spec, out.as_deref())?;
                    Ok(format!(
                        "{}: {} iterations, converged {}, artifacts in {}",
                        summary.name,
                        summary.iterations,
                        summary.converged,
                        artifacts.dir.display()
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut code = 0;
    for (path, outcome) in specs.iter().zip(outcomes) {
        match outcome {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = code.max(exit_code(&e));
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            specs,
            seed,
            max_iters,
            out,
        } => run(&specs, seed, max_iters, out),
        Command::Verify {
            seed,
            samples,
            solver_iters,
            inject_invalid,
        } => {
            let report = verify_suite_with(&VerifyOptions {
                seed,
                samples,
                solver_iters,
                inject_invalid,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            for entry in report.failures() {
                eprintln!(
                    "FAIL {} (worst {:e}, threshold {:e})",
                    entry.name, entry.worst, entry.threshold
                );
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Command::ListInstances => {
            for info in CATALOG {
                println!(
                    "{:<22} default d={:<3} min d={:<3} {}",
                    info.name, info.default_dim, info.min_dim, info.summary
                );
            }
            0
        }
    };
    ExitCode::from(code)
}
