use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpdg_cli::commands::{bounds, data, sweep, train, verify};
use dpdg_cli::config::{output_dir, read_json, read_sweep_file, read_train_file, GenFile};
use dpdg_cli::{CliError, CliResult};
use dpdg_core::data::ColumnSchema;
use dpdg_core::mechanisms::VerifyOptions;

/// Differentially private training, distributional generalization and the bounds connecting them.
///
/// Relative output paths are placed under $DPDG_OUT_ROOT when it is set;
/// $DPDG_THREADS caps the sweep worker pool.
#[derive(Parser)]
#[command(name = "dpdg", version = dpdg_cli::provenance::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the loose, CMI and tight DG bounds over an ε grid.
    Bounds(BoundsArgs),
    /// Run the claim suite on exactly solvable mechanisms and toy learners.
    Verify(VerifyArgs),
    /// Train one configuration for each listed seed.
    Train(RunArgs),
    /// Train a grid of configurations over seeds and aggregate the results.
    Sweep(RunArgs),
    /// Generate or inspect datasets.
    #[command(subcommand)]
    Data(DataCommand),
}

#[derive(Args)]
struct BoundsArgs {
    /// Largest ε of the evenly spaced grid starting at 0.
    #[arg(long, default_value_t = 5.0)]
    eps_max: f64,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 100)]
    eps_points: usize,
    /// Explicit ε values; replaces the evenly spaced grid.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1")]
    delta: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo trials per estimated claim.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Scales ε on the budget side of the tightness claims (mutation testing).
    #[arg(long, default_value_t = 1.0, hide = true)]
    tightness_eps_scale: f64,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides the file's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DataCommand {
    /// Draw a synthetic group mixture into a CSV.
    Gen {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print shape, group and label counts of a CSV as JSON.
    Inspect {
        path: PathBuf,
        /// Column roles; defaults to the `f0.., label, group` layout.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bounds(a) => {
            let eps = if a.eps.is_empty() {
                if a.eps_points == 0 {
                    return Err(CliError::config("--eps-points must be at least 1"));
                }
                bounds::linear_grid(a.eps_max, a.eps_points)
            } else {
                a.eps
            };
            let params = bounds::BoundsParams {
                eps,
                deltas: a.delta,
            };
            let dir = output_dir(a.out.as_deref(), None, "bounds");
            let rows = bounds::run_bounds(&params, &dir)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                dir.join("bounds.csv").display()
            );
        }
        Command::Verify(a) => {
            let opts = VerifyOptions {
                seed: a.seed,
                trials: a.trials,
                tightness_eps_scale: a.tightness_eps_scale,
            };
            let dir = output_dir(a.out.as_deref(), None, "verify");
            let report = verify::run_verify(&opts, Some(&dir))?;
            for c in &report.claims {
                println!(
                    "{:<5} {:<22} lhs {:.6e}  rhs {:.6e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.id,
                    c.lhs,
                    c.rhs
                );
            }
            if let Some(e) = verify::first_failure_error(&report) {
                return Err(e);
            }
        }
        Command::Train(a) => {
            let file = read_train_file(&a.config)?;
            let dir = output_dir(a.out.as_deref(), file.out.as_deref(), "train");
            for (path, rec) in train::run_train(&file, &dir)? {
                let last = rec.last();
                let test_acc = last.test.as_ref().map(|t| t.accuracy);
                print!("seed {}: train acc {:.4}", rec.seed, last.train.accuracy);
                if let Some(t) = test_acc {
                    print!(", test acc {t:.4}");
                }
                if let Some(p) = &rec.privacy {
                    print!(", eps {:.4} at delta {:.3e}", p.budget.eps, p.budget.delta);
                }
                println!(" -> {}", path.display());
            }
        }
        Command::Sweep(a) => {
            let file = read_sweep_file(&a.config)?;
            let dir = output_dir(a.out.as_deref(), file.out.as_deref(), "sweep");
            let result = sweep::run_sweep(&file, &dir)?;
            println!("{} cells -> {}", result.cells.len(), dir.display());
        }
        Command::Data(DataCommand::Gen { config, out }) => {
            let file: GenFile = read_json(&config)?;
            let ds = data::run_gen(&file, &out)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Data(DataCommand::Inspect { path, schema }) => {
            let schema: Option<ColumnSchema> = match schema {
                Some(p) => Some(read_json(&p)?),
                None => None,
            };
            let summary = data::run_inspect(&path, schema)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary)
                    .map_err(|e| CliError::data(e.to_string()))?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpdg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
