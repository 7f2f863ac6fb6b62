use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tfrecover::config::ExperimentConfig;
use tfrecover::runner;

#[derive(Parser)]
#[command(
    name = "tfrecover",
    about = "Recover frequency-response data from time-domain trajectories and fit reduced models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Thread-pool size (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override (sets both the system and the input seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured system and write it as JSON.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the configured trajectory to CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recover transfer-function values (and derivatives) from a trajectory.
    Recover {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a reduced model to recovered data.
    Rom {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a stored model over a unit-circle grid.
    Eval {
        /// System, descriptor-model, or fitted-model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        /// Output CSV path.
        #[arg(long, default_value = "sweep.csv")]
        output: PathBuf,
    },
    /// Run a named experiment and write figure data plus a summary.
    Repro {
        /// synthetic | heat | penzl | conditioning | windows | ordersweep
        experiment: String,
        /// Run at full scale instead of desk scale.
        #[arg(long)]
        full: bool,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> tfrecover::Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_file(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> tfrecover::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Generate { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let path = runner::cmd_generate(&cfg, &dir)?;
            println!("wrote {}", path.display());
        }
        Command::Simulate { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let path = runner::cmd_simulate(&cfg, &dir)?;
            println!("wrote {}", path.display());
        }
        Command::Recover { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let out = runner::cmd_recover(&cfg, &dir)?;
            println!(
                "recovered {} points at depth {}; wrote {}",
                out.results.len(),
                out.n_used,
                out.json.display()
            );
        }
        Command::Rom { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let out = runner::cmd_rom(&cfg, &dir)?;
            match out.rel_hinf_error {
                Some(e) => println!(
                    "wrote {} (relative peak-gain error {e:.3e})",
                    out.model_path.display()
                ),
                None => println!("wrote {}", out.model_path.display()),
            }
        }
        Command::Eval {
            model,
            points,
            output,
        } => {
            let path = runner::cmd_eval(&model, points, &output)?;
            println!("wrote {}", path.display());
        }
        Command::Repro { experiment, full } => {
            let seed = cli.seed.unwrap_or(7);
            let dir = cli
                .out
                .unwrap_or_else(|| PathBuf::from(format!("repro_{experiment}")));
            let summary = runner::repro(&experiment, seed, &dir, full)?;
            for (name, pass) in &summary.checks {
                println!("{name}: {}", if *pass { "pass" } else { "FAIL" });
            }
            println!("summary written to {}", dir.join("summary.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
