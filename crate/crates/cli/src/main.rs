use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horizon_core::experiment::{
    dump_config, parse_config, run_analyze, run_meta_test, run_meta_train, ExperimentConfig, ObjectiveKind,
};
use horizon_core::Error;

#[derive(Parser)]
#[command(name = "horizon", version, about = "Meta-train and evaluate lifetime-conditioned RL objectives")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Experiment file; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve objective parameters, one run per seed.
    MetaTrain {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Train fresh agents with a fixed objective for every horizon and seed.
    MetaTest {
        #[command(flatten)]
        config: ConfigArg,
        /// Learned objective; not needed for ppo-ref.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Derivative heatmaps of a drift objective and horizon metrics of traces.
    Analyze {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory of trace files written by meta-test.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Print the normalised configuration.
    DumpConfig {
        #[command(flatten)]
        config: ConfigArg,
    },
}

enum Failure {
    Usage(String),
    Config(Error),
    Runtime(Error),
}

impl Failure {
    fn from_run(e: Error) -> Self {
        match e {
            Error::Usage(m) => Failure::Usage(m),
            e @ (Error::Config(_) | Error::Parse { .. }) => Failure::Config(e),
            e => Failure::Runtime(e),
        }
    }

    fn report(&self) -> ExitCode {
        let (category, message, code) = match self {
            Failure::Usage(m) => ("usage", m.clone(), 1),
            Failure::Config(e) => ("config", e.to_string(), 2),
            Failure::Runtime(e) => (e.category(), e.to_string(), 3),
        };
        eprintln!("error[{category}]: {}", message.replace('\n', " "));
        ExitCode::from(code)
    }
}

fn load_config(arg: &ConfigArg) -> Result<ExperimentConfig, Failure> {
    let mut config = match &arg.config {
        Some(path) => parse_config(path).map_err(Failure::Config)?,
        None => ExperimentConfig::defaults(ObjectiveKind::TaLpo),
    };
    config
        .apply_env_overrides(|k| std::env::var(k).ok())
        .map_err(Failure::Config)?;
    Ok(config)
}

fn show(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::DumpConfig { config } => {
            print!("{}", dump_config(&load_config(&config)?));
        }
        Command::MetaTrain { config } => {
            let config = load_config(&config)?;
            for run in run_meta_train(&config).map_err(Failure::from_run)? {
                match run.log.last() {
                    Some(last) => println!(
                        "seed {}: {} generations, mean fitness {:.4}, best {:.4}",
                        run.seed, last.generation, last.mean_fitness, last.best_fitness
                    ),
                    None => println!("seed {}: no generations", run.seed),
                }
                show(&run.dir.join("final.txt"));
            }
        }
        Command::MetaTest { config, checkpoint } => {
            let config = load_config(&config)?;
            let records = run_meta_test(&config, checkpoint.as_deref()).map_err(Failure::from_run)?;
            for r in &records {
                println!(
                    "N={} seed={}: normalized return {:.4}{}",
                    r.horizon,
                    r.seed,
                    r.result.fitness,
                    if r.result.diverged { " (diverged)" } else { "" }
                );
            }
            show(&config.out_dir.join("meta-test").join("summary.csv"));
        }
        Command::Analyze {
            config,
            checkpoint,
            traces,
        } => {
            let config = load_config(&config)?;
            let out = run_analyze(&config, checkpoint.as_deref(), traces.as_deref()).map_err(Failure::from_run)?;
            if let Some(m) = &out.metrics {
                for h in &m.per_horizon {
                    println!(
                        "N={}: entropy half-life {:.4} over {} lifetimes",
                        h.horizon, h.mean_half_life, h.lifetimes
                    );
                }
                println!(
                    "half-life non-decreasing across {}/{} adjacent horizon pairs",
                    m.non_decreasing_pairs, m.adjacent_pairs
                );
            }
            for f in &out.files {
                show(f);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Failure::Usage(first.trim_start_matches("error: ").to_string()).report();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
