//! Subcommand drivers. Each writes into `<out_dir>/<command>/` and leaves a
//! `manifest.txt` there that is itself a valid config file for the run.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Objective};
use super::config::{dump_config, EnvChoice, ExperimentConfig};
use crate::analysis::{
    export_artifacts, format_real, lifetime_metrics, objective_derivative_grid, read_trace_csv, write_trace_csv,
    LifetimeMetrics, MetricTrace, DEFAULT_A_RANGE, DEFAULT_FRACS, DEFAULT_P_RANGE, DEFAULT_RESOLUTION,
};
use crate::envs::{sample_gridworld, GridDistribution};
use crate::error::{Error, Result};
use crate::es::{meta_train, GenerationLog};
use crate::inner::{train_lifetime, LifetimeResult, Task};
use crate::nn::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MetaTrain,
    MetaTest,
    Analyze,
    DumpConfig,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::MetaTrain => "meta-train",
            Command::MetaTest => "meta-test",
            Command::Analyze => "analyze",
            Command::DumpConfig => "dump-config",
        }
    }
}

const TASK_STREAM: u64 = 3;
const INIT_PARAMS_STREAM: u64 = 4;
const ES_STREAM: u64 = 5;

/// A seed derived from `seed` that is independent of the lifetime streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn code_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Normalised config text with comment lines naming the command.
pub fn manifest_text(config: &ExperimentConfig, command: Command, checkpoint: Option<&Path>) -> String {
    let mut recorded = config.clone();
    if let EnvChoice::Fixed(path) = &config.env {
        let full = config.resolve(path);
        recorded.env = EnvChoice::Fixed(fs::canonicalize(&full).unwrap_or(full));
    }
    let mut out = String::from("# horizon manifest\n");
    writeln!(out, "# command = {}", command.as_str()).unwrap();
    writeln!(out, "# code_version = {}", code_version()).unwrap();
    if let Some(c) = checkpoint {
        writeln!(out, "# checkpoint = {}", c.display()).unwrap();
    }
    out.push('\n');
    out.push_str(&dump_config(&recorded));
    out
}

fn write_manifest(dir: &Path, config: &ExperimentConfig, command: Command, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let path = dir.join("manifest.txt");
    write_file(&path, &manifest_text(config, command, checkpoint))?;
    Ok(path)
}

/// Tasks for the configured environment, keyed by task seed.
pub struct TaskSource {
    fixed: Option<Arc<Task>>,
    distribution: GridDistribution,
    cache: Mutex<HashMap<u64, Arc<Task>>>,
}

impl TaskSource {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let fixed = config.fixed_task_spec()?.map(Task::new).transpose()?.map(Arc::new);
        let distribution = GridDistribution {
            discount: config.train.gamma,
            ..GridDistribution::default()
        };
        Ok(Self {
            fixed,
            distribution,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn task(&self, seed: u64) -> Result<Arc<Task>> {
        if let Some(t) = &self.fixed {
            return Ok(t.clone());
        }
        if let Some(t) = self.cache.lock().expect("task cache").get(&seed) {
            return Ok(t.clone());
        }
        let task = Arc::new(Task::new(sample_gridworld(&self.distribution, seed)?)?);
        self.cache.lock().expect("task cache").insert(seed, task.clone());
        Ok(task)
    }
}

/// Horizon assigned to a meta-training pair.
pub fn pair_horizon(horizons: &[u64], task_seed: u64) -> u64 {
    horizons[(task_seed % horizons.len() as u64) as usize]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTrainRun {
    pub seed: u64,
    pub log: Vec<GenerationLog>,
    pub params: ParamVector,
    pub dir: PathBuf,
}

pub const GENERATION_HEADER: &str = "generation,mean_fitness,best_fitness,sigma,lr";

fn generation_row(row: &GenerationLog) -> String {
    format!(
        "{},{},{},{},{}\n",
        row.generation,
        format_real(row.mean_fitness),
        format_real(row.best_fitness),
        format_real(row.sigma),
        format_real(row.lr)
    )
}

/// One evolution-strategies run per configured seed.
pub fn run_meta_train(config: &ExperimentConfig) -> Result<Vec<MetaTrainRun>> {
    if !config.objective.is_learned() {
        return Err(Error::Usage(format!("{} has no parameters to meta-train", config.objective.as_str())));
    }
    let root = config.out_dir.join(Command::MetaTrain.as_str());
    create_dir(&root)?;
    write_manifest(&root, config, Command::MetaTrain, None)?;
    let tasks = TaskSource::new(config)?;
    let pool = build_pool(config.workers)?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let dir = root.join(format!("seed_{seed}"));
        create_dir(&dir)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(INIT_PARAMS_STREAM);
        let initial = Objective::initial(config, &mut init_rng)?.params();
        let mut es_rng = ChaCha8Rng::seed_from_u64(seed);
        es_rng.set_stream(ES_STREAM);
        let fitness = |params: &[f64], task_seed: u64, init_seed: u64| -> Result<f64> {
            let objective = Objective::from_params(config, ParamVector::new(params.to_vec())?)?;
            let task = tasks.task(task_seed)?;
            let train = config.train_for(pair_horizon(&config.horizons, task_seed));
            Ok(train_lifetime(objective.as_inner(), &task, &train, init_seed)?.fitness)
        };
        let log_path = dir.join("generations.csv");
        let mut log_text = format!("{GENERATION_HEADER}\n");
        write_file(&log_path, &log_text)?;
        let on_generation = |row: &GenerationLog, phi: &ParamVector| -> Result<()> {
            log_text.push_str(&generation_row(row));
            write_file(&log_path, &log_text)?;
            if config.checkpoint_every > 0 && row.generation % config.checkpoint_every == 0 {
                let ck = Checkpoint::new(config, phi.clone(), metadata(seed, row.generation))?;
                save_checkpoint(&dir.join(format!("checkpoint_{:05}.txt", row.generation)), &ck)?;
            }
            Ok(())
        };
        let result = meta_train(
            &initial,
            &config.es,
            config.train.fitness_floor,
            fitness,
            &mut es_rng,
            Some(&pool),
            on_generation,
        )?;
        let ck = Checkpoint::new(config, result.params.clone(), metadata(seed, result.log.len()))?;
        save_checkpoint(&dir.join("final.txt"), &ck)?;
        runs.push(MetaTrainRun {
            seed,
            log: result.log,
            params: result.params,
            dir,
        });
    }
    Ok(runs)
}

fn metadata(seed: u64, generation: usize) -> Vec<(String, String)> {
    vec![
        ("es_seed".into(), seed.to_string()),
        ("generation".into(), generation.to_string()),
        ("code_version".into(), code_version().into()),
    ]
}

/// The objective to evaluate: the checkpoint's, or the fixed PPO reference.
pub fn load_objective(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Objective> {
    match checkpoint {
        Some(path) => load_checkpoint(path)?.to_objective(config),
        None if !config.objective.is_learned() => Objective::from_params(config, ParamVector::zeros(0)),
        None => Err(Error::Usage(format!(
            "a checkpoint is required to evaluate a {} objective",
            config.objective.as_str()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeRecord {
    pub horizon: u64,
    pub seed: u64,
    pub result: LifetimeResult,
}

pub const SUMMARY_HEADER: &str = "N,seed,final_return,normalized_return,diverged,updates";

pub fn trace_file_name(horizon: u64, seed: u64) -> String {
    format!("trace_N{horizon}_seed{seed}.csv")
}

/// One lifetime per (horizon, seed); a trace CSV for each plus `summary.csv`.
pub fn run_meta_test(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Vec<LifetimeRecord>> {
    let objective = load_objective(config, checkpoint)?;
    let dir = config.out_dir.join(Command::MetaTest.as_str());
    create_dir(&dir)?;
    write_manifest(&dir, config, Command::MetaTest, checkpoint)?;
    let tasks = TaskSource::new(config)?;
    let jobs: Vec<(u64, u64)> = config
        .horizons
        .iter()
        .flat_map(|&h| config.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let pool = build_pool(config.workers)?;
    let results: Vec<Result<LifetimeRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(horizon, seed)| {
                let task = tasks.task(derive_seed(seed, TASK_STREAM))?;
                let result = train_lifetime(objective.as_inner(), &task, &config.train_for(horizon), seed)?;
                Ok(LifetimeRecord { horizon, seed, result })
            })
            .collect()
    });
    let records: Vec<LifetimeRecord> = results.into_iter().collect::<Result<_>>()?;
    let id = config.experiment_id();
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for r in &records {
        let trace = MetricTrace::from_rows(&id, r.seed, r.horizon, &r.result.trace);
        write_trace_csv(&dir.join(trace_file_name(r.horizon, r.seed)), &[trace])?;
        let normalized = if r.result.diverged { f64::NAN } else { r.result.fitness };
        writeln!(
            summary,
            "{},{},{},{},{},{}",
            r.horizon,
            r.seed,
            format_real(r.result.final_return),
            format_real(normalized),
            r.result.diverged,
            r.result.updates
        )
        .unwrap();
    }
    write_file(&dir.join("summary.csv"), &summary)?;
    Ok(records)
}

/// Trace files of a meta-test directory, in file-name order.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<MetricTrace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trace_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let mut traces = Vec::new();
    for p in paths {
        traces.extend(read_trace_csv(&p)?);
    }
    Ok(traces)
}

pub const METRICS_HEADER: &str = "N,lifetimes,mean_entropy_half_life,mean_update_norm,mean_final_return";

pub fn metrics_csv(metrics: &LifetimeMetrics) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for h in &metrics.per_horizon {
        writeln!(
            out,
            "{},{},{},{},{}",
            h.horizon,
            h.lifetimes,
            format_real(h.mean_half_life),
            format_real(h.mean_update_norm),
            format_real(h.mean_final_return)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub files: Vec<PathBuf>,
    pub metrics: Option<LifetimeMetrics>,
}

/// Derivative grids of a drift objective at the start, middle and end of a
/// lifetime, plus horizon metrics when a trace directory is given.
pub fn run_analyze(config: &ExperimentConfig, checkpoint: Option<&Path>, traces_dir: Option<&Path>) -> Result<AnalysisOutput> {
    let objective = load_objective(config, checkpoint)?;
    let grids = match objective.as_drift() {
        Some(drift) => DEFAULT_FRACS
            .iter()
            .map(|&f| objective_derivative_grid(drift, f, DEFAULT_P_RANGE, DEFAULT_A_RANGE, DEFAULT_RESOLUTION))
            .collect::<Result<Vec<_>>>()?,
        None if traces_dir.is_some() => {
            log::warn!("{} has no drift function; writing horizon metrics only", config.objective.as_str());
            Vec::new()
        }
        None => {
            return Err(Error::Usage(format!(
                "{} has no drift function to plot; pass a trace directory instead",
                config.objective.as_str()
            )))
        }
    };
    let traces = match traces_dir {
        Some(d) => read_trace_dir(d)?,
        None => Vec::new(),
    };
    let dir = config.out_dir.join(Command::Analyze.as_str());
    let mut files = export_artifacts(&grids, &traces, &dir)?;
    files.push(write_manifest(&dir, config, Command::Analyze, checkpoint)?);
    let metrics = traces_dir.map(|_| lifetime_metrics(&traces));
    if let Some(m) = &metrics {
        let path = dir.join("metrics.csv");
        write_file(&path, &metrics_csv(m))?;
        files.push(path);
    }
    Ok(AnalysisOutput { files, metrics })
}
