//! `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may
//! appear at most once; unknown keys are rejected. Defaults depend on the
//! `objective` key wherever it appears in the file. [`dump_config`] writes
//! every key in a fixed order and parses back to the same config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::envs::{presets, spec_from_text, GridWorldSpec};
use crate::error::{Error, Result};
use crate::es::EsConfig;
use crate::inner::{LrSchedule, TrainConfig};
use crate::lpg::LpgConfig;
use crate::lpo::DEFAULT_DRIFT_HIDDEN;
use crate::nn::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Lpg,
    TaLpg,
    Lpo,
    TaLpo,
    PpoRef,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::Lpg,
        ObjectiveKind::TaLpg,
        ObjectiveKind::Lpo,
        ObjectiveKind::TaLpo,
        ObjectiveKind::PpoRef,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Lpg => "lpg",
            ObjectiveKind::TaLpg => "ta-lpg",
            ObjectiveKind::Lpo => "lpo",
            ObjectiveKind::TaLpo => "ta-lpo",
            ObjectiveKind::PpoRef => "ppo-ref",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_lpg(self) -> bool {
        matches!(self, ObjectiveKind::Lpg | ObjectiveKind::TaLpg)
    }

    pub fn is_temporal(self) -> bool {
        matches!(self, ObjectiveKind::TaLpg | ObjectiveKind::TaLpo)
    }

    /// Whether there are meta-parameters to learn.
    pub fn is_learned(self) -> bool {
        self != ObjectiveKind::PpoRef
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvChoice {
    GridDist,
    Dense,
    Sparse,
    /// A task file, relative paths resolved against the config's directory.
    Fixed(PathBuf),
}

impl EnvChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "griddist" => Some(EnvChoice::GridDist),
            "dense" => Some(EnvChoice::Dense),
            "sparse" => Some(EnvChoice::Sparse),
            _ => s
                .strip_prefix("fixed:")
                .filter(|p| !p.is_empty())
                .map(|p| EnvChoice::Fixed(PathBuf::from(p))),
        }
    }

    pub fn render(&self) -> String {
        match self {
            EnvChoice::GridDist => "griddist".into(),
            EnvChoice::Dense => "dense".into(),
            EnvChoice::Sparse => "sparse".into(),
            EnvChoice::Fixed(p) => format!("fixed:{}", p.display()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            EnvChoice::GridDist => "griddist",
            EnvChoice::Dense => "dense",
            EnvChoice::Sparse => "sparse",
            EnvChoice::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    pub env: EnvChoice,
    pub out_dir: PathBuf,
    /// Worker threads for lifetime evaluation; 0 picks the machine's core count.
    pub workers: usize,
    pub seeds: Vec<u64>,
    pub horizons: Vec<u64>,
    /// Write a checkpoint every this many generations; 0 keeps only the last.
    pub checkpoint_every: usize,
    pub es: EsConfig,
    /// `horizon` is unused here; lifetimes take theirs from `horizons`.
    pub train: TrainConfig,
    pub drift_hidden: usize,
    pub clip_eps: f64,
    pub lpg: LpgConfig,
    /// Directory that relative task files are resolved against.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(objective: ObjectiveKind) -> Self {
        let (es, train) = if objective.is_lpg() {
            (
                EsConfig {
                    sigma_init: 0.003,
                    sigma_decay: 1.0,
                    sigma_limit: 0.001,
                    outer_lr: 1e-4,
                    lr_decay: 0.999,
                    lr_limit: 1e-5,
                    ..EsConfig::default()
                },
                TrainConfig::lpg_defaults(),
            )
        } else {
            let mut train = TrainConfig::drift_defaults();
            if objective == ObjectiveKind::PpoRef {
                train.max_grad_norm = 0.5;
            }
            (EsConfig::default(), train)
        };
        Self {
            objective,
            env: if objective.is_lpg() { EnvChoice::GridDist } else { EnvChoice::Dense },
            out_dir: PathBuf::from("runs"),
            workers: 0,
            seeds: vec![0],
            horizons: vec![train.horizon],
            checkpoint_every: 10,
            es,
            train,
            drift_hidden: DEFAULT_DRIFT_HIDDEN,
            clip_eps: 0.2,
            lpg: LpgConfig {
                temporal: objective == ObjectiveKind::TaLpg,
                ..LpgConfig::default()
            },
            base_dir: PathBuf::from("."),
        }
    }

    pub fn experiment_id(&self) -> String {
        format!("{}-{}", self.objective.as_str(), self.env.tag())
    }

    /// Agent settings for a lifetime of `horizon` steps.
    pub fn train_for(&self, horizon: u64) -> TrainConfig {
        TrainConfig {
            horizon,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.es.validate()?;
        for &h in &self.horizons {
            self.train_for(h).validate()?;
        }
        if self.horizons.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("horizons and seeds must be non-empty".into()));
        }
        if self.objective.is_lpg() {
            self.lpg.validate()?;
        }
        if let EnvChoice::Fixed(path) = &self.env {
            let full = self.resolve(path);
            if !full.is_file() {
                return Err(Error::Config(format!("task file {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// The task for a fixed environment; `None` for the task distribution.
    pub fn fixed_task_spec(&self) -> Result<Option<GridWorldSpec>> {
        match &self.env {
            EnvChoice::GridDist => Ok(None),
            EnvChoice::Dense => Ok(Some(presets::dense())),
            EnvChoice::Sparse => Ok(Some(presets::sparse())),
            EnvChoice::Fixed(path) => {
                let full = self.resolve(path);
                let text = fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                spec_from_text(&text, &full.display().to_string()).map(Some)
            }
        }
    }

    /// Applies `HORIZON_OUT_DIR` and `HORIZON_WORKERS` from `lookup`.
    pub fn apply_env_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(dir) = lookup("HORIZON_OUT_DIR") {
            self.out_dir = PathBuf::from(dir);
        }
        if let Some(w) = lookup("HORIZON_WORKERS") {
            self.workers = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("HORIZON_WORKERS must be a count, got `{w}`")))?;
        }
        Ok(())
    }
}

/// Keys in dump order, with the section comment printed before each group.
const LAYOUT: &[(&str, &[&str])] = &[
    (
        "experiment",
        &["objective", "env", "out_dir", "workers", "seeds", "horizons", "checkpoint_every"],
    ),
    (
        "evolution strategies",
        &[
            "population_size",
            "sigma_init",
            "sigma_decay",
            "sigma_limit",
            "outer_lr",
            "lr_decay",
            "lr_limit",
            "generations",
            "rank_shaping",
            "centered_ranking",
            "shared_task",
            "shared_agent_init",
        ],
    ),
    (
        "agent",
        &[
            "rollout_length",
            "num_envs",
            "lr",
            "lr_schedule",
            "optimizer",
            "momentum",
            "gamma",
            "gae_lambda",
            "ppo_epochs",
            "ppo_minibatches",
            "entropy_coef",
            "vf_coef",
            "max_grad_norm",
            "normalize_advantages",
            "hidden",
            "eval_episodes",
            "fitness_floor",
        ],
    ),
    ("drift objectives", &["drift_hidden", "clip_eps"]),
    (
        "learned policy gradient",
        &["bootstrap_dim", "lpg_hidden", "alpha_y", "beta0", "beta1", "beta2", "beta3"],
    ),
];

pub fn config_keys() -> impl Iterator<Item = &'static str> {
    LAYOUT.iter().flat_map(|(_, keys)| keys.iter().copied())
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn optimizer_str(k: OptimizerKind) -> &'static str {
    match k {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Sgd => "sgd",
    }
}

fn get(c: &ExperimentConfig, key: &str) -> String {
    let (es, t, l) = (&c.es, &c.train, &c.lpg);
    match key {
        "objective" => c.objective.as_str().into(),
        "env" => c.env.render(),
        "out_dir" => c.out_dir.display().to_string(),
        "workers" => c.workers.to_string(),
        "seeds" => join(&c.seeds),
        "horizons" => join(&c.horizons),
        "checkpoint_every" => c.checkpoint_every.to_string(),
        "population_size" => es.population_size.to_string(),
        "sigma_init" => es.sigma_init.to_string(),
        "sigma_decay" => es.sigma_decay.to_string(),
        "sigma_limit" => es.sigma_limit.to_string(),
        "outer_lr" => es.outer_lr.to_string(),
        "lr_decay" => es.lr_decay.to_string(),
        "lr_limit" => es.lr_limit.to_string(),
        "generations" => es.generations.to_string(),
        "rank_shaping" => es.rank_shaping.to_string(),
        "centered_ranking" => es.centered_ranking.to_string(),
        "shared_task" => es.shared_task.to_string(),
        "shared_agent_init" => es.shared_agent_init.to_string(),
        "rollout_length" => t.rollout_length.to_string(),
        "num_envs" => t.num_envs.to_string(),
        "lr" => t.lr.to_string(),
        "lr_schedule" => t.lr_schedule.as_str().into(),
        "optimizer" => optimizer_str(t.optimizer).into(),
        "momentum" => t.momentum.to_string(),
        "gamma" => t.gamma.to_string(),
        "gae_lambda" => t.gae_lambda.to_string(),
        "ppo_epochs" => t.ppo_epochs.to_string(),
        "ppo_minibatches" => t.ppo_minibatches.to_string(),
        "entropy_coef" => t.entropy_coef.to_string(),
        "vf_coef" => t.vf_coef.to_string(),
        "max_grad_norm" => t.max_grad_norm.to_string(),
        "normalize_advantages" => t.normalize_advantages.to_string(),
        "hidden" => t.hidden.to_string(),
        "eval_episodes" => t.eval_episodes.to_string(),
        "fitness_floor" => t.fitness_floor.to_string(),
        "drift_hidden" => c.drift_hidden.to_string(),
        "clip_eps" => c.clip_eps.to_string(),
        "bootstrap_dim" => l.bootstrap_dim.to_string(),
        "lpg_hidden" => l.hidden.to_string(),
        "alpha_y" => l.alpha_y.to_string(),
        "beta0" => l.beta0.to_string(),
        "beta1" => l.beta1.to_string(),
        "beta2" => l.beta2.to_string(),
        "beta3" => l.beta3.to_string(),
        _ => unreachable!("key {key} is not in the layout"),
    }
}

type SetResult = std::result::Result<(), String>;

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn in_range(v: &str, ok: impl Fn(f64) -> bool, range: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if ok(x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside {range}"))
    }
}

fn non_negative(v: &str) -> std::result::Result<f64, String> {
    in_range(v, |x| x >= 0.0, "[0, inf)")
}

fn decay(v: &str) -> std::result::Result<f64, String> {
    in_range(v, |x| x > 0.0 && x <= 1.0, "(0, 1]")
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn positive(v: &str) -> std::result::Result<usize, String> {
    match count(v)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true or false")),
    }
}

fn int_list(v: &str, allow_zero: bool) -> std::result::Result<Vec<u64>, String> {
    let items: Vec<u64> = v
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| format!("`{}` is not a non-negative integer", s.trim())))
        .collect::<std::result::Result<_, _>>()?;
    if !allow_zero && items.contains(&0) {
        return Err("entries must be positive".into());
    }
    Ok(items)
}

fn set(c: &mut ExperimentConfig, key: &str, v: &str) -> SetResult {
    match key {
        "objective" => {
            c.objective = ObjectiveKind::parse(v).ok_or_else(|| format!("unknown objective `{v}`"))?;
            c.lpg.temporal = c.objective == ObjectiveKind::TaLpg;
        }
        "env" => c.env = EnvChoice::parse(v).ok_or_else(|| format!("unknown environment `{v}`"))?,
        "out_dir" => {
            if v.is_empty() {
                return Err("must not be empty".into());
            }
            c.out_dir = PathBuf::from(v);
        }
        "workers" => c.workers = count(v)?,
        "seeds" => c.seeds = int_list(v, true)?,
        "horizons" => c.horizons = int_list(v, false)?,
        "checkpoint_every" => c.checkpoint_every = count(v)?,
        "population_size" => {
            let n = positive(v)?;
            if n % 2 != 0 {
                return Err(format!("{n} is odd; antithetic pairs need an even population"));
            }
            c.es.population_size = n;
        }
        "sigma_init" => c.es.sigma_init = in_range(v, |x| x > 0.0, "(0, inf)")?,
        "sigma_decay" => c.es.sigma_decay = decay(v)?,
        "sigma_limit" => c.es.sigma_limit = non_negative(v)?,
        "outer_lr" => c.es.outer_lr = non_negative(v)?,
        "lr_decay" => c.es.lr_decay = decay(v)?,
        "lr_limit" => c.es.lr_limit = non_negative(v)?,
        "generations" => c.es.generations = count(v)?,
        "rank_shaping" => c.es.rank_shaping = boolean(v)?,
        "centered_ranking" => c.es.centered_ranking = boolean(v)?,
        "shared_task" => c.es.shared_task = boolean(v)?,
        "shared_agent_init" => c.es.shared_agent_init = boolean(v)?,
        "rollout_length" => c.train.rollout_length = positive(v)?,
        "num_envs" => c.train.num_envs = positive(v)?,
        "lr" => c.train.lr = non_negative(v)?,
        "lr_schedule" => {
            c.train.lr_schedule = LrSchedule::parse(v).ok_or_else(|| format!("unknown schedule `{v}`"))?
        }
        "optimizer" => {
            c.train.optimizer = match v {
                "adam" => OptimizerKind::Adam,
                "sgd" => OptimizerKind::Sgd,
                _ => return Err(format!("unknown optimizer `{v}`")),
            }
        }
        "momentum" => c.train.momentum = in_range(v, |x| (0.0..1.0).contains(&x), "[0, 1)")?,
        "gamma" => c.train.gamma = decay(v)?,
        "gae_lambda" => c.train.gae_lambda = in_range(v, |x| (0.0..=1.0).contains(&x), "[0, 1]")?,
        "ppo_epochs" => c.train.ppo_epochs = positive(v)?,
        "ppo_minibatches" => c.train.ppo_minibatches = positive(v)?,
        "entropy_coef" => c.train.entropy_coef = non_negative(v)?,
        "vf_coef" => c.train.vf_coef = non_negative(v)?,
        "max_grad_norm" => c.train.max_grad_norm = real(v)?,
        "normalize_advantages" => c.train.normalize_advantages = boolean(v)?,
        "hidden" => c.train.hidden = positive(v)?,
        "eval_episodes" => c.train.eval_episodes = positive(v)?,
        "fitness_floor" => c.train.fitness_floor = real(v)?,
        "drift_hidden" => c.drift_hidden = positive(v)?,
        "clip_eps" => c.clip_eps = in_range(v, |x| x > 0.0 && x < 1.0, "(0, 1)")?,
        "bootstrap_dim" => c.lpg.bootstrap_dim = positive(v)?,
        "lpg_hidden" => c.lpg.hidden = positive(v)?,
        "alpha_y" => c.lpg.alpha_y = non_negative(v)?,
        "beta0" => c.lpg.beta0 = non_negative(v)?,
        "beta1" => c.lpg.beta1 = non_negative(v)?,
        "beta2" => c.lpg.beta2 = non_negative(v)?,
        "beta3" => c.lpg.beta3 = non_negative(v)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Parses config text; `origin` names the source in error messages and
/// `base_dir` anchors relative task files.
pub fn parse_config_str(text: &str, origin: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut entries: Vec<(usize, &str, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
        if key.is_empty() {
            return Err(err(line_no, "missing key".into()));
        }
        if let Some((first, ..)) = entries.iter().find(|(_, k, _)| *k == key) {
            return Err(err(line_no, format!("duplicate key `{key}` (first set on line {first})")));
        }
        entries.push((line_no, key, value));
    }
    let objective = match entries.iter().find(|(_, k, _)| *k == "objective") {
        Some(&(line, _, v)) => ObjectiveKind::parse(v).ok_or_else(|| err(line, format!("objective: unknown objective `{v}`")))?,
        None => ObjectiveKind::TaLpo,
    };
    let mut config = ExperimentConfig::defaults(objective);
    config.base_dir = base_dir.to_path_buf();
    for (line, key, value) in entries {
        set(&mut config, key, value).map_err(|m| err(line, format!("{key}: {m}")))?;
    }
    config.validate().map_err(|e| match e {
        Error::Config(m) => err(0, m),
        other => other,
    })?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    parse_config_str(&text, &path.display().to_string(), &base)
}

/// Normalised text listing every key.
pub fn dump_config(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    for (k, (section, keys)) in LAYOUT.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        writeln!(out, "# {section}").unwrap();
        for key in *keys {
            writeln!(out, "{key} = {}", get(config, key)).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config_str(text, "test.cfg", Path::new("."))
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::defaults(ObjectiveKind::TaLpo));
        assert_eq!(parse("# nothing\n\n").unwrap(), ExperimentConfig::defaults(ObjectiveKind::TaLpo));
    }

    #[test]
    fn defaults_follow_the_objective_anywhere_in_the_file() {
        let c = parse("sigma_limit = 0.002\nobjective = ta-lpg\n").unwrap();
        assert!(c.lpg.temporal);
        assert_eq!(c.es.sigma_init, 0.003);
        assert_eq!(c.es.sigma_limit, 0.002);
        assert_eq!(c.es.outer_lr, 1e-4);
        assert_eq!(c.train.rollout_length, 20);
        let p = parse("objective = ppo-ref").unwrap();
        assert_eq!(p.train.max_grad_norm, 0.5);
        assert_eq!(parse("objective = lpo").unwrap().train.max_grad_norm, 8.0);
    }

    #[test]
    fn errors_carry_key_and_line() {
        let e = parse("objective = lpo\n\ngamma = 1.5\n").unwrap_err();
        match &e {
            Error::Parse { line, message, .. } => {
                assert_eq!(*line, 3);
                assert!(message.contains("gamma"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        for (text, line) in [
            ("frobnicate = 1", 1),
            ("lr = 0.1\nlr = 0.2", 2),
            ("# c\nno equals sign", 2),
            ("population_size = 15", 1),
            ("horizons = 100,0", 1),
            ("env = fixed:", 1),
        ] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_task_file_is_rejected() {
        let e = parse("env = fixed:does/not/exist.txt").unwrap_err();
        assert_eq!(e.category(), "config");
    }

    #[test]
    fn every_key_round_trips() {
        let text = "\
objective = lpg
env = sparse
out_dir = out/a b
workers = 3
seeds = 4,5,6
horizons = 2048,4096
checkpoint_every = 2
population_size = 8
sigma_init = 0.05
sigma_decay = 0.99
sigma_limit = 0.02
outer_lr = 0.003
lr_decay = 0.9
lr_limit = 0.0001
generations = 7
rank_shaping = false
centered_ranking = false
shared_task = false
shared_agent_init = false
rollout_length = 12
num_envs = 6
lr = 0.001
lr_schedule = linear-decay
optimizer = sgd
momentum = 0.9
gamma = 0.95
gae_lambda = 0.9
ppo_epochs = 2
ppo_minibatches = 3
entropy_coef = 0.02
vf_coef = 0.25
max_grad_norm = 1.5
normalize_advantages = false
hidden = 24
eval_episodes = 10
fitness_floor = -2
drift_hidden = 64
clip_eps = 0.1
bootstrap_dim = 8
lpg_hidden = 16
alpha_y = 0.25
beta0 = 0.01
beta1 = 0.002
beta2 = 0.003
beta3 = 0.004
";
        let c = parse(text).unwrap();
        assert_eq!(c.workers, 3);
        assert_eq!(c.lpg.beta3, 0.004);
        assert_eq!(config_keys().count(), text.lines().count());
        let dumped = dump_config(&c);
        let again = parse(&dumped).unwrap();
        assert_eq!(again, c);
        assert_eq!(dump_config(&again), dumped);
        let defaults = dump_config(&ExperimentConfig::defaults(ObjectiveKind::TaLpo));
        assert!(defaults.starts_with("# experiment\nobjective = ta-lpo\nenv = dense\n"));
        assert_eq!(dump_config(&parse(&defaults).unwrap()), defaults);
    }

    #[test]
    fn environment_overrides() {
        let mut c = ExperimentConfig::defaults(ObjectiveKind::Lpo);
        c.apply_env_overrides(|k| match k {
            "HORIZON_OUT_DIR" => Some("elsewhere".into()),
            "HORIZON_WORKERS" => Some("2".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.workers, 2);
        assert!(c.apply_env_overrides(|_| Some("x".into())).is_err());
    }
}
