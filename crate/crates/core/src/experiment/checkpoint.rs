//! Text checkpoints for learned objectives.
//!
//! ```text
//! # horizon checkpoint
//! format_version = 1
//! architecture = drift-mlp
//! dims = 16,128,1
//! objective = ta-lpo
//! meta generation = 30
//! param_count = 2176
//! params
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! Parameters are written one per line with 17 significant digits, which
//! reproduces every 64-bit value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::config::{ExperimentConfig, ObjectiveKind};
use crate::error::{Error, Result};
use crate::inner::InnerObjective;
use crate::lpg::{LpgConfig, LpgNet};
use crate::lpo::{DriftNet, DriftObjective, PpoClipDrift};
use crate::nn::{Activation, LstmSpec, MlpSpec, ParamVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    DriftMlp,
    LpgLstm,
    /// No parameters at all.
    Empty,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::DriftMlp => "drift-mlp",
            Architecture::LpgLstm => "lpg-lstm",
            Architecture::Empty => "empty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Architecture::DriftMlp, Architecture::LpgLstm, Architecture::Empty]
            .into_iter()
            .find(|a| a.as_str() == s)
    }

    pub fn for_objective(kind: ObjectiveKind) -> Self {
        match kind {
            ObjectiveKind::Lpg | ObjectiveKind::TaLpg => Architecture::LpgLstm,
            ObjectiveKind::Lpo | ObjectiveKind::TaLpo => Architecture::DriftMlp,
            ObjectiveKind::PpoRef => Architecture::Empty,
        }
    }

    /// Parameter count implied by `dims`.
    pub fn param_count(self, dims: &[usize]) -> Result<usize> {
        let bad = || Error::Config(format!("{} expects {} dimensions, got {}", self.as_str(), self.arity(), dims.len()));
        if dims.len() != self.arity() {
            return Err(bad());
        }
        Ok(match self {
            Architecture::DriftMlp => MlpSpec::new(dims.to_vec(), Activation::Tanh, false)?.param_count(),
            Architecture::LpgLstm => LstmSpec::new(dims[0], dims[1], dims[2])?.param_count(),
            Architecture::Empty => 0,
        })
    }

    fn arity(self) -> usize {
        match self {
            Architecture::Empty => 0,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub dims: Vec<usize>,
    pub objective: ObjectiveKind,
    pub metadata: Vec<(String, String)>,
    pub params: ParamVector,
}

/// A ready-to-use inner objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Drift(DriftNet),
    Ppo(PpoClipDrift),
    Lpg(LpgNet),
}

impl Objective {
    pub fn as_inner(&self) -> InnerObjective<'_> {
        match self {
            Objective::Drift(net) => InnerObjective::Drift(net),
            Objective::Ppo(ppo) => InnerObjective::Drift(ppo),
            Objective::Lpg(net) => InnerObjective::Lpg(net),
        }
    }

    pub fn as_drift(&self) -> Option<&dyn DriftObjective> {
        match self {
            Objective::Drift(net) => Some(net),
            Objective::Ppo(ppo) => Some(ppo),
            Objective::Lpg(_) => None,
        }
    }

    pub fn params(&self) -> ParamVector {
        match self {
            Objective::Drift(net) => net.params().clone(),
            Objective::Lpg(net) => net.params().clone(),
            Objective::Ppo(_) => ParamVector::zeros(0),
        }
    }

    /// Same architecture as the config describes, with new parameters.
    pub fn from_params(config: &ExperimentConfig, params: ParamVector) -> Result<Self> {
        Ok(match config.objective {
            ObjectiveKind::Lpo | ObjectiveKind::TaLpo => {
                Objective::Drift(DriftNet::new(config.objective.is_temporal(), config.drift_hidden, params)?)
            }
            ObjectiveKind::Lpg | ObjectiveKind::TaLpg => Objective::Lpg(LpgNet::new(lpg_config(config), params)?),
            ObjectiveKind::PpoRef => {
                if !params.is_empty() {
                    return Err(Error::Config("the PPO reference has no parameters".into()));
                }
                Objective::Ppo(PpoClipDrift::new(config.clip_eps)?)
            }
        })
    }

    /// Freshly initialised meta-parameters.
    pub fn initial<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<Self> {
        Ok(match config.objective {
            ObjectiveKind::Lpo | ObjectiveKind::TaLpo => {
                Objective::Drift(DriftNet::random(config.objective.is_temporal(), config.drift_hidden, rng)?)
            }
            ObjectiveKind::Lpg | ObjectiveKind::TaLpg => Objective::Lpg(LpgNet::random(lpg_config(config), rng)?),
            ObjectiveKind::PpoRef => Objective::Ppo(PpoClipDrift::new(config.clip_eps)?),
        })
    }
}

fn lpg_config(config: &ExperimentConfig) -> LpgConfig {
    LpgConfig {
        temporal: config.objective == ObjectiveKind::TaLpg,
        ..config.lpg.clone()
    }
}

/// Network dimensions the config implies.
pub fn config_dims(config: &ExperimentConfig) -> Result<Vec<usize>> {
    Ok(match Architecture::for_objective(config.objective) {
        Architecture::DriftMlp => DriftNet::spec(config.objective.is_temporal(), config.drift_hidden)?.layer_widths,
        Architecture::LpgLstm => {
            let spec = lpg_config(config).lstm_spec()?;
            vec![spec.input_width, spec.hidden_width, spec.output_width]
        }
        Architecture::Empty => Vec::new(),
    })
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, params: ParamVector, metadata: Vec<(String, String)>) -> Result<Self> {
        let architecture = Architecture::for_objective(config.objective);
        let dims = config_dims(config)?;
        let expected = architecture.param_count(&dims)?;
        if params.len() != expected {
            return Err(Error::Config(format!(
                "{} checkpoint needs {expected} parameters, got {}",
                architecture.as_str(),
                params.len()
            )));
        }
        Ok(Self {
            architecture,
            dims,
            objective: config.objective,
            metadata,
            params,
        })
    }

    /// Builds the objective, refusing checkpoints that do not fit `config`.
    pub fn to_objective(&self, config: &ExperimentConfig) -> Result<Objective> {
        if self.objective != config.objective {
            return Err(Error::Config(format!(
                "checkpoint holds a {} objective but the config asks for {}",
                self.objective.as_str(),
                config.objective.as_str()
            )));
        }
        let dims = config_dims(config)?;
        if self.dims != dims {
            return Err(Error::Config(format!(
                "checkpoint dimensions {:?} do not match the config's {:?}",
                self.dims, dims
            )));
        }
        Objective::from_params(config, self.params.clone())
    }
}

pub fn checkpoint_to_text(c: &Checkpoint) -> String {
    let mut out = String::from("# horizon checkpoint\n");
    writeln!(out, "format_version = {FORMAT_VERSION}").unwrap();
    writeln!(out, "architecture = {}", c.architecture.as_str()).unwrap();
    let dims: Vec<String> = c.dims.iter().map(usize::to_string).collect();
    writeln!(out, "dims = {}", dims.join(",")).unwrap();
    writeln!(out, "objective = {}", c.objective.as_str()).unwrap();
    for (k, v) in &c.metadata {
        writeln!(out, "meta {k} = {v}").unwrap();
    }
    writeln!(out, "param_count = {}", c.params.len()).unwrap();
    out.push_str("params\n");
    for v in c.params.as_slice() {
        writeln!(out, "{v:.16e}").unwrap();
    }
    out
}

pub fn checkpoint_from_text(text: &str, origin: &str) -> Result<Checkpoint> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut version = None;
    let mut architecture = None;
    let mut dims = None;
    let mut objective = None;
    let mut declared = None;
    let mut metadata = Vec::new();
    let mut saw_params = false;
    for (no, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "params" {
            saw_params = true;
            break;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(no, format!("expected `key = value`, got `{line}`")))?;
        if let Some(meta) = key.strip_prefix("meta ") {
            metadata.push((meta.trim().to_string(), value.to_string()));
            continue;
        }
        match key {
            "format_version" => {
                let v: u32 = value.parse().map_err(|_| err(no, format!("bad format_version `{value}`")))?;
                if v != FORMAT_VERSION {
                    return Err(err(no, format!("unsupported checkpoint format version {v}, expected {FORMAT_VERSION}")));
                }
                version = Some(v);
            }
            "architecture" => {
                architecture =
                    Some(Architecture::parse(value).ok_or_else(|| err(no, format!("unknown architecture `{value}`")))?)
            }
            "dims" => {
                let d: std::result::Result<Vec<usize>, _> = if value.is_empty() {
                    Ok(Vec::new())
                } else {
                    value.split(',').map(|s| s.trim().parse::<usize>()).collect()
                };
                dims = Some(d.map_err(|_| err(no, format!("bad dims `{value}`")))?);
            }
            "objective" => {
                objective =
                    Some(ObjectiveKind::parse(value).ok_or_else(|| err(no, format!("unknown objective `{value}`")))?)
            }
            "param_count" => {
                declared = Some(value.parse::<usize>().map_err(|_| err(no, format!("bad param_count `{value}`")))?)
            }
            _ => return Err(err(no, format!("unknown header key `{key}`"))),
        }
    }
    let missing = |what: &str| err(0, format!("header lacks {what}"));
    version.ok_or_else(|| missing("format_version"))?;
    let architecture = architecture.ok_or_else(|| missing("architecture"))?;
    let dims = dims.ok_or_else(|| missing("dims"))?;
    let objective = objective.ok_or_else(|| missing("objective"))?;
    let declared = declared.ok_or_else(|| missing("param_count"))?;
    if !saw_params {
        return Err(missing("the params marker"));
    }
    if Architecture::for_objective(objective) != architecture {
        return Err(err(0, format!("objective {} cannot use architecture {}", objective.as_str(), architecture.as_str())));
    }
    let expected = architecture.param_count(&dims).map_err(|e| err(0, e.to_string()))?;
    if declared != expected {
        return Err(err(0, format!("param_count {declared} does not match {expected} implied by dims")));
    }
    let mut values = Vec::with_capacity(declared);
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| err(no, format!("bad parameter `{line}`")))?;
        values.push(v);
    }
    if values.len() != declared {
        return Err(err(0, format!("parameter count mismatch: header declares {declared}, file holds {}", values.len())));
    }
    let params = ParamVector::new(values).map_err(|e| err(0, e.to_string()))?;
    Ok(Checkpoint {
        architecture,
        dims,
        objective,
        metadata,
        params,
    })
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint_to_text(c)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_text(&text, &path.display().to_string())
}
