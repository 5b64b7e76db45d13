//! Antithetic evolution strategies over a flat parameter vector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Adam, ParamVector};

/// How raw fitnesses become the weights of the gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shaping {
    /// Winner of each antithetic pair +1, loser -1, ties 0.
    Pairwise,
    /// Population-wide ranks mapped linearly onto `[-0.5, 0.5]`.
    Centered,
    /// Fitness used as is.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsConfig {
    pub population_size: usize,
    pub sigma_init: f64,
    pub sigma_decay: f64,
    pub sigma_limit: f64,
    pub outer_lr: f64,
    pub lr_decay: f64,
    pub lr_limit: f64,
    pub generations: usize,
    /// Rank-based shaping; raw fitness when false.
    pub rank_shaping: bool,
    /// Used instead of pairwise selection when the two members of a pair see different tasks.
    pub centered_ranking: bool,
    /// Both members of an antithetic pair are scored on the same task.
    pub shared_task: bool,
    /// Both members of a pair also share the agent initialisation seed.
    pub shared_agent_init: bool,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            population_size: 16,
            sigma_init: 0.04,
            sigma_decay: 0.999,
            sigma_limit: 0.01,
            outer_lr: 0.01,
            lr_decay: 0.999,
            lr_limit: 1e-5,
            generations: 30,
            rank_shaping: true,
            centered_ranking: true,
            shared_task: true,
            shared_agent_init: true,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size == 0 || self.population_size % 2 != 0 {
            return bad(format!("population_size must be a positive even number, got {}", self.population_size));
        }
        if !(self.sigma_init > 0.0) || !(self.sigma_limit >= 0.0) || self.sigma_limit > self.sigma_init {
            return bad(format!(
                "need 0 <= sigma_limit <= sigma_init with sigma_init > 0, got {} and {}",
                self.sigma_limit, self.sigma_init
            ));
        }
        if !(self.outer_lr >= 0.0) || !(self.lr_limit >= 0.0) || self.lr_limit > self.outer_lr {
            return bad(format!(
                "need 0 <= lr_limit <= outer_lr, got {} and {}",
                self.lr_limit, self.outer_lr
            ));
        }
        for (name, v) in [("sigma_decay", self.sigma_decay), ("lr_decay", self.lr_decay)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn shaping(&self) -> Shaping {
        if !self.rank_shaping {
            Shaping::Raw
        } else if !self.shared_task && self.centered_ranking {
            Shaping::Centered
        } else {
            Shaping::Pairwise
        }
    }
}

/// One antithetic pair: candidates `x + sigma * noise` and `x - sigma * noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessPair {
    pub noise: Vec<f64>,
    pub task_seed: u64,
    /// Task of the minus member; equal to `task_seed` under shared-task pairing.
    pub minus_task_seed: u64,
    pub init_seed: u64,
    pub minus_init_seed: u64,
    pub fitness_plus: f64,
    pub fitness_minus: f64,
    pub shaped_plus: f64,
    pub shaped_minus: f64,
}

/// Draws `pop_size / 2` standard-normal noise vectors with their task and
/// agent-initialisation seeds.
pub fn sample_population<R: Rng + ?Sized>(
    dim: usize,
    pop_size: usize,
    shared_task: bool,
    shared_agent_init: bool,
    rng: &mut R,
) -> Result<Vec<FitnessPair>> {
    if pop_size == 0 || pop_size % 2 != 0 {
        return Err(Error::Config(format!("population size must be even and positive, got {pop_size}")));
    }
    Ok((0..pop_size / 2)
        .map(|_| {
            let noise: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let task_seed: u64 = rng.random();
            let minus_task_seed = if shared_task { task_seed } else { rng.random() };
            let init_seed: u64 = rng.random();
            let minus_init_seed = if shared_agent_init { init_seed } else { rng.random() };
            FitnessPair {
                noise,
                task_seed,
                minus_task_seed,
                init_seed,
                minus_init_seed,
                fitness_plus: 0.0,
                fitness_minus: 0.0,
                shaped_plus: 0.0,
                shaped_minus: 0.0,
            }
        })
        .collect())
}

/// Scores both members of the pair. `fitness(params, task_seed, init_seed)`
/// failures are recorded as `floor`.
pub fn evaluate_pair<F>(phi: &[f64], pair: &FitnessPair, sigma: f64, floor: f64, fitness: &F) -> FitnessPair
where
    F: Fn(&[f64], u64, u64) -> Result<f64>,
{
    let candidate = |sign: f64| -> Vec<f64> {
        phi.iter().zip(&pair.noise).map(|(x, e)| x + sign * sigma * e).collect()
    };
    let score = |params: Vec<f64>, task: u64, init: u64| match fitness(&params, task, init) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => floor,
        Err(e) => {
            log::warn!("candidate evaluation failed: {e}");
            floor
        }
    };
    FitnessPair {
        fitness_plus: score(candidate(1.0), pair.task_seed, pair.init_seed),
        fitness_minus: score(candidate(-1.0), pair.minus_task_seed, pair.minus_init_seed),
        ..pair.clone()
    }
}

/// Fills the shaped fitness of every pair.
pub fn rank_transform(pairs: &mut [FitnessPair], shaping: Shaping) {
    match shaping {
        Shaping::Raw => {
            for p in pairs.iter_mut() {
                p.shaped_plus = p.fitness_plus;
                p.shaped_minus = p.fitness_minus;
            }
        }
        Shaping::Pairwise => {
            for p in pairs.iter_mut() {
                let (a, b) = match p.fitness_plus.partial_cmp(&p.fitness_minus) {
                    Some(std::cmp::Ordering::Greater) => (1.0, -1.0),
                    Some(std::cmp::Ordering::Less) => (-1.0, 1.0),
                    _ => (0.0, 0.0),
                };
                p.shaped_plus = a;
                p.shaped_minus = b;
            }
        }
        Shaping::Centered => {
            let values: Vec<f64> = pairs.iter().flat_map(|p| [p.fitness_plus, p.fitness_minus]).collect();
            let ranks = centered_ranks(&values);
            for (k, p) in pairs.iter_mut().enumerate() {
                p.shaped_plus = ranks[2 * k];
                p.shaped_minus = ranks[2 * k + 1];
            }
        }
    }
}

/// Ranks mapped onto `[-0.5, 0.5]`; tied values share their mean rank.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mean_rank = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean_rank / (n - 1) as f64 - 0.5;
        }
        start = end;
    }
    ranks
}

/// `noise * (shaped_plus - shaped_minus) / (2 sigma)`.
pub fn pair_contribution(pair: &FitnessPair, sigma: f64) -> Vec<f64> {
    let w = (pair.shaped_plus - pair.shaped_minus) / (2.0 * sigma);
    pair.noise.iter().map(|e| e * w).collect()
}

/// Mean of the pair contributions, summed in pair order. Ascent direction.
pub fn es_gradient(pairs: &[FitnessPair], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let Some(first) = pairs.first() else {
        return Err(Error::Usage("gradient estimate needs at least one pair".into()));
    };
    let mut g = vec![0.0; first.noise.len()];
    for p in pairs {
        let w = (p.shaped_plus - p.shaped_minus) / (2.0 * sigma);
        for (gi, e) in g.iter_mut().zip(&p.noise) {
            *gi += e * w;
        }
    }
    let inv = 1.0 / pairs.len() as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub sigma: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct MetaTrainResult {
    pub params: ParamVector,
    pub log: Vec<GenerationLog>,
}

/// Outer loop. `fitness(params, task_seed, init_seed)` must be pure;
/// `on_generation` sees each log row with the parameters after that
/// generation's update. Pair evaluations run on `pool` when given.
pub fn meta_train<F, G>(
    initial: &ParamVector,
    config: &EsConfig,
    floor: f64,
    fitness: F,
    rng: &mut ChaCha8Rng,
    pool: Option<&rayon::ThreadPool>,
    mut on_generation: G,
) -> Result<MetaTrainResult>
where
    F: Fn(&[f64], u64, u64) -> Result<f64> + Sync,
    G: FnMut(&GenerationLog, &ParamVector) -> Result<()>,
{
    config.validate()?;
    let mut phi = initial.clone();
    let mut adam = Adam::new(phi.len());
    let mut sigma = config.sigma_init;
    let mut lr = config.outer_lr;
    let mut log = Vec::with_capacity(config.generations);
    let shaping = config.shaping();
    for generation in 1..=config.generations {
        let population = sample_population(
            phi.len(),
            config.population_size,
            config.shared_task,
            config.shared_agent_init,
            rng,
        )?;
        let evaluate = || -> Vec<FitnessPair> {
            population
                .par_iter()
                .map(|pair| evaluate_pair(&phi, pair, sigma, floor, &fitness))
                .collect()
        };
        let mut pairs = match pool {
            Some(p) => p.install(evaluate),
            None => evaluate(),
        };
        rank_transform(&mut pairs, shaping);
        let grad = es_gradient(&pairs, sigma)?;
        let all: Vec<f64> = pairs.iter().flat_map(|p| [p.fitness_plus, p.fitness_minus]).collect();
        let row = GenerationLog {
            generation,
            mean_fitness: all.iter().sum::<f64>() / all.len() as f64,
            best_fitness: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sigma,
            lr,
        };
        phi.update_with(|p| adam.step(p, &grad, lr))?;
        log::info!(
            "generation {generation}: mean fitness {:.4}, best {:.4}, sigma {sigma:.4}",
            row.mean_fitness,
            row.best_fitness
        );
        on_generation(&row, &phi)?;
        log.push(row);
        sigma = (sigma * config.sigma_decay).max(config.sigma_limit);
        lr = (lr * config.lr_decay).max(config.lr_limit);
    }
    Ok(MetaTrainResult { params: phi, log })
}
