use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{GridObject, GridWorldSpec};
use crate::error::{Error, Result};

/// Inclusive ranges describing the task family.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    pub width: (usize, usize),
    pub height: (usize, usize),
    pub objects: (usize, usize),
    pub reward: (f64, f64),
    pub respawn_prob: (f64, f64),
    pub episode_limit: (u32, u32),
    /// Probability that an object ends the episode when collected.
    pub terminal_prob: f64,
    pub discount: f64,
}

impl Default for GridDistribution {
    fn default() -> Self {
        Self {
            width: (5, 9),
            height: (5, 9),
            objects: (1, 4),
            reward: (-1.0, 1.0),
            respawn_prob: (0.0, 0.2),
            episode_limit: (16, 64),
            terminal_prob: 0.25,
            discount: 0.99,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: (T, T)) -> Result<()> {
    if r.0 > r.1 {
        return Err(Error::Config(format!("{name} range {r:?} is empty")));
    }
    Ok(())
}

fn draw_f64(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.random_range(r.0..=r.1)
    }
}

impl GridDistribution {
    pub fn validate(&self) -> Result<()> {
        check_range("width", self.width)?;
        check_range("height", self.height)?;
        check_range("objects", self.objects)?;
        check_range("reward", self.reward)?;
        check_range("respawn_prob", self.respawn_prob)?;
        check_range("episode_limit", self.episode_limit)?;
        if self.width.0 == 0 || self.height.0 == 0 || self.episode_limit.0 == 0 {
            return Err(Error::Config("grid sizes and episode limits must be positive".into()));
        }
        if self.objects.0 == 0 {
            return Err(Error::Config("every task needs at least one object".into()));
        }
        if self.reward.1 <= 0.0 {
            return Err(Error::Config(
                "reward range must admit a positive reward".into(),
            ));
        }
        if self.respawn_prob.0 < 0.0 || self.respawn_prob.1 > 1.0 {
            return Err(Error::Config("respawn probabilities must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.terminal_prob) {
            return Err(Error::Config("terminal_prob must lie in [0, 1]".into()));
        }
        if self.width.0 * self.height.0 < self.objects.1 {
            return Err(Error::Config("smallest grid cannot hold the largest object count".into()));
        }
        Ok(())
    }
}

/// Draws one task. The result depends only on `seed`. Objects sit on
/// distinct cells, sorted by cell; the first drawn object always carries a
/// positive reward; episodes start uniformly on any cell.
pub fn sample_gridworld(dist: &GridDistribution, seed: u64) -> Result<GridWorldSpec> {
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.random_range(dist.width.0..=dist.width.1);
    let height = rng.random_range(dist.height.0..=dist.height.1);
    let cells = width * height;
    let count = rng.random_range(dist.objects.0..=dist.objects.1).min(cells);
    let positions = sample_indices(&mut rng, cells, count).into_vec();
    let mut objects: Vec<GridObject> = positions
        .iter()
        .enumerate()
        .map(|(k, &cell)| {
            let reward = if k == 0 {
                draw_f64(&mut rng, (dist.reward.0.max(0.0), dist.reward.1)).max(f64::MIN_POSITIVE)
            } else {
                draw_f64(&mut rng, dist.reward)
            };
            let terminal = rng.random::<f64>() < dist.terminal_prob;
            let respawn_prob = draw_f64(&mut rng, dist.respawn_prob);
            GridObject {
                cell,
                reward,
                terminal,
                respawn_prob,
            }
        })
        .collect();
    objects.sort_by_key(|o| o.cell);
    let episode_limit = rng.random_range(dist.episode_limit.0..=dist.episode_limit.1);
    let spec = GridWorldSpec {
        width,
        height,
        objects,
        episode_limit,
        discount: dist.discount,
        start_distribution: vec![1.0 / cells as f64; cells],
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_ranges_give_the_unique_spec() {
        let dist = GridDistribution {
            width: (1, 1),
            height: (1, 1),
            objects: (1, 1),
            reward: (0.5, 0.5),
            respawn_prob: (0.3, 0.3),
            episode_limit: (8, 8),
            terminal_prob: 0.0,
            discount: 0.9,
        };
        let expected = GridWorldSpec {
            width: 1,
            height: 1,
            objects: vec![GridObject { cell: 0, reward: 0.5, terminal: false, respawn_prob: 0.3 }],
            episode_limit: 8,
            discount: 0.9,
            start_distribution: vec![1.0],
        };
        for seed in 0..20 {
            assert_eq!(sample_gridworld(&dist, seed).unwrap(), expected);
        }
    }

    #[test]
    fn same_seed_same_spec() {
        let dist = GridDistribution::default();
        assert_eq!(sample_gridworld(&dist, 42).unwrap(), sample_gridworld(&dist, 42).unwrap());
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let dist = GridDistribution { width: (6, 5), ..GridDistribution::default() };
        assert!(matches!(sample_gridworld(&dist, 0), Err(Error::Config(_))));
        let dist = GridDistribution { reward: (-1.0, -0.5), ..GridDistribution::default() };
        assert!(matches!(sample_gridworld(&dist, 0), Err(Error::Config(_))));
    }

    #[test]
    fn default_family_scan() {
        let dist = GridDistribution::default();
        let mut histogram = [0usize; 5];
        for seed in 0..1000 {
            let spec = sample_gridworld(&dist, seed).unwrap();
            spec.validate().unwrap();
            assert!((5..=9).contains(&spec.width) && (5..=9).contains(&spec.height));
            assert!((16..=64).contains(&spec.episode_limit));
            assert!(spec.objects.iter().any(|o| o.reward > 0.0));
            assert!(spec.objects.iter().all(|o| (-1.0..=1.0).contains(&o.reward)));
            histogram[spec.objects.len()] += 1;
        }
        assert_eq!(histogram[0], 0);
        assert!(histogram[1..].iter().all(|&c| c > 0), "{histogram:?}");
    }
}
