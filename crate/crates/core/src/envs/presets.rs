//! Named fixed tasks.

use super::grid::{GridObject, GridWorldSpec};

fn uniform_over(cells: usize, starts: &[usize]) -> Vec<f64> {
    let mut d = vec![0.0; cells];
    for &c in starts {
        d[c] = 1.0 / starts.len() as f64;
    }
    d
}

fn collectible(cell: usize, reward: f64, respawn_prob: f64) -> GridObject {
    GridObject {
        cell,
        reward,
        terminal: false,
        respawn_prob,
    }
}

/// Held-out task with several small respawning rewards to farm.
pub fn dense() -> GridWorldSpec {
    let (w, h) = (5, 5);
    GridWorldSpec {
        width: w,
        height: h,
        objects: vec![
            collectible(0, 0.2, 0.3),
            collectible(4, 0.2, 0.3),
            collectible(w + 2, 0.3, 0.3),
            collectible(2 * w + 2, 0.1, 0.5),
            collectible(3 * w + 2, 0.3, 0.3),
            collectible(4 * w, 0.2, 0.3),
            collectible(4 * w + 4, 0.2, 0.3),
        ],
        episode_limit: 32,
        discount: 0.99,
        start_distribution: uniform_over(w * h, &[w + 1, w + 3, 3 * w + 1, 3 * w + 3]),
    }
}

/// Held-out task with one distant terminal reward.
pub fn sparse() -> GridWorldSpec {
    let (w, h) = (7, 7);
    GridWorldSpec {
        width: w,
        height: h,
        objects: vec![GridObject {
            cell: w * h - 1,
            reward: 1.0,
            terminal: true,
            respawn_prob: 0.0,
        }],
        episode_limit: 40,
        discount: 0.99,
        start_distribution: uniform_over(w * h, &[0]),
    }
}

/// Small fixed task used by the oracle and Monte Carlo checks. Episodes
/// last at most six steps.
pub fn benchmark_3x3() -> GridWorldSpec {
    GridWorldSpec {
        width: 3,
        height: 3,
        objects: vec![
            collectible(2, 0.3, 0.5),
            collectible(6, -0.5, 0.0),
            GridObject {
                cell: 8,
                reward: 1.0,
                terminal: true,
                respawn_prob: 0.0,
            },
        ],
        episode_limit: 6,
        discount: 0.9,
        start_distribution: uniform_over(9, &[0, 4]),
    }
}

/// Two cells with a terminal reward next to the start.
pub fn one_by_two() -> GridWorldSpec {
    GridWorldSpec {
        width: 2,
        height: 1,
        objects: vec![GridObject {
            cell: 1,
            reward: 1.0,
            terminal: true,
            respawn_prob: 0.0,
        }],
        episode_limit: 4,
        discount: 0.99,
        start_distribution: vec![1.0, 0.0],
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn presets_are_valid() {
        for spec in [super::dense(), super::sparse(), super::benchmark_3x3(), super::one_by_two()] {
            spec.validate().unwrap();
        }
    }
}
