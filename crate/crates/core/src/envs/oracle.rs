//! Exact dynamic programming over the augmented state (cell, presence flags,
//! step index). Because every episode is cut at `episode_limit`, backward
//! induction from the final step converges exactly after `episode_limit`
//! sweeps; the Bellman residual of the returned values is zero.

use super::grid::{Action, EnvState, GridWorldSpec, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Largest augmented state space (cells x presence patterns) the oracle
/// accepts by default.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

struct Augmented<'a> {
    spec: &'a GridWorldSpec,
    /// Object indices whose presence can change within an episode.
    dynamic: Vec<usize>,
    /// Presence bits of terminal objects, always set while an episode runs.
    fixed_bits: u32,
    /// For each compact mask: reachable compact masks after respawn, with probability.
    respawn: Vec<Vec<(usize, f64)>>,
}

impl<'a> Augmented<'a> {
    fn new(spec: &'a GridWorldSpec, cap: usize) -> Result<Self> {
        spec.validate()?;
        let dynamic: Vec<usize> = (0..spec.num_objects())
            .filter(|&i| !spec.objects[i].terminal)
            .collect();
        let patterns = 1usize
            .checked_shl(dynamic.len() as u32)
            .filter(|p| p.checked_mul(spec.num_cells()).is_some_and(|n| n <= cap))
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "{} cells with {} respawning objects exceeds the oracle cap of {cap} states",
                    spec.num_cells(),
                    dynamic.len()
                ))
            })?;
        let fixed_bits = (0..spec.num_objects())
            .filter(|&i| spec.objects[i].terminal)
            .fold(0u32, |m, i| m | (1 << i));
        let respawn = (0..patterns)
            .map(|mask| {
                let absent: Vec<usize> = (0..dynamic.len()).filter(|k| mask & (1 << k) == 0).collect();
                let mut outcomes = Vec::with_capacity(1 << absent.len());
                for subset in 0..(1usize << absent.len()) {
                    let mut prob = 1.0;
                    let mut next = mask;
                    for (bit, &k) in absent.iter().enumerate() {
                        let rho = spec.objects[dynamic[k]].respawn_prob;
                        if subset & (1 << bit) != 0 {
                            prob *= rho;
                            next |= 1 << k;
                        } else {
                            prob *= 1.0 - rho;
                        }
                    }
                    if prob > 0.0 {
                        outcomes.push((next, prob));
                    }
                }
                outcomes
            })
            .collect();
        Ok(Self {
            spec,
            dynamic,
            fixed_bits,
            respawn,
        })
    }

    fn patterns(&self) -> usize {
        self.respawn.len()
    }

    fn full_mask(&self, compact: usize) -> u32 {
        self.dynamic
            .iter()
            .enumerate()
            .filter(|(k, _)| compact & (1 << k) != 0)
            .fold(self.fixed_bits, |m, (_, &i)| m | (1 << i))
    }

    fn compact_all_present(&self) -> usize {
        self.patterns() - 1
    }

    /// Backward induction. `step_value` maps an immediate reward to the
    /// accumulated quantity; `choose` reduces the five action values at an
    /// augmented state to a state value.
    fn induct<S, C>(&self, discount: f64, step_value: S, mut choose: C) -> f64
    where
        S: Fn(f64) -> f64,
        C: FnMut(&EnvState, &[f64; NUM_ACTIONS]) -> f64,
    {
        let spec = self.spec;
        let cells = spec.num_cells();
        let patterns = self.patterns();
        let index = |cell: usize, compact: usize| compact * cells + cell;
        let mut next_values = vec![0.0; cells * patterns];
        let mut values = vec![0.0; cells * patterns];
        for t in (0..spec.episode_limit).rev() {
            let last_step = t + 1 >= spec.episode_limit;
            for compact in 0..patterns {
                let present = self.full_mask(compact);
                for cell in 0..cells {
                    let mut q = [0.0; NUM_ACTIONS];
                    for action in Action::ALL {
                        let target = spec.move_cell(cell, action);
                        let object = spec.object_at(target);
                        let mut acc = 0.0;
                        for &(after, prob) in &self.respawn[compact] {
                            let mut reward = 0.0;
                            let mut done = last_step;
                            let mut landed = after;
                            if let Some(i) = object {
                                let obj = &spec.objects[i];
                                if obj.terminal {
                                    reward = obj.reward;
                                    done = true;
                                } else {
                                    let k = self.dynamic.iter().position(|&d| d == i).expect("dynamic");
                                    if after & (1 << k) != 0 {
                                        reward = obj.reward;
                                        landed = after & !(1 << k);
                                    }
                                }
                            }
                            let future = if done {
                                0.0
                            } else {
                                discount * next_values[index(target, landed)]
                            };
                            acc += prob * (step_value(reward) + future);
                        }
                        q[action.index()] = acc;
                    }
                    let state = EnvState { cell, present, t };
                    values[index(cell, compact)] = choose(&state, &q);
                }
            }
            std::mem::swap(&mut values, &mut next_values);
        }
        let start = self.compact_all_present();
        spec.start_distribution
            .iter()
            .enumerate()
            .map(|(cell, p)| p * next_values[index(cell, start)])
            .sum()
    }
}

/// Optimal expected discounted return from the start distribution.
pub fn optimal_return_oracle(spec: &GridWorldSpec) -> Result<f64> {
    optimal_return_with_cap(spec, DEFAULT_STATE_CAP)
}

pub fn optimal_return_with_cap(spec: &GridWorldSpec, cap: usize) -> Result<f64> {
    let aug = Augmented::new(spec, cap)?;
    Ok(aug.induct(spec.discount, |r| r, |_, q| q.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
}

/// Exact per-episode statistics of a fixed (possibly time-dependent) policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub expected_length: f64,
}

pub fn evaluate_policy<P>(spec: &GridWorldSpec, policy: P) -> Result<EpisodeStats>
where
    P: Fn(&EnvState) -> [f64; NUM_ACTIONS],
{
    let aug = Augmented::new(spec, DEFAULT_STATE_CAP)?;
    let expect = |s: &EnvState, q: &[f64; NUM_ACTIONS]| {
        let pi = policy(s);
        pi.iter().zip(q).map(|(p, v)| p * v).sum()
    };
    Ok(EpisodeStats {
        discounted_return: aug.induct(spec.discount, |r| r, expect),
        undiscounted_return: aug.induct(1.0, |r| r, expect),
        expected_length: aug.induct(1.0, |_| 1.0, expect),
    })
}

/// `raw / oracle`. Values are returned unclamped; reporting code may clamp
/// for display.
pub fn normalize_return(raw: f64, oracle: f64) -> Result<f64> {
    if oracle == 0.0 || !oracle.is_finite() {
        return Err(Error::Division(format!(
            "cannot normalise return {raw} against oracle value {oracle}"
        )));
    }
    Ok(raw / oracle)
}
