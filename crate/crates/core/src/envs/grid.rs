use rand::Rng;

use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::Usage(format!("action index {index} out of range")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridObject {
    pub cell: usize,
    pub reward: f64,
    pub terminal: bool,
    pub respawn_prob: f64,
}

/// A tabular grid MDP. Cells are indexed row-major: `cell = y * width + x`,
/// with `Up` decreasing `y`.
///
/// Dynamics of one step: the agent moves (walls block), every absent
/// non-terminal object independently reappears with its `respawn_prob`,
/// then a present object on the agent's cell is collected. Collecting a
/// terminal object, or reaching `episode_limit` steps, ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<GridObject>,
    pub episode_limit: u32,
    pub discount: f64,
    pub start_distribution: Vec<f64>,
}

/// Dynamic state: agent cell, object-presence bitmask and steps taken in
/// the current episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub cell: usize,
    pub present: u32,
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: EnvState,
    pub reward: f64,
    pub done: bool,
}

pub const MAX_OBJECTS: usize = 32;

impl GridWorldSpec {
    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// Observation width: one-hot cell followed by presence flags.
    pub fn obs_width(&self) -> usize {
        self.num_cells() + self.num_objects()
    }

    pub fn all_present(&self) -> u32 {
        if self.objects.len() == MAX_OBJECTS {
            u32::MAX
        } else {
            (1u32 << self.objects.len()) - 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("grid must be non-empty, got {}x{}", self.width, self.height));
        }
        if self.objects.len() > MAX_OBJECTS {
            return bad(format!("at most {MAX_OBJECTS} objects supported"));
        }
        if self.episode_limit == 0 {
            return bad("episode_limit must be positive".into());
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount must lie in (0, 1), got {}", self.discount));
        }
        let cells = self.num_cells();
        let mut seen = vec![false; cells];
        for (i, o) in self.objects.iter().enumerate() {
            if o.cell >= cells {
                return bad(format!("object {i} at cell {} is outside the {cells}-cell grid", o.cell));
            }
            if seen[o.cell] {
                return bad(format!("two objects share cell {}", o.cell));
            }
            seen[o.cell] = true;
            if !(0.0..=1.0).contains(&o.respawn_prob) {
                return bad(format!("object {i} respawn_prob {} outside [0, 1]", o.respawn_prob));
            }
            if !o.reward.is_finite() {
                return bad(format!("object {i} has a non-finite reward"));
            }
        }
        if self.start_distribution.len() != cells {
            return bad(format!(
                "start distribution has {} entries for {cells} cells",
                self.start_distribution.len()
            ));
        }
        if self.start_distribution.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return bad("start probabilities must be non-negative".into());
        }
        let total: f64 = self.start_distribution.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("start distribution sums to {total}, not 1"));
        }
        Ok(())
    }

    pub fn move_cell(&self, cell: usize, action: Action) -> usize {
        let (x, y) = (cell % self.width, cell / self.width);
        let (nx, ny) = match action {
            Action::Up if y > 0 => (x, y - 1),
            Action::Down if y + 1 < self.height => (x, y + 1),
            Action::Left if x > 0 => (x - 1, y),
            Action::Right if x + 1 < self.width => (x + 1, y),
            _ => (x, y),
        };
        ny * self.width + nx
    }

    pub fn object_at(&self, cell: usize) -> Option<usize> {
        self.objects.iter().position(|o| o.cell == cell)
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cell = self.start_distribution.len() - 1;
        for (i, p) in self.start_distribution.iter().enumerate() {
            acc += p;
            if u < acc {
                cell = i;
                break;
            }
        }
        // Guard against rounding in the tail of the cumulative sum.
        while self.start_distribution[cell] == 0.0 && cell > 0 {
            cell -= 1;
        }
        EnvState {
            cell,
            present: self.all_present(),
            t: 0,
        }
    }

    /// Writes the one-hot cell plus presence flags into `out`.
    pub fn observe(&self, state: &EnvState, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.obs_width());
        out.iter_mut().for_each(|v| *v = 0.0);
        out[state.cell] = 1.0;
        let cells = self.num_cells();
        for i in 0..self.objects.len() {
            if state.present & (1 << i) != 0 {
                out[cells + i] = 1.0;
            }
        }
    }
}

/// Advances one environment step. Consumes one uniform draw per absent
/// non-terminal object, in object order, so identical rng streams replay
/// identical trajectories.
pub fn env_step<R: Rng + ?Sized>(
    spec: &GridWorldSpec,
    state: &EnvState,
    action: Action,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.cell >= spec.num_cells() {
        return Err(Error::Usage(format!(
            "state cell {} outside {}-cell grid",
            state.cell,
            spec.num_cells()
        )));
    }
    if state.present & !spec.all_present() != 0 {
        return Err(Error::Usage(format!(
            "presence mask {:#b} refers to missing objects",
            state.present
        )));
    }
    let cell = spec.move_cell(state.cell, action);
    let mut present = state.present;
    for (i, obj) in spec.objects.iter().enumerate() {
        let bit = 1u32 << i;
        if present & bit == 0 && !obj.terminal {
            let u: f64 = rng.random();
            if u < obj.respawn_prob {
                present |= bit;
            }
        }
    }
    let mut reward = 0.0;
    let mut done = false;
    if let Some(i) = spec.object_at(cell) {
        let bit = 1u32 << i;
        if present & bit != 0 {
            let obj = &spec.objects[i];
            reward = obj.reward;
            present &= !bit;
            done = obj.terminal;
        }
    }
    let t = state.t + 1;
    if t >= spec.episode_limit {
        done = true;
    }
    Ok(StepOutcome {
        next: EnvState { cell, present, t },
        reward,
        done,
    })
}
