use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{clip_action, ContinuousEnv, Controller, RewardEnv, Step};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassConfig {
    pub goal: [f64; 2],
    pub dt: f64,
    pub goal_radius: f64,
    pub horizon: usize,
    /// Episodes start uniformly inside the disc of `init_radius` around `init_center`.
    pub init_center: [f64; 2],
    pub init_radius: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self { goal: [0.0, 0.0], dt: 0.05, goal_radius: 0.05, horizon: 100, init_center: [1.0, 0.0], init_radius: 0.25 }
    }
}

/// Planar point mass driven by velocity commands: `s' = s + dt * a`.
///
/// Reward `-||s' - g||`; the episode ends once `||s' - g|| < goal_radius` or
/// after `horizon` steps.
#[derive(Debug, Clone)]
pub struct PointMass2D {
    pub config: PointMassConfig,
    pos: [f64; 2],
    t: usize,
    done: bool,
}

impl PointMass2D {
    pub fn new(config: PointMassConfig) -> Self {
        let pos = config.init_center;
        Self { config, pos, t: 0, done: false }
    }

    fn dist_to_goal(&self, p: &[f64]) -> f64 {
        ((p[0] - self.config.goal[0]).powi(2) + (p[1] - self.config.goal[1]).powi(2)).sqrt()
    }
}

impl Default for PointMass2D {
    fn default() -> Self {
        Self::new(PointMassConfig::default())
    }
}

impl ContinuousEnv for PointMass2D {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let r = self.config.init_radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let c = self.config.init_center;
        self.pos = [c[0] + r * phi.cos(), c[1] + r * phi.sin()];
        self.t = 0;
        self.done = false;
        self.pos.to_vec()
    }

    fn reset_to(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 2 {
            return Err(Error::Shape(format!("point mass state has 2 dims, got {}", state.len())));
        }
        self.pos = [state[0], state[1]];
        self.t = 0;
        self.done = false;
        Ok(self.pos.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::Env("step called on a terminated point-mass episode".into()));
        }
        if action.len() != 2 {
            return Err(Error::Shape(format!("point mass action has 2 dims, got {}", action.len())));
        }
        let a = clip_action(action);
        self.pos = [self.pos[0] + self.config.dt * a[0], self.pos[1] + self.config.dt * a[1]];
        self.t += 1;
        let reached = self.dist_to_goal(&self.pos) < self.config.goal_radius;
        let truncated = !reached && self.t >= self.config.horizon;
        self.done = reached || truncated;
        Ok(Step { next_state: self.pos.to_vec(), done: self.done, truncated })
    }
}

impl RewardEnv for PointMass2D {
    fn reward(&self, _state: &[f64], _action: &[f64], next_state: &[f64]) -> f64 {
        -self.dist_to_goal(next_state)
    }
}

/// Mean undiscounted return of [`PointMassExpert::default`] on the default
/// task: 100 deterministic episodes, `evaluate_policy` seed 0.
pub const POINT_MASS_EXPERT_RETURN: f64 = -10.093476815274299;
/// Standard error of [`POINT_MASS_EXPERT_RETURN`].
pub const POINT_MASS_EXPERT_STD_ERROR: f64 = 0.24248434947333952;
/// Mean return of the uniform-random policy under the same protocol.
pub const POINT_MASS_RANDOM_RETURN: f64 = -103.90415659597461;

/// Fraction of the random-to-expert gap closed by `mean_return`.
pub fn point_mass_normalized_score(mean_return: f64) -> f64 {
    (mean_return - POINT_MASS_RANDOM_RETURN) / (POINT_MASS_EXPERT_RETURN - POINT_MASS_RANDOM_RETURN)
}

/// Proportional controller `a = clip(gain * (g - s), -1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassExpert {
    pub goal: [f64; 2],
    pub gain: f64,
}

impl Default for PointMassExpert {
    fn default() -> Self {
        Self { goal: [0.0, 0.0], gain: 5.0 }
    }
}

impl Controller for PointMassExpert {
    fn control(&self, state: &[f64]) -> Vec<f64> {
        (0..2).map(|i| (self.gain * (self.goal[i] - state[i])).clamp(-1.0, 1.0)).collect()
    }
}
