use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{clip_action, ContinuousEnv, Controller, RewardEnv, Step};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumConfig {
    pub max_torque: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub horizon: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self { max_torque: 2.0, max_speed: 8.0, dt: 0.05, gravity: 10.0, mass: 1.0, length: 1.0, horizon: 200 }
    }
}

/// Torque-limited pendulum; state `[theta, theta_dot]` with `theta = 0` upright.
///
/// Uses the rod inertia `m l^2 / 3`, so
/// `theta_ddot = 3 g / (2 l) sin(theta) + 3 u / (m l^2)` with `u = max_torque * a`.
/// Episodes always run to the horizon.
#[derive(Debug, Clone)]
pub struct Pendulum1D {
    pub config: PendulumConfig,
    theta: f64,
    theta_dot: f64,
    t: usize,
    done: bool,
}

/// Wraps into `(-pi, pi]`.
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

impl Pendulum1D {
    pub fn new(config: PendulumConfig) -> Self {
        Self { config, theta: PI, theta_dot: 0.0, t: 0, done: false }
    }

    fn torque(&self, action: &[f64]) -> f64 {
        self.config.max_torque * action[0].clamp(-1.0, 1.0)
    }
}

impl Default for Pendulum1D {
    fn default() -> Self {
        Self::new(PendulumConfig::default())
    }
}

impl ContinuousEnv for Pendulum1D {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.theta = wrap_angle(rng.random_range(-PI..PI));
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.t = 0;
        self.done = false;
        vec![self.theta, self.theta_dot]
    }

    fn reset_to(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 2 {
            return Err(Error::Shape(format!("pendulum state has 2 dims, got {}", state.len())));
        }
        self.theta = wrap_angle(state[0]);
        self.theta_dot = state[1].clamp(-self.config.max_speed, self.config.max_speed);
        self.t = 0;
        self.done = false;
        Ok(vec![self.theta, self.theta_dot])
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::Env("step called on a terminated pendulum episode".into()));
        }
        if action.len() != 1 {
            return Err(Error::Shape(format!("pendulum action has 1 dim, got {}", action.len())));
        }
        let c = &self.config;
        let u = self.torque(&clip_action(action));
        let acc = 3.0 * c.gravity / (2.0 * c.length) * self.theta.sin() + 3.0 / (c.mass * c.length * c.length) * u;
        self.theta_dot = (self.theta_dot + acc * c.dt).clamp(-c.max_speed, c.max_speed);
        self.theta = wrap_angle(self.theta + self.theta_dot * c.dt);
        self.t += 1;
        self.done = self.t >= c.horizon;
        Ok(Step { next_state: vec![self.theta, self.theta_dot], done: self.done, truncated: self.done })
    }
}

impl RewardEnv for Pendulum1D {
    fn reward(&self, state: &[f64], action: &[f64], _next_state: &[f64]) -> f64 {
        let u = self.torque(action);
        -(wrap_angle(state[0]).powi(2) + 0.1 * state[1].powi(2) + 0.001 * u * u)
    }
}

/// Energy pumping far from upright, PD stabilization near it.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumExpert {
    pub config: PendulumConfig,
    pub energy_gain: f64,
    pub kp: f64,
    pub kd: f64,
    /// Switch to PD once `|theta|` falls below this angle.
    pub capture_angle: f64,
}

impl Default for PendulumExpert {
    fn default() -> Self {
        Self { config: PendulumConfig::default(), energy_gain: 1.0, kp: 10.0, kd: 2.0, capture_angle: 0.6 }
    }
}

impl Controller for PendulumExpert {
    fn control(&self, state: &[f64]) -> Vec<f64> {
        let c = &self.config;
        let (theta, omega) = (wrap_angle(state[0]), state[1]);
        let torque = if theta.abs() < self.capture_angle {
            -(self.kp * theta + self.kd * omega)
        } else {
            let inertia = c.mass * c.length * c.length / 3.0;
            let energy = 0.5 * inertia * omega * omega + 0.5 * c.mass * c.gravity * c.length * theta.cos();
            let target = 0.5 * c.mass * c.gravity * c.length;
            // dE/dt = u * omega; push along omega while below the upright energy
            let dir = if omega.abs() < 1e-3 { 1.0 } else { omega.signum() };
            self.energy_gain * (target - energy) * dir
        };
        vec![(torque / c.max_torque).clamp(-1.0, 1.0)]
    }
}
