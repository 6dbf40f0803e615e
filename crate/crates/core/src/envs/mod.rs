//! Toy continuous-control tasks with scripted experts, demonstration files,
//! policy evaluation, and exact finite MDPs.
//!
//! Dynamics ([`ContinuousEnv`]) and rewards ([`RewardEnv`]) are separate
//! traits. Trainers only ever receive the former, so they cannot read a
//! reward even in the optional online mode.

mod demos;
mod eval;
mod pendulum;
mod point_mass;
mod tabular;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::RngCore;

pub use demos::{generate_demos, DEMO_ACTION_LIMIT, read_demos, write_demos, DemoRecord, Trajectory, Transition};
pub use eval::{evaluate_policy, ActionPolicy, ControllerPolicy, EvalStats, UniformRandomPolicy};
pub use pendulum::{Pendulum1D, PendulumConfig, PendulumExpert};
pub use point_mass::{
    point_mass_normalized_score, PointMass2D, PointMassConfig, PointMassExpert, POINT_MASS_EXPERT_RETURN,
    POINT_MASS_EXPERT_STD_ERROR, POINT_MASS_RANDOM_RETURN,
};
pub use tabular::{tabular_occupancy, TabularMdp, TabularPolicy};

use crate::Result;

/// Outcome of one transition. `done` is the termination flag `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Episode ended by the horizon rather than by reaching a terminal condition.
    pub truncated: bool,
}

/// Reward-free dynamics with actions in `[-1, 1]^action_dim`.
pub trait ContinuousEnv {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Starts an episode from a given state.
    fn reset_to(&mut self, state: &[f64]) -> Result<Vec<f64>>;
    /// Errors when called after the episode has terminated.
    fn step(&mut self, action: &[f64]) -> Result<Step>;
}

/// Reward access, used by evaluation only.
pub trait RewardEnv: ContinuousEnv {
    fn reward(&self, state: &[f64], action: &[f64], next_state: &[f64]) -> f64;
}

/// Closed-form expert controller.
pub trait Controller {
    fn control(&self, state: &[f64]) -> Vec<f64>;
}

/// Wraps an environment and counts `step` calls through a shared counter.
pub struct CountingEnv<E> {
    inner: E,
    steps: Arc<AtomicUsize>,
}

impl<E> CountingEnv<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, steps: Arc::new(AtomicUsize::new(0)) }
    }

    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.steps)
    }

    pub fn steps(&self) -> usize {
        self.steps.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: ContinuousEnv> ContinuousEnv for CountingEnv<E> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner.reset(rng)
    }
    fn reset_to(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        self.inner.reset_to(state)
    }
    fn step(&mut self, action: &[f64]) -> Result<Step> {
        self.steps.fetch_add(1, Ordering::SeqCst);
        self.inner.step(action)
    }
}

impl<E: RewardEnv> RewardEnv for CountingEnv<E> {
    fn reward(&self, state: &[f64], action: &[f64], next_state: &[f64]) -> f64 {
        self.inner.reward(state, action, next_state)
    }
}

pub(crate) fn clip_action(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
}
