use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Controller, RewardEnv};
use crate::nets::TanhGaussianPolicy;
use crate::{Error, Result};

/// Anything that maps a state to an action in `[-1, 1]^d`.
pub trait ActionPolicy {
    fn action_dim(&self) -> usize;
    fn act(&self, state: &[f64], rng: &mut dyn RngCore, deterministic: bool) -> Result<Vec<f64>>;
}

impl ActionPolicy for TanhGaussianPolicy {
    fn action_dim(&self) -> usize {
        TanhGaussianPolicy::action_dim(self)
    }

    fn act(&self, state: &[f64], rng: &mut dyn RngCore, deterministic: bool) -> Result<Vec<f64>> {
        TanhGaussianPolicy::act(self, state, rng, deterministic)
    }
}

/// Runs a scripted controller as a policy.
pub struct ControllerPolicy<C> {
    pub controller: C,
    pub action_dim: usize,
}

impl<C: Controller> ActionPolicy for ControllerPolicy<C> {
    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn act(&self, state: &[f64], _rng: &mut dyn RngCore, _deterministic: bool) -> Result<Vec<f64>> {
        Ok(self.controller.control(state))
    }
}

pub struct UniformRandomPolicy {
    pub action_dim: usize,
}

impl ActionPolicy for UniformRandomPolicy {
    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn act(&self, _state: &[f64], rng: &mut dyn RngCore, _deterministic: bool) -> Result<Vec<f64>> {
        Ok((0..self.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    /// Sample standard deviation (zero for a single episode).
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn std_error(&self) -> f64 {
        self.std / (self.returns.len() as f64).sqrt()
    }
}

/// Undiscounted return of `n_episodes` full rollouts.
///
/// Episode `i` uses stream `i` of a generator seeded by `seed`, for both the
/// reset and any action sampling.
pub fn evaluate_policy(
    env: &mut dyn RewardEnv,
    policy: &dyn ActionPolicy,
    n_episodes: usize,
    seed: u64,
    deterministic: bool,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::Empty("empty evaluation: n_episodes must be at least 1".into()));
    }
    if policy.action_dim() != env.action_dim() {
        return Err(Error::Shape(format!(
            "policy emits {} action dims, environment expects {}",
            policy.action_dim(),
            env.action_dim()
        )));
    }
    let mut returns = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ep as u64);
        let mut s = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let a = policy.act(&s, &mut rng, deterministic)?;
            let step = env.step(&a)?;
            total += env.reward(&s, &a, &step.next_state);
            s = step.next_state;
            if step.done {
                break;
            }
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = if returns.len() > 1 {
        (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalStats { mean, std, returns })
}
