use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{BoundMlp, Mlp, MlpConfig};
use crate::diffcore::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Added inside `log(1 - a^2 + eps)` for the tanh change of variables.
pub const SQUASH_EPS: f64 = 1e-6;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Emitted actions are kept inside `[-ACTION_LIMIT, ACTION_LIMIT]`, where
/// `tanh` would otherwise round to exactly +-1.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-12;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over pre-squash actions, squashed through `tanh`.
///
/// The mean comes from an MLP over the state; the log standard deviation is a
/// free per-dimension parameter clamped to `log_std_bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhGaussianPolicy {
    pub mean_net: Mlp,
    /// `[1, action_dim]`
    pub log_std: Tensor,
    pub log_std_bounds: (f64, f64),
}

/// Reparametrized draw: actions plus their log-density, both in the graph.
pub struct PolicySample<'g> {
    pub action: Var<'g>,
    pub log_prob: Var<'g>,
}

impl TanhGaussianPolicy {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, cfg: &MlpConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            mean_net: Mlp::new(state_dim, action_dim, cfg, rng)?,
            log_std: Tensor::zeros(&[1, action_dim]),
            log_std_bounds: (LOG_STD_MIN, LOG_STD_MAX),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.mean_net.params();
        p.push(&self.log_std);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.mean_net.params_mut();
        p.push(&mut self.log_std);
        p
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut p = self.mean_net.named_params("mean_net");
        p.push(("log_std".to_string(), &self.log_std));
        p
    }

    pub fn bind<'g>(&self, g: &'g Graph) -> BoundPolicy<'g> {
        BoundPolicy {
            mean_net: self.mean_net.bind(g),
            log_std: g.param(self.log_std.clone()),
            bounds: self.log_std_bounds,
        }
    }

    fn clamped_log_std(&self) -> Vec<f64> {
        let (lo, hi) = self.log_std_bounds;
        self.log_std.data().iter().map(|v| v.clamp(lo, hi)).collect()
    }

    /// Action for a single state, without a graph. `deterministic` returns `tanh(mu(s))`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R, deterministic: bool) -> Result<Vec<f64>> {
        let x = Tensor::row_vector(state)?;
        if x.cols() != self.state_dim() {
            return Err(Error::Shape(format!("state has {} dims, policy expects {}", x.cols(), self.state_dim())));
        }
        let mu = self.mean_net.forward_values(&x);
        let log_std = self.clamped_log_std();
        Ok(mu
            .data()
            .iter()
            .zip(&log_std)
            .map(|(&m, &ls)| {
                let pre = if deterministic {
                    m
                } else {
                    let eps: f64 = rng.sample(StandardNormal);
                    m + ls.exp() * eps
                };
                pre.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)
            })
            .collect())
    }

    /// Log-density of `actions` at `states`, on plain tensors.
    pub fn log_prob_values(&self, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        check_actions(actions)?;
        let mu = self.mean_net.forward_values(states);
        let log_std = self.clamped_log_std();
        let d = self.action_dim();
        Ok((0..states.rows())
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let a = actions.get(i, j);
                        let z = (a.atanh() - mu.get(i, j)) / log_std[j].exp();
                        -0.5 * z * z - log_std[j] - HALF_LOG_2PI - (1.0 - a * a + SQUASH_EPS).ln()
                    })
                    .sum()
            })
            .collect())
    }

    /// Monte-Carlo entropy estimate `-E[log pi(a|s)]` averaged over `states`.
    pub fn entropy_estimate<R: Rng + ?Sized>(&self, states: &Tensor, samples_per_state: usize, rng: &mut R) -> Result<f64> {
        let g = Graph::new();
        let policy = self.bind(&g);
        let n = states.rows();
        let mut rows = Vec::with_capacity(n * samples_per_state);
        for i in 0..n {
            for _ in 0..samples_per_state {
                rows.push(states.row(i).to_vec());
            }
        }
        let s = g.constant(Tensor::from_rows(&rows)?);
        let sample = policy.sample(s, rng);
        Ok(-g.evaluate(sample.log_prob)?.data().iter().sum::<f64>() / rows.len() as f64)
    }
}

fn check_actions(actions: &Tensor) -> Result<()> {
    if let Some(a) = actions.data().iter().find(|a| a.abs() >= 1.0) {
        return Err(Error::Domain(format!("action component {a} lies outside (-1, 1)")));
    }
    Ok(())
}

/// A [`TanhGaussianPolicy`] whose parameters live in a graph.
pub struct BoundPolicy<'g> {
    pub mean_net: BoundMlp<'g>,
    pub log_std: Var<'g>,
    bounds: (f64, f64),
}

impl<'g> BoundPolicy<'g> {
    /// Parameters in the same order as [`TanhGaussianPolicy::params`].
    pub fn params(&self) -> Vec<Var<'g>> {
        let mut p = self.mean_net.params();
        p.push(self.log_std);
        p
    }

    fn log_std_clamped(&self) -> Var<'g> {
        self.log_std.clamp(self.bounds.0, self.bounds.1)
    }

    /// Reparametrized sample with freshly drawn standard-normal noise.
    pub fn sample<R: Rng + ?Sized>(&self, states: Var<'g>, rng: &mut R) -> PolicySample<'g> {
        let n = states.value().rows();
        let d = self.log_std.value().cols();
        let eps: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(states, &Tensor::from_matrix_parts(n, d, eps))
    }

    /// `a = tanh(mu(s) + sigma * eps)` with
    /// `log pi = sum_j [N(eps_j) - log sigma_j] - sum_j log(1 - a_j^2 + 1e-6)`.
    pub fn sample_with_noise(&self, states: Var<'g>, eps: &Tensor) -> PolicySample<'g> {
        let g = states.graph();
        let mu = self.mean_net.forward(states);
        let log_std = self.log_std_clamped();
        let eps_v = g.constant(eps.clone());
        let pre = mu + eps_v.mul_row(log_std.exp());
        let action = pre.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT);
        let n = eps.rows();
        let gauss = eps_v.square().scale(-0.5).add_scalar(-HALF_LOG_2PI).sum_cols()
            - log_std.broadcast_rows(n).sum_cols();
        let squash = action.square().affine(-1.0, 1.0 + SQUASH_EPS).log().sum_cols();
        PolicySample { action, log_prob: gauss - squash }
    }

    /// Log-density of given `actions` (`[n, d]`, every entry in `(-1, 1)`), `[n, 1]`.
    pub fn log_prob(&self, states: Var<'g>, actions: &Tensor) -> Result<Var<'g>> {
        check_actions(actions)?;
        let g = states.graph();
        let mu = self.mean_net.forward(states);
        let log_std = self.log_std_clamped();
        let pre = g.constant(actions.map(f64::atanh));
        let z = (pre - mu).mul_row(log_std.neg().exp());
        let n = actions.rows();
        let gauss = z.square().scale(-0.5).add_scalar(-HALF_LOG_2PI).sum_cols()
            - log_std.broadcast_rows(n).sum_cols();
        let squash = g.constant(Tensor::from_matrix_parts(
            n,
            1,
            (0..n).map(|i| actions.row(i).iter().map(|a| (1.0 - a * a + SQUASH_EPS).ln()).sum()).collect(),
        ));
        Ok(gauss - squash)
    }
}
