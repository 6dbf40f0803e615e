//! The SoftDICE trainer.
//!
//! A Lipschitz critic `f` and a tanh-Gaussian policy play
//! `min_pi max_f  J_E - J_pi` with
//!
//! ```text
//! J_E  = mean_E [ f(s, a) - gamma (1 - e) f(s', a') + beta log pi(a' | s') ],  a' ~ pi(. | s')
//! J_pi = (1 - gamma) mean_0 [ f(s0, a0) ],                                       a0 ~ pi(. | s0)
//! J_GP = mean_E [ (||grad_(s,a) f(s, a)|| - 1)^2 ]
//! ```
//!
//! Each step the critic ascends `J_E - J_pi - lambda J_GP`, then the policy
//! descends `J_E - J_pi` against the updated critic on the same batch and the
//! same reparametrization noise. Training reads only the demonstration buffer;
//! environments are touched for evaluation rollouts and the optional online
//! mode.

mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use metrics::{CsvMetrics, MetricsSink, NullSink, StepMetrics, METRICS_HEADER};

use crate::diffcore::{Graph, Tensor, Var};
use crate::envs::{evaluate_policy, ContinuousEnv, EvalStats, RewardEnv, Transition};
use crate::nets::{orthogonal_penalty, AdamState, BoundCritic, BoundPolicy, CriticF, MlpConfig, TanhGaussianPolicy};
use crate::replay::{mix_sample, Batch, DemoBuffer, OnlineBuffer};
use crate::{Error, Result};

/// Added under the square root of the gradient norm so the penalty stays
/// differentiable where the critic is flat.
pub const GP_NORM_EPS: f64 = 1e-12;

/// Periodic on-policy rollouts mixed into the expert batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub alpha: f64,
    /// Roll out one episode after this many updates.
    pub rollout_every: u64,
    pub capacity: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self { alpha: 0.1, rollout_every: 5, capacity: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftDiceConfig {
    pub gamma: f64,
    pub beta: f64,
    pub gp_lambda: f64,
    pub lr_critic: f64,
    pub lr_policy: f64,
    pub batch_size: usize,
    pub iterations: u64,
    /// Evaluate every this many steps (and after the last one); 0 disables evaluation.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub policy_net: MlpConfig,
    pub critic_net: MlpConfig,
    /// Weight of `sum ||W^T W - I||^2` over the policy's weights.
    pub orthogonal_reg: f64,
    pub online: Option<OnlineConfig>,
}

impl Default for SoftDiceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            beta: 0.01,
            gp_lambda: 10.0,
            lr_critic: 1e-3,
            lr_policy: 1e-5,
            batch_size: 256,
            iterations: 20_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            seed: 0,
            policy_net: MlpConfig::default(),
            critic_net: MlpConfig::default(),
            orthogonal_reg: 0.0,
            online: None,
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Precondition(format!("gamma = {gamma} must lie in [0, 1)")));
    }
    Ok(())
}

pub(crate) fn check_common(lr_critic: f64, lr_policy: f64, batch_size: usize, eval_interval: u64, eval_episodes: usize) -> Result<()> {
    for (name, v) in [("lr_critic", lr_critic), ("lr_policy", lr_policy)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and non-negative")));
        }
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    if eval_interval > 0 && eval_episodes == 0 {
        return Err(Error::InvalidConfig("eval_episodes must be positive when evaluation is enabled".into()));
    }
    Ok(())
}

impl SoftDiceConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (name, v) in [("beta", self.beta), ("gp_lambda", self.gp_lambda), ("orthogonal_reg", self.orthogonal_reg)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        check_common(self.lr_critic, self.lr_policy, self.batch_size, self.eval_interval, self.eval_episodes)?;
        if let Some(o) = &self.online {
            if !(0.0..=1.0).contains(&o.alpha) || o.rollout_every == 0 || o.capacity == 0 {
                return Err(Error::InvalidConfig(format!("online settings out of range: {o:?}")));
            }
        }
        Ok(())
    }
}

/// Builds the policy, then the critic, from one seeded stream.
///
/// Every trainer uses this, so equal seeds give equal initial networks.
pub fn init_networks(
    state_dim: usize,
    action_dim: usize,
    policy_net: &MlpConfig,
    critic_net: &MlpConfig,
    seed: u64,
) -> Result<(TanhGaussianPolicy, CriticF, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = TanhGaussianPolicy::new(state_dim, action_dim, policy_net, &mut rng)?;
    let critic = CriticF::new(state_dim, action_dim, critic_net, &mut rng)?;
    Ok((policy, critic, rng))
}

/// Parameters, optimizer moments, step counter, and the sampling stream.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub policy: TanhGaussianPolicy,
    pub critic: CriticF,
    pub policy_opt: AdamState,
    pub critic_opt: AdamState,
    pub step: u64,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(state_dim: usize, action_dim: usize, policy_net: &MlpConfig, critic_net: &MlpConfig, seed: u64) -> Result<Self> {
        let (policy, critic, rng) = init_networks(state_dim, action_dim, policy_net, critic_net, seed)?;
        Ok(Self::from_parts(policy, critic, rng))
    }

    pub fn from_parts(policy: TanhGaussianPolicy, critic: CriticF, rng: ChaCha8Rng) -> Self {
        let policy_opt = AdamState::new(&policy.params());
        let critic_opt = AdamState::new(&critic.net.params());
        Self { policy, critic, policy_opt, critic_opt, step: 0, rng }
    }

    fn check_finite(&self, last: &StepReport) -> Result<()> {
        let bad = self
            .policy
            .named_params()
            .into_iter()
            .chain(self.critic.net.named_params("critic"))
            .find(|(_, t)| !t.is_finite());
        match bad {
            Some((name, _)) => Err(Error::Diverged {
                step: self.step,
                detail: format!("parameter {name} is non-finite; last metrics {last:?}"),
            }),
            None => Ok(()),
        }
    }
}

/// Everything random that one update consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBatch {
    pub expert: Batch,
    pub initial_states: Tensor,
    /// Standard-normal noise for `a' ~ pi(. | s')`, `[B, action_dim]`.
    pub noise_next: Tensor,
    /// Standard-normal noise for `a0 ~ pi(. | s0)`, `[B, action_dim]`.
    pub noise_initial: Tensor,
}

pub(crate) fn normal_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::matrix(rows, cols, data).expect("finite noise")
}

/// Draws the expert batch (mixed with online data when configured), the
/// virtual initial states, and the policy noise, in that order.
pub fn sample_step_batch<R: Rng + ?Sized>(
    demo: &DemoBuffer,
    online: Option<&OnlineBuffer>,
    alpha: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<StepBatch> {
    let expert = if alpha > 0.0 {
        mix_sample(demo, online, alpha, batch_size, rng)?.batch
    } else {
        demo.sample_transitions(batch_size, rng)?
    };
    let initial_states = demo.sample_initial_states(batch_size, rng)?;
    let d = demo.action_dim();
    let noise_next = normal_noise(batch_size, d, rng);
    let noise_initial = normal_noise(batch_size, d, rng);
    Ok(StepBatch { expert, initial_states, noise_next, noise_initial })
}

/// `J_E` and the log-density of the sampled next actions.
pub struct ExpertTerms<'g> {
    pub loss: Var<'g>,
    /// `[B, 1]`
    pub log_prob: Var<'g>,
}

fn first_bad_row(per_sample: Var<'_>) -> Option<usize> {
    let v = per_sample.value();
    (0..v.rows()).find(|&i| v.row(i).iter().any(|x| !x.is_finite()))
}

fn finite_or_abort<'g>(what: &str, per_sample: Var<'g>) -> Result<()> {
    match first_bad_row(per_sample) {
        Some(i) => Err(Error::Numerical(format!("{what} is non-finite at sample {i}"))),
        None => Ok(()),
    }
}

/// `J_E` with `a' = tanh(mu(s') + sigma * noise)`.
pub fn loss_expert_with_noise<'g>(
    g: &'g Graph,
    f: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    batch: &Batch,
    gamma: f64,
    beta: f64,
    noise: &Tensor,
) -> Result<ExpertTerms<'g>> {
    check_gamma(gamma)?;
    if batch.is_empty() {
        return Err(Error::Empty("expert batch is empty".into()));
    }
    let s = g.constant(batch.s.clone());
    let a = g.constant(batch.a.clone());
    let s_next = g.constant(batch.s_next.clone());
    let mask = g.constant(batch.e.map(|e| gamma * (1.0 - e)));
    let sample = pi.sample_with_noise(s_next, noise);
    let per_sample = f.forward(s, a) - mask * f.forward(s_next, sample.action) + sample.log_prob.scale(beta);
    finite_or_abort("J_E", per_sample)?;
    Ok(ExpertTerms { loss: per_sample.mean(), log_prob: sample.log_prob })
}

/// `J_E` on an expert batch, drawing `a'` from `rng`.
pub fn loss_expert<'g, R: Rng + ?Sized>(
    g: &'g Graph,
    f: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    batch: &Batch,
    gamma: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Var<'g>> {
    let noise = normal_noise(batch.len(), batch.a.cols(), rng);
    Ok(loss_expert_with_noise(g, f, pi, batch, gamma, beta, &noise)?.loss)
}

/// `J_pi` with `a0 = tanh(mu(s0) + sigma * noise)`.
pub fn loss_initial_with_noise<'g>(
    g: &'g Graph,
    f: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    initial_states: &Tensor,
    gamma: f64,
    noise: &Tensor,
) -> Result<Var<'g>> {
    check_gamma(gamma)?;
    if initial_states.rows() == 0 || initial_states.numel() == 0 {
        return Err(Error::Empty("initial-state batch is empty".into()));
    }
    let s0 = g.constant(initial_states.clone());
    let a0 = pi.sample_with_noise(s0, noise).action;
    let per_sample = f.forward(s0, a0);
    finite_or_abort("J_pi", per_sample)?;
    Ok(per_sample.mean().scale(1.0 - gamma))
}

pub fn loss_initial<'g, R: Rng + ?Sized>(
    g: &'g Graph,
    f: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    initial_states: &Tensor,
    gamma: f64,
    rng: &mut R,
) -> Result<Var<'g>> {
    let d = pi.log_std.value().cols();
    let noise = normal_noise(initial_states.rows(), d, rng);
    loss_initial_with_noise(g, f, pi, initial_states, gamma, &noise)
}

/// `J_GP` at the given `(s, a)` pairs, differentiable w.r.t. the critic.
pub fn gradient_penalty<'g>(g: &'g Graph, f: &BoundCritic<'g>, states: &Tensor, actions: &Tensor) -> Result<Var<'g>> {
    if states.rows() == 0 {
        return Err(Error::Empty("gradient-penalty batch is empty".into()));
    }
    let x = g.constant(states.clone()).concat_cols(g.constant(actions.clone()));
    let grad = g.input_gradient(x, |x| f.forward_joint(x))?;
    let norm = grad.square().sum_cols().add_scalar(GP_NORM_EPS).sqrt();
    let per_sample = norm.add_scalar(-1.0).square();
    finite_or_abort("J_GP", per_sample)?;
    Ok(per_sample.mean())
}

/// Values measured during one update, before the parameters moved.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub j_e: f64,
    pub j_pi: f64,
    pub j_gp: f64,
    /// `mean log pi(a' | s')` over the expert next states.
    pub mean_log_prob: f64,
    pub critic_grad_norm: f64,
    pub policy_grad_norm: f64,
}

impl StepReport {
    pub fn policy_entropy(&self) -> f64 {
        -self.mean_log_prob
    }
}

fn grad_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(|t| t.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
}

/// One critic ascent followed by one policy descent on a given batch.
pub fn train_step_on(state: &mut TrainState, batch: &StepBatch, cfg: &SoftDiceConfig) -> Result<StepReport> {
    let step = state.step + 1;
    let diverged = |e: Error| match e {
        Error::Diverged { detail, .. } => Error::Diverged { step, detail },
        Error::Numerical(detail) | Error::Engine(crate::diffcore::EngineError::NonFinite { op: detail, .. }) => {
            Error::Diverged { step, detail }
        }
        other => other,
    };

    // critic: ascend J_E - J_pi - lambda J_GP
    let (j_e, j_pi, j_gp, mean_log_prob, critic_grad_norm) = {
        let g = Graph::new();
        let f = state.critic.bind(&g);
        let pi = state.policy.bind(&g);
        let expert = loss_expert_with_noise(&g, &f, &pi, &batch.expert, cfg.gamma, cfg.beta, &batch.noise_next)
            .map_err(diverged)?;
        let j_pi = loss_initial_with_noise(&g, &f, &pi, &batch.initial_states, cfg.gamma, &batch.noise_initial)
            .map_err(diverged)?;
        let j_gp = gradient_penalty(&g, &f, &batch.expert.s, &batch.expert.a).map_err(diverged)?;
        let objective = expert.loss - j_pi - j_gp.scale(cfg.gp_lambda);
        let grads = g.gradient(objective.neg(), &f.params()).map_err(|e| diverged(e.into()))?;
        let norm = grad_norm(&grads);
        state.critic_opt.step(state.critic.net.params_mut(), &grads, cfg.lr_critic).map_err(diverged)?;
        let mean_log_prob = expert.log_prob.value().sum() / batch.expert.len() as f64;
        (expert.loss.item(), j_pi.item(), j_gp.item(), mean_log_prob, norm)
    };

    // policy: descend J_E - J_pi against the updated critic
    let policy_grad_norm = {
        let g = Graph::new();
        let f = state.critic.bind(&g);
        let pi = state.policy.bind(&g);
        let expert = loss_expert_with_noise(&g, &f, &pi, &batch.expert, cfg.gamma, cfg.beta, &batch.noise_next)
            .map_err(diverged)?;
        let j_pi = loss_initial_with_noise(&g, &f, &pi, &batch.initial_states, cfg.gamma, &batch.noise_initial)
            .map_err(diverged)?;
        let mut loss = expert.loss - j_pi;
        if cfg.orthogonal_reg > 0.0 {
            loss = loss + orthogonal_penalty(&g, &pi.mean_net.weights()).scale(cfg.orthogonal_reg);
        }
        let grads = g.gradient(loss, &pi.params()).map_err(|e| diverged(e.into()))?;
        let norm = grad_norm(&grads);
        state.policy_opt.step(state.policy.params_mut(), &grads, cfg.lr_policy).map_err(diverged)?;
        norm
    };

    state.step = step;
    let report = StepReport { j_e, j_pi, j_gp, mean_log_prob, critic_grad_norm, policy_grad_norm };
    state.check_finite(&report)?;
    Ok(report)
}

/// Samples a fresh batch from the state's stream and applies one update.
pub fn train_step(
    state: &mut TrainState,
    demo: &DemoBuffer,
    online: Option<&OnlineBuffer>,
    cfg: &SoftDiceConfig,
) -> Result<StepReport> {
    let alpha = cfg.online.as_ref().map_or(0.0, |o| o.alpha);
    let batch = sample_step_batch(demo, online, alpha, cfg.batch_size, &mut state.rng)?;
    train_step_on(state, &batch, cfg)
}

/// Environments a training run may touch. Both default to none.
#[derive(Default)]
pub struct TrainEnvs<'a> {
    /// Used only for evaluation rollouts, which never feed training.
    pub eval: Option<&'a mut dyn RewardEnv>,
    /// Dynamics-only access for the online mode.
    pub online: Option<&'a mut dyn ContinuousEnv>,
}

impl<'a> TrainEnvs<'a> {
    pub fn eval_only(env: &'a mut dyn RewardEnv) -> Self {
        Self { eval: Some(env), online: None }
    }
}

/// Seed of the evaluation rollouts for a run seeded with `seed`.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_0E7A_1000_0000
}

/// Whether step `step` of `iterations` is an evaluation point.
pub(crate) fn is_eval_step(step: u64, iterations: u64, interval: u64) -> bool {
    interval > 0 && (step.is_multiple_of(interval) || step == iterations)
}

pub(crate) fn run_eval(
    env: Option<&mut (dyn RewardEnv + '_)>,
    policy: &TanhGaussianPolicy,
    episodes: usize,
    seed: u64,
) -> Result<Option<EvalStats>> {
    match env {
        Some(env) => Ok(Some(evaluate_policy(env, policy, episodes, eval_seed(seed), true)?)),
        None => Ok(None),
    }
}

/// Rolls out one stochastic episode of `policy` into `buffer`.
pub(crate) fn collect_episode(
    env: &mut dyn ContinuousEnv,
    policy: &TanhGaussianPolicy,
    buffer: &mut OnlineBuffer,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut s = env.reset(rng);
    loop {
        let a = policy.act(&s, rng, false)?;
        let step = env.step(&a)?;
        buffer.push(Transition { s, a, s_next: step.next_state.clone(), e: step.done });
        s = step.next_state;
        if step.done {
            return Ok(());
        }
    }
}

/// Runs `cfg.iterations` updates, streaming one metrics row per step.
///
/// Evaluation (deterministic `tanh(mu)` actions, a stream separate from
/// training) happens every `eval_interval` steps and after the final step,
/// when an evaluation env is supplied.
pub fn train(
    cfg: &SoftDiceConfig,
    demo: &DemoBuffer,
    envs: TrainEnvs<'_>,
    sink: &mut dyn MetricsSink,
) -> Result<TrainState> {
    cfg.validate()?;
    if demo.is_empty() {
        return Err(Error::Empty("demo buffer is empty".into()));
    }
    let TrainEnvs { mut eval, mut online } = envs;
    let mut state = TrainState::new(demo.state_dim(), demo.action_dim(), &cfg.policy_net, &cfg.critic_net, cfg.seed)?;
    let mut online_buffer = match &cfg.online {
        Some(o) => {
            if online.is_none() {
                return Err(Error::InvalidConfig("online mode needs an environment".into()));
            }
            Some(OnlineBuffer::new(o.capacity)?)
        }
        None => None,
    };
    let mut rollout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rollout_rng.set_stream(1);

    for _ in 0..cfg.iterations {
        if let (Some(o), Some(buf), Some(env)) = (&cfg.online, online_buffer.as_mut(), online.as_deref_mut()) {
            if state.step % o.rollout_every == 0 {
                collect_episode(env, &state.policy, buf, &mut rollout_rng)?;
            }
        }
        let report = train_step(&mut state, demo, online_buffer.as_ref(), cfg)?;
        let mut row = StepMetrics {
            step: state.step,
            j_e: Some(report.j_e),
            j_pi: Some(report.j_pi),
            j_gp: Some(report.j_gp),
            policy_entropy: Some(report.policy_entropy()),
            ..Default::default()
        };
        if is_eval_step(state.step, cfg.iterations, cfg.eval_interval) {
            if let Some(stats) = run_eval(eval.as_deref_mut(), &state.policy, cfg.eval_episodes, cfg.seed)? {
                row.eval_return_mean = Some(stats.mean);
                row.eval_return_std = Some(stats.std);
            }
        }
        sink.record(&row)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Trajectory;
    use crate::nets::{Linear, Mlp};

    fn constant_critic(c: f64, input: usize) -> CriticF {
        let layer = Linear { weight: Tensor::zeros(&[input, 1]), bias: Tensor::filled(&[1, 1], c) };
        CriticF { net: Mlp::from_layers(vec![layer]).unwrap() }
    }

    fn linear_critic(w: &[f64], scale: f64) -> CriticF {
        let layer = Linear {
            weight: Tensor::matrix(w.len(), 1, w.iter().map(|v| v * scale).collect()).unwrap(),
            bias: Tensor::zeros(&[1, 1]),
        };
        CriticF { net: Mlp::from_layers(vec![layer]).unwrap() }
    }

    fn small_policy(seed: u64) -> TanhGaussianPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TanhGaussianPolicy::new(2, 1, &MlpConfig::with_hidden(4, 1), &mut rng).unwrap()
    }

    fn batch(e: f64) -> Batch {
        Batch {
            s: Tensor::matrix(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).unwrap(),
            a: Tensor::matrix(3, 1, vec![0.1, -0.2, 0.3]).unwrap(),
            s_next: Tensor::matrix(3, 2, vec![0.2, 0.1, 0.0, 0.4, 0.7, -0.5]).unwrap(),
            e: Tensor::filled(&[3, 1], e),
        }
    }

    fn j_e(critic: &CriticF, gamma: f64, beta: f64, e: f64) -> f64 {
        let g = Graph::new();
        let (f, pi) = (critic.bind(&g), small_policy(0).bind(&g));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        loss_expert(&g, &f, &pi, &batch(e), gamma, beta, &mut rng).unwrap().item()
    }

    #[test]
    fn expert_loss_constants() {
        assert_eq!(j_e(&constant_critic(0.0, 3), 0.99, 0.0, 0.0), 0.0);
        assert!((j_e(&constant_critic(1.0, 3), 0.9, 0.0, 0.0) - 0.1).abs() < 1e-15);
        assert_eq!(j_e(&constant_critic(1.0, 3), 0.9, 0.0, 1.0), 1.0);
    }

    #[test]
    fn initial_loss_constant_and_gamma_contract() {
        let g = Graph::new();
        let critic = constant_critic(3.0, 3);
        let (f, pi) = (critic.bind(&g), small_policy(0).bind(&g));
        let s0 = batch(0.0).s;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = loss_initial(&g, &f, &pi, &s0, 0.9, &mut rng).unwrap().item();
        assert!((v - 0.3).abs() < 1e-15);
        assert!(matches!(loss_initial(&g, &f, &pi, &s0, 1.0, &mut rng), Err(Error::Precondition(_))));
    }

    #[test]
    fn penalty_examples() {
        let w = [0.6, 0.0, 0.8];
        let gp = |critic: &CriticF| {
            let g = Graph::new();
            let b = batch(0.0);
            gradient_penalty(&g, &critic.bind(&g), &b.s, &b.a).unwrap().item()
        };
        assert!(gp(&linear_critic(&w, 1.0)) < 1e-20);
        assert!((gp(&linear_critic(&w, 2.0)) - 1.0).abs() < 1e-12);
        assert!((gp(&constant_critic(5.0, 3)) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(SoftDiceConfig::default().validate().is_ok());
        assert!(SoftDiceConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(SoftDiceConfig { beta: -0.1, ..Default::default() }.validate().is_err());
        assert!(SoftDiceConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_iterations_returns_initial_policy() {
        let traj = Trajectory {
            id: 0,
            transitions: vec![Transition { s: vec![0.0, 1.0], a: vec![0.5], s_next: vec![0.1, 1.0], e: true }],
            truncated: false,
        };
        let demo = DemoBuffer::from_trajectories(&[traj]).unwrap();
        let cfg = SoftDiceConfig {
            iterations: 0,
            policy_net: MlpConfig::with_hidden(4, 1),
            critic_net: MlpConfig::with_hidden(4, 1),
            ..Default::default()
        };
        let mut log = Vec::new();
        let state = train(&cfg, &demo, TrainEnvs::default(), &mut log).unwrap();
        assert!(log.is_empty());
        let fresh = TrainState::new(2, 1, &cfg.policy_net, &cfg.critic_net, cfg.seed).unwrap();
        assert_eq!(state.policy, fresh.policy);
    }
}
