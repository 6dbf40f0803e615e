use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, Tensor, Var};
use crate::nets::{BoundCritic, BoundPolicy, MlpConfig};
use crate::replay::{mix_sample, Batch, DemoBuffer, OnlineBuffer};
use crate::softdice::{
    check_common, check_gamma, collect_episode, is_eval_step, normal_noise, run_eval, MetricsSink, StepMetrics,
    TrainEnvs, TrainState,
};
use crate::{Error, Result};

/// Upper clamp on the exponent inside `log mean exp`.
pub const EXP_CLAMP: f64 = 10.0;

const MAX_MIX_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueDiceConfig {
    pub gamma: f64,
    /// Replay-buffer mixing weight; 0 is fully offline.
    pub alpha: f64,
    pub lr_critic: f64,
    pub lr_policy: f64,
    pub batch_size: usize,
    pub iterations: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub policy_net: MlpConfig,
    pub critic_net: MlpConfig,
    /// With `alpha > 0`, roll out one episode after this many updates.
    pub rollout_every: u64,
    pub buffer_capacity: usize,
}

impl Default for ValueDiceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.0,
            lr_critic: 1e-3,
            lr_policy: 1e-5,
            batch_size: 256,
            iterations: 20_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            seed: 0,
            policy_net: MlpConfig::default(),
            critic_net: MlpConfig::default(),
            rollout_every: 5,
            buffer_capacity: 1_000_000,
        }
    }
}

impl ValueDiceConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if self.rollout_every == 0 || self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig("rollout_every and buffer_capacity must be positive".into()));
        }
        check_common(self.lr_critic, self.lr_policy, self.batch_size, self.eval_interval, self.eval_episodes)
    }
}

/// Policy noise for one ValueDICE update.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDiceNoise {
    pub expert_next: Option<Tensor>,
    pub online_next: Option<Tensor>,
    pub initial: Tensor,
}

impl ValueDiceNoise {
    pub fn sample<R: Rng + ?Sized>(batch: &ValueDiceBatch<'_>, action_dim: usize, rng: &mut R) -> Self {
        Self {
            expert_next: batch.expert.map(|b| normal_noise(b.len(), action_dim, rng)),
            online_next: batch.online.map(|b| normal_noise(b.len(), action_dim, rng)),
            initial: normal_noise(batch.initial.rows(), action_dim, rng),
        }
    }
}

/// `nu(s, a) - gamma (1 - e) nu(s', a')` per row, `[B, 1]`.
fn bellman_residual<'g>(
    g: &'g Graph,
    nu: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    batch: &Batch,
    gamma: f64,
    noise: &Tensor,
) -> Var<'g> {
    let s = g.constant(batch.s.clone());
    let a = g.constant(batch.a.clone());
    let s_next = g.constant(batch.s_next.clone());
    let mask = g.constant(batch.e.map(|e| gamma * (1.0 - e)));
    let a_next = pi.sample_with_noise(s_next, noise).action;
    nu.forward(s, a) - mask * nu.forward(s_next, a_next)
}

/// `log mean exp` over the rows of all `parts` pooled together, shifted by the
/// (constant) maximum.
fn pooled_log_mean_exp<'g>(parts: &[Var<'g>]) -> Var<'g> {
    let g = parts[0].graph();
    let mut n = 0;
    let mut m = f64::NEG_INFINITY;
    for p in parts {
        let v = p.value();
        n += v.rows();
        m = v.data().iter().cloned().fold(m, f64::max);
    }
    let mut total = g.scalar(0.0);
    for &p in parts {
        let rows = p.value().rows();
        total = total + (p - g.scalar(m).broadcast_scalar(&[rows, 1])).exp().sum();
    }
    total.scale(1.0 / n as f64).log().add_scalar(m)
}

/// The two parts of the ValueDICE loss, kept apart for logging.
pub struct ValueDiceTerms<'g> {
    pub loss: Var<'g>,
    /// `-log mean_mix exp(...)`
    pub log_term: Var<'g>,
    /// `(1 - alpha)(1 - gamma) mean nu(s0, a0) + alpha mean_RB[...]`
    pub linear_term: Var<'g>,
}

/// Rows of one update: expert rows, online rows, or both.
pub struct ValueDiceBatch<'a> {
    pub expert: Option<&'a Batch>,
    pub online: Option<&'a Batch>,
    pub initial: &'a Tensor,
}

/// The loss with explicit noise. `mean_mix` pools the expert and online rows,
/// which is the mixture expectation when the rows come from [`mix_sample`].
pub fn valuedice_terms<'g>(
    g: &'g Graph,
    nu: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    batch: &ValueDiceBatch<'_>,
    alpha: f64,
    gamma: f64,
    noise: &ValueDiceNoise,
) -> Result<ValueDiceTerms<'g>> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside [0, 1]")));
    }
    let expert = batch.expert.filter(|b| !b.is_empty());
    let online = if alpha > 0.0 { batch.online.filter(|b| !b.is_empty()) } else { None };
    if alpha > 0.0 && online.is_none() {
        return Err(Error::Empty(format!("alpha = {alpha} needs a non-empty online batch")));
    }
    if batch.initial.rows() == 0 {
        return Err(Error::Empty("initial-state batch is empty".into()));
    }
    let mut parts = Vec::new();
    if let Some(b) = expert {
        let eps = noise.expert_next.as_ref().ok_or_else(|| Error::Shape("expert rows without noise".into()))?;
        parts.push(bellman_residual(g, nu, pi, b, gamma, eps));
    }
    let mut rb_term = None;
    if let Some(b) = online {
        let eps = noise.online_next.as_ref().ok_or_else(|| Error::Shape("online rows without noise".into()))?;
        let rb = bellman_residual(g, nu, pi, b, gamma, eps);
        parts.push(rb);
        if alpha > 0.0 {
            rb_term = Some(rb.mean().scale(alpha));
        }
    }
    if parts.is_empty() {
        return Err(Error::Empty("no expert or online rows".into()));
    }
    let clamped: Vec<Var<'g>> = parts.iter().map(|p| p.clamp(f64::NEG_INFINITY, EXP_CLAMP)).collect();
    let log_term = pooled_log_mean_exp(&clamped).neg();
    let s0 = g.constant(batch.initial.clone());
    let a0 = pi.sample_with_noise(s0, &noise.initial).action;
    let mut linear_term = nu.forward(s0, a0).mean().scale((1.0 - alpha) * (1.0 - gamma));
    if let Some(t) = rb_term {
        linear_term = linear_term + t;
    }
    let loss = log_term + linear_term;
    if !loss.value().is_finite() {
        return Err(Error::Numerical("ValueDICE loss is non-finite".into()));
    }
    Ok(ValueDiceTerms { loss, log_term, linear_term })
}

/// `-log mean_mix exp(nu - gamma (1 - e) nu') + (1 - alpha)(1 - gamma) mean nu(s0, a0)
///  + alpha mean_RB[nu - gamma (1 - e) nu']`, exponent clamped at [`EXP_CLAMP`].
#[allow(clippy::too_many_arguments)]
pub fn valuedice_loss<'g, R: Rng + ?Sized>(
    g: &'g Graph,
    nu: &BoundCritic<'g>,
    pi: &BoundPolicy<'g>,
    expert: &Batch,
    initial: &Tensor,
    online: Option<&Batch>,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<Var<'g>> {
    let batch = ValueDiceBatch { expert: Some(expert), online, initial };
    let noise = ValueDiceNoise::sample(&batch, expert.a.cols(), rng);
    Ok(valuedice_terms(g, nu, pi, &batch, alpha, gamma, &noise)?.loss)
}

/// Splits a tagged mixture batch into its expert and online rows.
fn split_mixed(batch: &Batch, from_online: &[bool]) -> Result<(Option<Batch>, Option<Batch>)> {
    let pick = |want: bool| -> Result<Option<Batch>> {
        let rows: Vec<usize> = (0..batch.len()).filter(|&i| from_online[i] == want).collect();
        if rows.is_empty() {
            return Ok(None);
        }
        let take = |t: &Tensor| Tensor::from_rows(&rows.iter().map(|&i| t.row(i)).collect::<Vec<_>>());
        Ok(Some(Batch { s: take(&batch.s)?, a: take(&batch.a)?, s_next: take(&batch.s_next)?, e: take(&batch.e)? }))
    };
    Ok((pick(false)?, pick(true)?))
}

/// Losses measured before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDiceReport {
    pub loss: f64,
    pub log_term: f64,
    pub linear_term: f64,
}

/// One ascent step on `nu`, then one descent step on `pi` with the updated `nu`.
pub fn valuedice_train_step(
    state: &mut TrainState,
    demo: &DemoBuffer,
    online: Option<&OnlineBuffer>,
    cfg: &ValueDiceConfig,
) -> Result<ValueDiceReport> {
    let step = state.step + 1;
    let rng = &mut state.rng;
    let (expert, online_batch) = if cfg.alpha > 0.0 {
        // the alpha * mean_RB term needs at least one online row; redraw the rare batches without one
        let mut tries = 0;
        loop {
            let m = mix_sample(demo, online, cfg.alpha, cfg.batch_size, rng)?;
            let split = split_mixed(&m.batch, &m.from_online)?;
            tries += 1;
            if split.1.is_some() {
                break split;
            }
            if tries == MAX_MIX_DRAWS {
                return Err(Error::Empty(format!("no online rows in {MAX_MIX_DRAWS} mixed batches")));
            }
        }
    } else {
        (Some(demo.sample_transitions(cfg.batch_size, rng)?), None)
    };
    let initial = demo.sample_initial_states(cfg.batch_size, rng)?;
    let batch = ValueDiceBatch { expert: expert.as_ref(), online: online_batch.as_ref(), initial: &initial };
    let noise = ValueDiceNoise::sample(&batch, demo.action_dim(), rng);
    let diverged = |e: Error| match e {
        Error::Diverged { detail, .. } | Error::Numerical(detail) => Error::Diverged { step, detail },
        other => other,
    };

    let report = {
        let g = Graph::new();
        let (nu, pi) = (state.critic.bind(&g), state.policy.bind(&g));
        let t = valuedice_terms(&g, &nu, &pi, &batch, cfg.alpha, cfg.gamma, &noise).map_err(diverged)?;
        let grads = g.gradient(t.loss.neg(), &nu.params()).map_err(|e| diverged(e.into()))?;
        state.critic_opt.step(state.critic.net.params_mut(), &grads, cfg.lr_critic).map_err(diverged)?;
        ValueDiceReport { loss: t.loss.item(), log_term: t.log_term.item(), linear_term: t.linear_term.item() }
    };
    {
        let g = Graph::new();
        let (nu, pi) = (state.critic.bind(&g), state.policy.bind(&g));
        let t = valuedice_terms(&g, &nu, &pi, &batch, cfg.alpha, cfg.gamma, &noise).map_err(diverged)?;
        let grads = g.gradient(t.loss, &pi.params()).map_err(|e| diverged(e.into()))?;
        state.policy_opt.step(state.policy.params_mut(), &grads, cfg.lr_policy).map_err(diverged)?;
    }
    state.step = step;
    let bad = state
        .policy
        .named_params()
        .into_iter()
        .chain(state.critic.net.named_params("critic"))
        .find(|(_, t)| !t.is_finite());
    if let Some((name, _)) = bad {
        return Err(Error::Diverged { step, detail: format!("parameter {name} is non-finite; last metrics {report:?}") });
    }
    Ok(report)
}

/// Offline (or, with `alpha > 0`, replay-regularized) ValueDICE.
///
/// `-log mean exp` goes in the `j_e` column and the linear part in `j_pi`.
pub fn valuedice_train(
    cfg: &ValueDiceConfig,
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
    let mut buffer = if cfg.alpha > 0.0 {
        if online.is_none() {
            return Err(Error::InvalidConfig("alpha > 0 needs an online environment".into()));
        }
        Some(OnlineBuffer::new(cfg.buffer_capacity)?)
    } else {
        None
    };
    let mut rollout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rollout_rng.set_stream(1);
    for _ in 0..cfg.iterations {
        if let (Some(buf), Some(env)) = (buffer.as_mut(), online.as_deref_mut()) {
            if state.step % cfg.rollout_every == 0 {
                collect_episode(env, &state.policy, buf, &mut rollout_rng)?;
            }
        }
        let report = valuedice_train_step(&mut state, demo, buffer.as_ref(), cfg)?;
        let mut row = StepMetrics {
            step: state.step,
            j_e: Some(report.log_term),
            j_pi: Some(report.linear_term),
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
