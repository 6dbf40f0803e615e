use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, Var};
use crate::nets::{AdamState, BoundPolicy, MlpConfig, TanhGaussianPolicy};
use crate::replay::{Batch, DemoBuffer};
use crate::softdice::{
    check_common, init_networks, is_eval_step, normal_noise, run_eval, MetricsSink, StepMetrics, TrainEnvs,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub lr_policy: f64,
    pub batch_size: usize,
    pub iterations: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub policy_net: MlpConfig,
    /// Only consumed to reproduce the shared initialization stream.
    pub critic_net: MlpConfig,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            lr_policy: 1e-5,
            batch_size: 256,
            iterations: 20_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            seed: 0,
            policy_net: MlpConfig::default(),
            critic_net: MlpConfig::default(),
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(0.0, self.lr_policy, self.batch_size, self.eval_interval, self.eval_episodes)
    }
}

/// `-mean log pi(a_E | s_E)`.
pub fn bc_loss<'g>(g: &'g Graph, pi: &BoundPolicy<'g>, batch: &Batch) -> Result<Var<'g>> {
    if batch.is_empty() {
        return Err(Error::Empty("expert batch is empty".into()));
    }
    let log_prob = pi.log_prob(g.constant(batch.s.clone()), &batch.a)?;
    Ok(log_prob.mean().neg())
}

#[derive(Debug, Clone)]
pub struct BcState {
    pub policy: TanhGaussianPolicy,
    pub opt: AdamState,
    pub step: u64,
    pub rng: rand_chacha::ChaCha8Rng,
}

impl BcState {
    pub fn new(state_dim: usize, action_dim: usize, cfg: &BcConfig) -> Result<Self> {
        let (policy, _critic, rng) = init_networks(state_dim, action_dim, &cfg.policy_net, &cfg.critic_net, cfg.seed)?;
        let opt = AdamState::new(&policy.params());
        Ok(Self { policy, opt, step: 0, rng })
    }
}

/// Returns the loss and a sampled entropy estimate at the batch states.
pub fn bc_train_step(state: &mut BcState, demo: &DemoBuffer, cfg: &BcConfig) -> Result<(f64, f64)> {
    let batch = demo.sample_transitions(cfg.batch_size, &mut state.rng)?;
    let noise = normal_noise(batch.len(), demo.action_dim(), &mut state.rng);
    let step = state.step + 1;
    let g = Graph::new();
    let pi = state.policy.bind(&g);
    let loss = bc_loss(&g, &pi, &batch)?;
    let entropy = -pi.sample_with_noise(g.constant(batch.s.clone()), &noise).log_prob.value().sum() / batch.len() as f64;
    let grads = g.gradient(loss, &pi.params()).map_err(|e| Error::Diverged { step, detail: e.to_string() })?;
    let value = loss.item();
    state.opt.step(state.policy.params_mut(), &grads, cfg.lr_policy).map_err(|e| match e {
        Error::Diverged { detail, .. } => Error::Diverged { step, detail },
        other => other,
    })?;
    state.step = step;
    if let Some((name, _)) = state.policy.named_params().into_iter().find(|(_, t)| !t.is_finite()) {
        return Err(Error::Diverged { step, detail: format!("parameter {name} is non-finite; last loss {value}") });
    }
    Ok((value, entropy))
}

/// Behavioral cloning with the same logging and evaluation as SoftDICE.
///
/// The loss goes in the `j_e` column; `j_pi` and `j_gp` stay empty.
pub fn bc_train(cfg: &BcConfig, demo: &DemoBuffer, envs: TrainEnvs<'_>, sink: &mut dyn MetricsSink) -> Result<BcState> {
    cfg.validate()?;
    if demo.is_empty() {
        return Err(Error::Empty("demo buffer is empty".into()));
    }
    let mut eval = envs.eval;
    let mut state = BcState::new(demo.state_dim(), demo.action_dim(), cfg)?;
    for _ in 0..cfg.iterations {
        let (loss, entropy) = bc_train_step(&mut state, demo, cfg)?;
        let mut row =
            StepMetrics { step: state.step, j_e: Some(loss), policy_entropy: Some(entropy), ..Default::default() };
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
