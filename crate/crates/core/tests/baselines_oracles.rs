mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softdice::baselines::*;
use softdice::diffcore::{Graph, Tensor};
use softdice::envs::{generate_demos, PointMass2D, PointMassExpert, Transition};
use softdice::nets::{CriticF, Linear, Mlp, MlpConfig};
use softdice::replay::{Batch, DemoBuffer, OnlineBuffer};
use softdice::softdice::{train, NullSink, SoftDiceConfig, TrainEnvs, TrainState};

fn col(v: &[f64]) -> Tensor {
    Tensor::matrix(v.len(), 1, v.to_vec()).unwrap()
}

fn batch(e: f64) -> Batch {
    Batch { s: col(&[0.3, -0.7, 1.1, 0.05]), a: col(&[0.2, -0.5, 0.6, 0.0]), s_next: col(&[0.4, -0.4, 0.9, -0.2]), e: Tensor::filled(&[4, 1], e) }
}

fn constant_nu(c: f64) -> CriticF {
    let l = Linear { weight: Tensor::zeros(&[2, 1]), bias: Tensor::filled(&[1, 1], c) };
    CriticF { net: Mlp::from_layers(vec![l]).unwrap() }
}

fn loss_with(nu: &CriticF, expert: &Batch, online: Option<&Batch>, alpha: f64, gamma: f64) -> f64 {
    let g = Graph::new();
    let pi = tiny_policy(&POLICY0);
    let s0 = col(&[0.3, 1.1, -0.7]);
    let v = valuedice_loss(&g, &nu.bind(&g), &pi.bind(&g), expert, &s0, online, alpha, gamma, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let out = v.item();
    out
}

#[test]
fn constant_nu_gives_zero_loss() {
    assert_eq!(loss_with(&constant_nu(0.0), &batch(0.0), None, 0.0, 0.9), 0.0);
    let online = Batch { s: col(&[0.5, 0.6]), a: col(&[0.1, 0.1]), s_next: col(&[0.4, 0.2]), e: Tensor::zeros(&[2, 1]) };
    for alpha in [0.0, 0.3, 1.0] {
        for c in [-2.0, 0.7, 5.0] {
            let l = loss_with(&constant_nu(c), &batch(0.0), Some(&online), alpha, 0.9);
            assert!(l.abs() < 1e-12, "alpha {alpha} c {c}: {l}");
        }
    }
}

#[test]
fn forward_matches_straight_line_evaluation() {
    let (gamma, alpha) = (0.9, 0.25);
    let expert = batch(0.0);
    let mut online = batch(1.0);
    online.s = col(&[0.8, -0.1, 0.2, 0.6]);
    let s0 = col(&[0.3, 1.1, -0.7]);
    let noise = ValueDiceNoise {
        expert_next: Some(col(&[0.5, -1.2, 0.3, 2.0])),
        online_next: Some(col(&[0.1, 0.2, -0.3, 0.4])),
        initial: col(&[-0.4, 0.9, 0.1]),
    };
    let g = Graph::new();
    let (nu, pi) = (tiny_critic(&CRITIC0), tiny_policy(&POLICY0));
    let vb = ValueDiceBatch { expert: Some(&expert), online: Some(&online), initial: &s0 };
    let got = valuedice_terms(&g, &nu.bind(&g), &pi.bind(&g), &vb, alpha, gamma, &noise).unwrap().loss.item();

    let residuals = |b: &Batch, eps: &Tensor| -> Vec<f64> {
        (0..b.len())
            .map(|i| {
                let (a2, _) = sample_hand(&POLICY0, b.s_next.get(i, 0), eps.get(i, 0));
                f_hand(&CRITIC0, b.s.get(i, 0), b.a.get(i, 0)).0
                    - gamma * (1.0 - b.e.get(i, 0)) * f_hand(&CRITIC0, b.s_next.get(i, 0), a2).0
            })
            .collect()
    };
    let re = residuals(&expert, noise.expert_next.as_ref().unwrap());
    let ro = residuals(&online, noise.online_next.as_ref().unwrap());
    let pooled: Vec<f64> = re.iter().chain(&ro).map(|r| r.min(10.0)).collect();
    let log_term = -(pooled.iter().map(|r| r.exp()).sum::<f64>() / pooled.len() as f64).ln();
    let init: f64 = (0..3).map(|i| f_hand(&CRITIC0, s0.get(i, 0), sample_hand(&POLICY0, s0.get(i, 0), noise.initial.get(i, 0)).0).0).sum::<f64>() / 3.0;
    let want = log_term + (1.0 - alpha) * (1.0 - gamma) * init + alpha * ro.iter().sum::<f64>() / 4.0;
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn exponent_is_clamped() {
    // nu = 50 everywhere with every e = 1: the residual is 50, clamped to 10
    let l = loss_with(&constant_nu(50.0), &batch(1.0), None, 0.0, 0.9);
    assert!((l - (-10.0 + 0.1 * 50.0)).abs() < 1e-9);
}

#[test]
fn size_one_batches_bias_the_log_mean_exp_gradient() {
    let expert = batch(0.0);
    let s0 = col(&[0.0]);
    let nu = tiny_critic(&CRITIC0);
    let pi = tiny_policy(&POLICY0);
    let grad_of = |rows: &[usize]| -> Vec<f64> {
        let take = |t: &Tensor| col(&rows.iter().map(|&i| t.get(i, 0)).collect::<Vec<_>>());
        let b = Batch { s: take(&expert.s), a: take(&expert.a), s_next: take(&expert.s_next), e: take(&expert.e) };
        let noise = ValueDiceNoise { expert_next: Some(Tensor::zeros(&[rows.len(), 1])), online_next: None, initial: Tensor::zeros(&[1, 1]) };
        let g = Graph::new();
        let bound = nu.bind(&g);
        let vb = ValueDiceBatch { expert: Some(&b), online: None, initial: &s0 };
        let t = valuedice_terms(&g, &bound, &pi.bind(&g), &vb, 0.0, 0.0, &noise).unwrap();
        let grads = g.gradient(t.log_term, &bound.params()).unwrap();
        grads.iter().flat_map(|t| t.data().to_vec()).collect()
    };
    let full = grad_of(&[0, 1, 2, 3]);
    // every size-one batch is equally likely
    let singles: Vec<Vec<f64>> = (0..4).map(|i| grad_of(&[i])).collect();
    let expected: Vec<f64> = (0..full.len()).map(|k| singles.iter().map(|g| g[k]).sum::<f64>() / 4.0).collect();
    let gap = full.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap > 1e-3, "gap {gap}");

    // with gamma = 0 the full gradient is a softmax-weighted average of per-row gradients
    let values = nu.values(&expert.s, &expert.a).unwrap();
    let z: f64 = values.iter().map(|v| v.exp()).sum();
    let weighted: Vec<f64> = (0..full.len()).map(|k| singles.iter().zip(&values).map(|(g, v)| g[k] * v.exp() / z).sum()).collect();
    for (a, b) in full.iter().zip(&weighted) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn point_mass_demo(n: usize) -> DemoBuffer {
    let mut env = PointMass2D::default();
    DemoBuffer::from_trajectories(&generate_demos(&mut env, &PointMassExpert::default(), n, 0.0, 0).unwrap()).unwrap()
}

fn small_vd(alpha: f64) -> ValueDiceConfig {
    ValueDiceConfig {
        alpha,
        batch_size: 16,
        iterations: 20,
        eval_interval: 0,
        policy_net: MlpConfig::with_hidden(8, 2),
        critic_net: MlpConfig::with_hidden(8, 2),
        ..Default::default()
    }
}

#[test]
fn offline_valuedice_never_reads_the_online_buffer() {
    let demo = point_mass_demo(1);
    let mut online = OnlineBuffer::new(100).unwrap();
    online.push(Transition { s: vec![0.5, 0.5], a: vec![0.1, 0.1], s_next: vec![0.505, 0.505], e: false });
    let cfg = small_vd(0.0);
    let mut state = TrainState::new(2, 2, &cfg.policy_net, &cfg.critic_net, 0).unwrap();
    for _ in 0..10 {
        valuedice_train_step(&mut state, &demo, Some(&online), &cfg).unwrap();
    }
    assert_eq!(online.reads(), 0);
    let cfg = small_vd(0.5);
    valuedice_train_step(&mut state, &demo, Some(&online), &cfg).unwrap();
    assert!(online.reads() > 0);
}

#[test]
fn replay_regularized_run_collects_episodes() {
    let demo = point_mass_demo(1);
    let mut env = PointMass2D::default();
    let envs = TrainEnvs { eval: None, online: Some(&mut env) };
    valuedice_train(&small_vd(0.1), &demo, envs, &mut NullSink).unwrap();
    assert!(valuedice_train(&small_vd(0.1), &demo, TrainEnvs::default(), &mut NullSink).is_err());
}

#[test]
fn zero_learning_rates_are_a_no_op() {
    let demo = point_mass_demo(1);
    let cfg = ValueDiceConfig { lr_critic: 0.0, lr_policy: 0.0, ..small_vd(0.0) };
    let mut state = TrainState::new(2, 2, &cfg.policy_net, &cfg.critic_net, 0).unwrap();
    let (policy, critic) = (state.policy.clone(), state.critic.clone());
    for _ in 0..5 {
        valuedice_train_step(&mut state, &demo, None, &cfg).unwrap();
    }
    assert_eq!(state.policy, policy);
    assert_eq!(state.critic, critic);

    let bc = BcConfig { lr_policy: 0.0, batch_size: 8, iterations: 5, eval_interval: 0, ..Default::default() };
    let trained = bc_train(&bc, &demo, TrainEnvs::default(), &mut NullSink).unwrap();
    assert_eq!(trained.policy, BcState::new(2, 2, &bc).unwrap().policy);
}

#[test]
fn bc_loss_is_mean_negative_log_likelihood() {
    let pi = tiny_policy(&POLICY0);
    let b = batch(0.0);
    let g = Graph::new();
    let loss = bc_loss(&g, &pi.bind(&g), &b).unwrap().item();
    let lp = pi.log_prob_values(&b.s, &b.a).unwrap();
    assert!((loss + lp.iter().sum::<f64>() / 4.0).abs() < 1e-12);

    // a batch of copies has the loss of its single row
    let one = Batch { s: col(&[0.3]), a: col(&[0.2]), s_next: col(&[0.4]), e: col(&[0.0]) };
    let copies = Batch { s: col(&[0.3; 5]), a: col(&[0.2; 5]), s_next: col(&[0.4; 5]), e: col(&[0.0; 5]) };
    let g = Graph::new();
    let bound = pi.bind(&g);
    assert!((bc_loss(&g, &bound, &one).unwrap().item() - bc_loss(&g, &bound, &copies).unwrap().item()).abs() < 1e-12);

    let bad = Batch { a: col(&[1.0, 0.0, 0.0, 0.0]), ..b };
    assert!(bc_loss(&g, &bound, &bad).is_err());
}

#[test]
fn bc_loss_near_the_floor_for_a_perfect_fit() {
    // mean net outputs atanh(0.2) everywhere; sigma at the floor
    let target: f64 = 0.2;
    let l0 = Linear { weight: Tensor::zeros(&[1, 1]), bias: Tensor::filled(&[1, 1], target.atanh()) };
    let mut pi = tiny_policy(&POLICY0);
    pi.mean_net = Mlp::from_layers(vec![l0]).unwrap();
    pi.log_std = Tensor::filled(&[1, 1], -5.0);
    let b = Batch { s: col(&[0.1, 0.5]), a: col(&[target; 2]), s_next: col(&[0.0, 0.0]), e: col(&[0.0, 0.0]) };
    let g = Graph::new();
    let loss = bc_loss(&g, &pi.bind(&g), &b).unwrap().item();
    let floor = HALF_LOG_2PI - 5.0 + (1.0 - target * target + 1e-6).ln();
    assert!((loss - floor).abs() < 1e-12);
}

#[test]
fn all_trainers_start_from_the_same_networks() {
    let demo = point_mass_demo(1);
    let nets = (MlpConfig::with_hidden(8, 2), MlpConfig::with_hidden(6, 1));
    let sd = SoftDiceConfig { iterations: 0, eval_interval: 0, seed: 7, policy_net: nets.0.clone(), critic_net: nets.1.clone(), ..Default::default() };
    let vd = ValueDiceConfig { iterations: 0, eval_interval: 0, seed: 7, policy_net: nets.0.clone(), critic_net: nets.1.clone(), ..Default::default() };
    let bc = BcConfig { iterations: 0, eval_interval: 0, seed: 7, policy_net: nets.0.clone(), critic_net: nets.1.clone(), ..Default::default() };
    let a = train(&sd, &demo, TrainEnvs::default(), &mut NullSink).unwrap();
    let b = valuedice_train(&vd, &demo, TrainEnvs::default(), &mut NullSink).unwrap();
    let c = bc_train(&bc, &demo, TrainEnvs::default(), &mut NullSink).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.critic, b.critic);
    assert_eq!(a.policy, c.policy);
}

#[test]
fn baseline_runs_are_deterministic() {
    let demo = point_mass_demo(2);
    let run_vd = || {
        let mut log = Vec::new();
        valuedice_train(&small_vd(0.0), &demo, TrainEnvs::default(), &mut log).unwrap();
        log
    };
    assert_eq!(run_vd(), run_vd());
    let bc = BcConfig { batch_size: 8, iterations: 20, eval_interval: 10, eval_episodes: 2, policy_net: MlpConfig::with_hidden(8, 2), ..Default::default() };
    let run_bc = || {
        let mut env = PointMass2D::default();
        let mut log = Vec::new();
        bc_train(&bc, &demo, TrainEnvs::eval_only(&mut env), &mut log).unwrap();
        log
    };
    let log = run_bc();
    assert_eq!(log, run_bc());
    assert!(log.iter().all(|m| m.j_e.is_some() && m.j_pi.is_none()));
    assert_eq!(log.iter().filter(|m| m.eval_return_mean.is_some()).count(), 2);
}
