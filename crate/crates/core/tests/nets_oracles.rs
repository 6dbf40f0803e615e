//! Policy density checks by quadrature and finite differences.

mod common;

use common::{central_diff, max_rel_err};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softdice::diffcore::{Graph, Tensor};
use softdice::nets::{Linear, Mlp, MlpConfig, TanhGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};

fn fixed_1d_policy(mu: f64, log_std: f64) -> TanhGaussianPolicy {
    TanhGaussianPolicy {
        mean_net: Mlp::from_layers(vec![Linear {
            weight: Tensor::zeros(&[1, 1]),
            bias: Tensor::filled(&[1, 1], mu),
        }])
        .unwrap(),
        log_std: Tensor::filled(&[1, 1], log_std),
        log_std_bounds: (LOG_STD_MIN, LOG_STD_MAX),
    }
}

/// Composite Simpson over `(-1, 1)` of `h(log p(a))`.
fn simpson(policy: &TanhGaussianPolicy, h: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let (lo, hi) = (-1.0 + 1e-12, 1.0 - 1e-12);
    let step = (hi - lo) / intervals as f64;
    let actions: Vec<f64> = (0..=intervals).map(|i| lo + i as f64 * step).collect();
    let states = Tensor::zeros(&[actions.len(), 1]);
    let lp = policy
        .log_prob_values(&states, &Tensor::matrix(actions.len(), 1, actions.clone()).unwrap())
        .unwrap();
    let mut total = 0.0;
    for (i, l) in lp.iter().enumerate() {
        let w = if i == 0 || i == intervals { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * h(*l);
    }
    total * step / 3.0
}

#[test]
fn squashed_density_integrates_to_one() {
    for &(mu, ls) in &[(0.0, 0.0), (0.3, -0.7), (-1.2, -1.5), (0.5, 0.5)] {
        let p = fixed_1d_policy(mu, ls);
        let mass = simpson(&p, f64::exp, 400_000);
        assert!((mass - 1.0).abs() < 1e-3, "mu={mu} log_std={ls}: mass {mass}");
    }
}

#[test]
fn entropy_estimate_matches_quadrature() {
    let p = fixed_1d_policy(0.3, -0.7);
    let exact = simpson(&p, |l| -l * l.exp(), 400_000);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 10_000;
    let g = Graph::new();
    let sample = p.bind(&g).sample(g.constant(Tensor::zeros(&[n, 1])), &mut rng);
    let neg_lp: Vec<f64> = sample.log_prob.value().data().iter().map(|v| -v).collect();
    let mean = neg_lp.iter().sum::<f64>() / n as f64;
    let var = neg_lp.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "MC {mean} vs quadrature {exact} (se {se})");

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let est = p.entropy_estimate(&Tensor::zeros(&[1, 1]), n, &mut rng).unwrap();
    assert!((est - mean).abs() < 1e-12);
}

#[test]
fn reparametrized_sample_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policy = TanhGaussianPolicy::new(3, 2, &MlpConfig::with_hidden(6, 2), &mut rng).unwrap();
    policy.log_std = Tensor::matrix(1, 2, vec![-0.4, 0.2]).unwrap();
    let states = Tensor::matrix(4, 3, (0..12).map(|i| ((i * 7) as f64 * 0.31).cos()).collect()).unwrap();
    let eps = Tensor::matrix(4, 2, vec![0.3, -1.1, 0.8, 0.05, -0.6, 1.7, 0.0, -0.2]).unwrap();
    let weights = Tensor::matrix(4, 2, vec![1.0, -0.5, 0.25, 2.0, -1.0, 0.7, 0.3, 0.9]).unwrap();

    let objective = |params: &[Tensor]| {
        let mut p = policy.clone();
        for (t, v) in p.params_mut().into_iter().zip(params) {
            *t = v.clone();
        }
        let g = Graph::new();
        let s = p.bind(&g).sample_with_noise(g.constant(states.clone()), &eps);
        let obj = (s.action * g.constant(weights.clone())).sum() + s.log_prob.sum().scale(0.1);
        obj.item()
    };

    let g = Graph::new();
    let bp = policy.bind(&g);
    let s = bp.sample_with_noise(g.constant(states.clone()), &eps);
    let obj = (s.action * g.constant(weights.clone())).sum() + s.log_prob.sum().scale(0.1);
    let auto = g.gradient(obj, &bp.params()).unwrap();
    let params: Vec<Tensor> = policy.params().into_iter().cloned().collect();
    let fd = central_diff(objective, &params, 1e-5);
    let err = max_rel_err(&auto, &fd, 1e-3);
    assert!(err < 1e-3, "relative error {err}");
}
