//! Engine gradients against finite differences and straight-line oracles.

mod common;

use common::graphs::{hand_input_gradient, random_tensor, Recipe};
use common::{central_diff, max_rel_err};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softdice::diffcore::{Graph, Tensor, Var};
use softdice::nets::{Mlp, MlpConfig};

#[test]
fn random_graphs_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recipe = Recipe::random(&mut rng);
        let auto = recipe.gradient();
        let fd = central_diff(|p| recipe.value(p), &recipe.params, 1e-5);
        let err = max_rel_err(&auto, &fd, 1e-3);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        worst = worst.max(err);
    }
    eprintln!("worst relative error over 100 graphs: {worst:.3e}");
}

#[test]
fn gradients_are_bitwise_deterministic() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recipe = Recipe::random(&mut rng);
        let a = recipe.gradient();
        let b = recipe.gradient();
        assert_eq!(a, b);
        assert_eq!(recipe.value(&recipe.params).to_bits(), recipe.value(&recipe.params).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = Recipe::random(&mut rng);
        let x = r1.params[0].clone();
        let w = random_tensor(&mut rng, x.shape(), 1.0);
        let g = Graph::new();
        let leaves: Vec<Var> = r1.params.iter().map(|p| g.param(p.clone())).collect();
        let l1 = r1.build(&leaves);
        let l2 = (leaves[0] * g.constant(w)).tanh().sum();
        let combo = l1.scale(a) + l2.scale(b);
        let gc = g.gradient(combo, &[leaves[0]]).unwrap();
        let g1 = g.gradient(l1, &[leaves[0]]).unwrap();
        let g2 = g.gradient(l2, &[leaves[0]]).unwrap();
        for k in 0..x.numel() {
            let lin = a * g1[0].data()[k] + b * g2[0].data()[k];
            prop_assert!((gc[0].data()[k] - lin).abs() < 1e-12, "{} vs {}", gc[0].data()[k], lin);
        }
    }
}

/// Straight-line forward pass with explicit loops.
fn hand_forward(mlp: &Mlp, x: &Tensor) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i).to_vec()).collect();
    let last = mlp.layers().len() - 1;
    for (li, layer) in mlp.layers().iter().enumerate() {
        let (fan_in, fan_out) = (layer.weight.rows(), layer.weight.cols());
        rows = rows
            .iter()
            .map(|r| {
                (0..fan_out)
                    .map(|j| {
                        let mut z = layer.bias.data()[j];
                        for k in 0..fan_in {
                            z += r[k] * layer.weight.get(k, j);
                        }
                        if li == last { z } else { z.tanh() }
                    })
                    .collect()
            })
            .collect();
    }
    rows.concat()
}

#[test]
fn mlp_forward_matches_straight_line_evaluation() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::new(5, 3, &MlpConfig::with_hidden(7, 2), &mut rng).unwrap();
        let x = random_tensor(&mut rng, &[6, 5], 2.0);
        let g = Graph::new();
        let out = g.evaluate(mlp.bind(&g).forward(g.constant(x.clone()))).unwrap();
        for (a, b) in out.data().iter().zip(hand_forward(&mlp, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn mlp_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mlp = Mlp::new(4, 2, &MlpConfig::with_hidden(6, 2), &mut rng).unwrap();
    let x = random_tensor(&mut rng, &[5, 4], 1.5);
    let target = random_tensor(&mut rng, &[5, 2], 1.0);
    let loss = |params: &[Tensor]| {
        let mut m = mlp.clone();
        for (p, v) in m.params_mut().into_iter().zip(params) {
            *p = v.clone();
        }
        let out = m.forward_values(&x);
        out.data().iter().zip(target.data()).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / 10.0
    };
    let g = Graph::new();
    let bound = mlp.bind(&g);
    let out = bound.forward(g.constant(x.clone()));
    let l = (out - g.constant(target.clone())).square().mean();
    let auto = g.gradient(l, &bound.params()).unwrap();
    let params: Vec<Tensor> = mlp.params().into_iter().cloned().collect();
    let fd = central_diff(loss, &params, 1e-5);
    assert!(max_rel_err(&auto, &fd, 1e-3) < 1e-4);
}

#[test]
fn linear_penalty_double_backward() {
    // d/dw (||grad_x (w . x)|| - 1)^2 = d/dw (||w|| - 1)^2 = 2 (||w|| - 1) w / ||w||
    let w0 = [0.9, -0.3, 1.4];
    let penalty = |w: &[f64]| (w.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).powi(2);
    let g = Graph::new();
    let w = g.param(Tensor::matrix(3, 1, w0.to_vec()).unwrap());
    let x = g.constant(Tensor::matrix(2, 3, vec![0.2, -1.0, 0.5, 1.0, 0.0, -0.7]).unwrap());
    let gx = g.input_gradient(x, |x| x.matmul(w)).unwrap();
    let p = gx.row_l2_norm().add_scalar(-1.0).square().mean();
    assert!((p.item() - penalty(&w0)).abs() < 1e-14);
    let auto = g.gradient(p, &[w]).unwrap();
    let fd = central_diff(|t| penalty(t[0].data()), &[Tensor::matrix(3, 1, w0.to_vec()).unwrap()], 1e-5);
    assert!(max_rel_err(&auto, &fd, 1e-3) < 1e-3);
}

#[test]
fn gradient_penalty_double_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let critic = Mlp::new(3, 1, &MlpConfig { hidden: vec![5, 4], hidden_gain: 1.5, output_gain: 2.0 }, &mut rng).unwrap();
    let x = random_tensor(&mut rng, &[4, 3], 1.0);
    let penalty = |params: &[Tensor]| {
        let mut m = critic.clone();
        for (p, v) in m.params_mut().into_iter().zip(params) {
            *p = v.clone();
        }
        (0..x.rows())
            .map(|i| {
                let gr = hand_input_gradient(&m, x.row(i));
                (gr.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).powi(2)
            })
            .sum::<f64>()
            / x.rows() as f64
    };
    let g = Graph::new();
    let bound = critic.bind(&g);
    let xv = g.constant(x.clone());
    let gx = g.input_gradient(xv, |inp| bound.forward(inp)).unwrap();
    for i in 0..x.rows() {
        let hand = hand_input_gradient(&critic, x.row(i));
        for (a, b) in gx.value().row(i).iter().zip(&hand) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let p = gx.row_l2_norm().add_scalar(-1.0).square().mean();
    let params: Vec<Tensor> = critic.params().into_iter().cloned().collect();
    assert!((p.item() - penalty(&params)).abs() < 1e-12);
    let auto = g.gradient(p, &bound.params()).unwrap();
    let fd = central_diff(penalty, &params, 1e-5);
    let err = max_rel_err(&auto, &fd, 1e-3);
    assert!(err < 1e-3, "double-backward relative error {err}");
}
