#![allow(dead_code)]

pub mod graphs;

use softdice::diffcore::Tensor;
use softdice::nets::{CriticF, Linear, Mlp, TanhGaussianPolicy};

/// Central finite differences of `f` w.r.t. every entry of every tensor.
pub fn central_diff(f: impl Fn(&[Tensor]) -> f64, params: &[Tensor], h: f64) -> Vec<Tensor> {
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut grad = Tensor::zeros(params[i].shape());
        for k in 0..params[i].numel() {
            let orig = params[i].data()[k];
            work[i].data_mut()[k] = orig + h;
            let up = f(&work);
            work[i].data_mut()[k] = orig - h;
            let down = f(&work);
            work[i].data_mut()[k] = orig;
            grad.data_mut()[k] = (up - down) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from
/// turning round-off into huge relative errors.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_rel_err(a: &[Tensor], b: &[Tensor], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.data().iter().zip(y.data()).map(move |(&u, &v)| rel_err(u, v, floor)))
        .fold(0.0, f64::max)
}

pub const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

// flat layouts: policy [w1(3), b1(3), w2(3), b2, log_std]; critic [w1(2x3), b1(3), w2(3), b2]
pub fn tiny_policy(p: &[f64]) -> TanhGaussianPolicy {
    let l0 = Linear { weight: Tensor::matrix(1, 3, p[0..3].to_vec()).unwrap(), bias: Tensor::matrix(1, 3, p[3..6].to_vec()).unwrap() };
    let l1 = Linear { weight: Tensor::matrix(3, 1, p[6..9].to_vec()).unwrap(), bias: Tensor::matrix(1, 1, vec![p[9]]).unwrap() };
    TanhGaussianPolicy {
        mean_net: Mlp::from_layers(vec![l0, l1]).unwrap(),
        log_std: Tensor::matrix(1, 1, vec![p[10]]).unwrap(),
        log_std_bounds: (-5.0, 2.0),
    }
}

pub fn tiny_critic(c: &[f64]) -> CriticF {
    let l0 = Linear { weight: Tensor::matrix(2, 3, c[0..6].to_vec()).unwrap(), bias: Tensor::matrix(1, 3, c[6..9].to_vec()).unwrap() };
    let l1 = Linear { weight: Tensor::matrix(3, 1, c[9..12].to_vec()).unwrap(), bias: Tensor::matrix(1, 1, vec![c[12]]).unwrap() };
    CriticF { net: Mlp::from_layers(vec![l0, l1]).unwrap() }
}

pub fn flat(params: Vec<&Tensor>) -> Vec<f64> {
    params.into_iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Straight-line `f(s, a)` and its input gradient.
pub fn f_hand(c: &[f64], s: f64, a: f64) -> (f64, [f64; 2]) {
    let mut out = c[12];
    let mut grad = [0.0; 2];
    for j in 0..3 {
        let h = (c[j] * s + c[3 + j] * a + c[6 + j]).tanh();
        out += c[9 + j] * h;
        grad[0] += c[9 + j] * (1.0 - h * h) * c[j];
        grad[1] += c[9 + j] * (1.0 - h * h) * c[3 + j];
    }
    (out, grad)
}

/// Straight-line reparametrized sample `(a, log pi(a | s))`.
pub fn sample_hand(p: &[f64], s: f64, eps: f64) -> (f64, f64) {
    let mu = p[9] + (0..3).map(|j| p[6 + j] * (p[j] * s + p[3 + j]).tanh()).sum::<f64>();
    let ls = p[10].clamp(-5.0, 2.0);
    let a = (mu + ls.exp() * eps).tanh();
    (a, -0.5 * eps * eps - HALF_LOG_2PI - ls - (1.0 - a * a + 1e-6).ln())
}

pub const POLICY0: [f64; 11] = [0.8, -0.5, 0.3, 0.1, -0.2, 0.05, 0.7, -0.6, 0.4, 0.02, -0.3];
pub const CRITIC0: [f64; 13] = [0.5, -0.4, 0.9, 0.3, 0.8, -0.7, 0.1, 0.0, -0.1, 0.6, -0.9, 0.45, 0.2];
