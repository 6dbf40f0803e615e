//! Random engine graphs and a hand-differentiated gradient penalty, shared by
//! the engine tests and the acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softdice::diffcore::{Graph, Tensor, Var};
use softdice::nets::{Mlp, MlpConfig};

use super::{central_diff, max_rel_err};

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// A randomly drawn composition of engine ops, replayable on new parameter values.
pub struct Recipe {
    steps: Vec<(u8, Option<usize>)>,
    root: u8,
    pub params: Vec<Tensor>,
}

impl Recipe {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let (n, m) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let mut params = vec![random_tensor(rng, &[n, m], 1.0)];
        let mut shape = (n, m);
        let depth = rng.random_range(1..=4);
        let mut steps = Vec::new();
        for _ in 0..depth {
            let op: u8 = rng.random_range(0..12);
            let extra = match op {
                0 => {
                    let k = rng.random_range(1..=8);
                    params.push(random_tensor(rng, &[shape.1, k], 0.8));
                    shape.1 = k;
                    Some(params.len() - 1)
                }
                5 => {
                    params.push(random_tensor(rng, &[shape.0, shape.1], 1.0));
                    Some(params.len() - 1)
                }
                6 | 7 => {
                    params.push(random_tensor(rng, &[1, shape.1], 1.0));
                    Some(params.len() - 1)
                }
                9 => {
                    params.push(random_tensor(rng, &[shape.0, 2], 1.0));
                    Some(params.len() - 1)
                }
                10 => {
                    shape = (shape.1, shape.0);
                    None
                }
                _ => None,
            };
            steps.push((op, extra));
        }
        Recipe { steps, root: rng.random_range(0..3), params }
    }

    pub fn build<'g>(&self, leaves: &[Var<'g>]) -> Var<'g> {
        let mut h = leaves[0];
        for &(op, extra) in &self.steps {
            let p = extra.map(|i| leaves[i]);
            h = match op {
                0 => h.matmul(p.unwrap()),
                1 => h.tanh(),
                2 => h.tanh().exp(),
                3 => h.square().add_scalar(0.5).log(),
                4 => h.square().add_scalar(0.1).sqrt(),
                5 => h * p.unwrap(),
                6 => h.add_bias(p.unwrap()),
                7 => h.mul_row(p.unwrap()),
                8 => h - h.tanh().scale(0.5),
                9 => {
                    let m = h.value().cols();
                    p.unwrap().concat_cols(h).slice_cols(1, m)
                }
                10 => h.t(),
                _ => {
                    let m = h.value().cols();
                    (h.sum_cols().broadcast_cols(m) + h).square().add_scalar(1.0).recip()
                }
            };
        }
        match self.root {
            0 => h.sum(),
            1 => h.mean().neg(),
            _ => h.l2_norm(),
        }
    }

    pub fn value(&self, params: &[Tensor]) -> f64 {
        let g = Graph::new();
        let leaves: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
        g.evaluate(self.build(&leaves)).unwrap().item()
    }

    pub fn gradient(&self) -> Vec<Tensor> {
        let g = Graph::new();
        let leaves: Vec<Var> = self.params.iter().map(|p| g.param(p.clone())).collect();
        let root = self.build(&leaves);
        g.gradient(root, &leaves).unwrap()
    }
}

/// Worst relative error between autodiff and central differences over the
/// graphs drawn from seeds `0..n`.
pub fn random_graph_worst_error(n: u64) -> f64 {
    (0..n)
        .map(|seed| {
            let recipe = Recipe::random(&mut ChaCha8Rng::seed_from_u64(seed));
            let fd = central_diff(|p| recipe.value(p), &recipe.params, 1e-5);
            max_rel_err(&recipe.gradient(), &fd, 1e-3)
        })
        .fold(0.0, f64::max)
}

/// Hand-derived input gradient of a tanh MLP for one row.
pub fn hand_input_gradient(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let layers = mlp.layers();
    let mut acts = vec![x.to_vec()];
    for l in &layers[..layers.len() - 1] {
        let prev = acts.last().unwrap();
        let h: Vec<f64> = (0..l.weight.cols())
            .map(|j| (l.bias.data()[j] + (0..prev.len()).map(|k| prev[k] * l.weight.get(k, j)).sum::<f64>()).tanh())
            .collect();
        acts.push(h);
    }
    let out_layer = &layers[layers.len() - 1];
    let mut delta: Vec<f64> = (0..out_layer.weight.rows()).map(|k| out_layer.weight.get(k, 0)).collect();
    for li in (0..layers.len() - 1).rev() {
        let h = &acts[li + 1];
        let pre_delta: Vec<f64> = delta.iter().zip(h).map(|(d, a)| d * (1.0 - a * a)).collect();
        let w = &layers[li].weight;
        delta = (0..w.rows()).map(|k| (0..w.cols()).map(|j| w.get(k, j) * pre_delta[j]).sum()).collect();
    }
    delta
}

/// Relative error of the parameter gradient of a tanh critic's gradient
/// penalty against central differences of the hand-computed penalty.
pub fn gradient_penalty_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
    let gx = g.input_gradient(g.constant(x.clone()), |inp| bound.forward(inp)).unwrap();
    let p = gx.row_l2_norm().add_scalar(-1.0).square().mean();
    let params: Vec<Tensor> = critic.params().into_iter().cloned().collect();
    let auto = g.gradient(p, &bound.params()).unwrap();
    max_rel_err(&auto, &central_diff(penalty, &params, 1e-5), 1e-3)
}
