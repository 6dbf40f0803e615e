use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::orthogonal_init;
use crate::diffcore::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Widths and initialization gains for an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub hidden_gain: f64,
    pub output_gain: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![256, 256], hidden_gain: 1.0, output_gain: 1.0 }
    }
}

impl MlpConfig {
    pub fn with_hidden(width: usize, depth: usize) -> Self {
        Self { hidden: vec![width; depth], ..Self::default() }
    }
}

/// Dense layer computing `x W + b` with `W: [in, out]`, `b: [1, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Fully-connected network: tanh on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, cfg: &MlpConfig, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend(&cfg.hidden);
        sizes.push(output);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { cfg.output_gain } else { cfg.hidden_gain };
                Ok(Linear { weight: orthogonal_init(w[0], w[1], gain, rng)?, bias: Tensor::zeros(&[1, w[1]]) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    /// Rebuilds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (l.weight.rows(), l.weight.cols());
            if l.weight.shape().len() != 2 || l.bias.shape() != [1, fan_out] {
                return Err(Error::Shape(format!(
                    "layer {i}: weight {:?} and bias {:?} do not form a dense layer",
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
            if i > 0 && layers[i - 1].weight.cols() != fan_in {
                return Err(Error::Shape(format!(
                    "layer {i} expects {fan_in} inputs but layer {} emits {}",
                    i - 1,
                    layers[i - 1].weight.cols()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [(format!("{prefix}.l{i}.weight"), &l.weight), (format!("{prefix}.l{i}.bias"), &l.bias)]
            })
            .collect()
    }

    /// Registers the parameters as leaves of `g`.
    pub fn bind<'g>(&self, g: &'g Graph) -> BoundMlp<'g> {
        BoundMlp {
            layers: self.layers.iter().map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone()))).collect(),
        }
    }

    /// Forward pass on plain tensors, without recording a graph.
    pub fn forward_values(&self, x: &Tensor) -> Tensor {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&l.weight);
            let c = z.cols();
            for (k, v) in z.data_mut().iter_mut().enumerate() {
                *v += l.bias.data()[k % c];
                if i != last {
                    *v = v.tanh();
                }
            }
            h = z;
        }
        h
    }
}

/// An [`Mlp`] whose parameters live in a graph.
pub struct BoundMlp<'g> {
    layers: Vec<(Var<'g>, Var<'g>)>,
}

impl<'g> BoundMlp<'g> {
    pub fn forward(&self, x: Var<'g>) -> Var<'g> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(w).add_bias(b);
            if i != last {
                h = h.tanh();
            }
        }
        h
    }

    /// Parameters in the same order as [`Mlp::params`].
    pub fn params(&self) -> Vec<Var<'g>> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    pub fn weights(&self) -> Vec<Var<'g>> {
        self.layers.iter().map(|&(w, _)| w).collect()
    }
}

/// `sum_W ||W^T W - I||_F^2` over the given weight matrices.
pub fn orthogonal_penalty<'g>(g: &'g Graph, weights: &[Var<'g>]) -> Var<'g> {
    let mut total = g.scalar(0.0);
    for &w in weights {
        let n = w.value().cols();
        let mut eye = Tensor::zeros(&[n, n]);
        for i in 0..n {
            eye.data_mut()[i * n + i] = 1.0;
        }
        let gram = w.t().matmul(w);
        total = total + (gram - g.constant(eye)).square().sum();
    }
    total
}
