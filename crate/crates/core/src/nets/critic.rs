use rand::Rng;

use super::mlp::{BoundMlp, Mlp, MlpConfig};
use crate::diffcore::{Graph, Tensor, Var};
use crate::Result;

/// Scalar function of a concatenated `(state, action)` pair.
///
/// Serves as the Lipschitz critic `f` of SoftDICE and as `nu` of ValueDICE.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticF {
    pub net: Mlp,
}

impl CriticF {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, cfg: &MlpConfig, rng: &mut R) -> Result<Self> {
        Ok(Self { net: Mlp::new(state_dim + action_dim, 1, cfg, rng)? })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn bind<'g>(&self, g: &'g Graph) -> BoundCritic<'g> {
        BoundCritic { net: self.net.bind(g) }
    }

    /// `f(s, a)` for each row, without a graph.
    pub fn values(&self, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..states.rows())
            .map(|i| states.row(i).iter().chain(actions.row(i)).copied().collect())
            .collect();
        Ok(self.net.forward_values(&Tensor::from_rows(&rows)?).into_data())
    }
}

pub struct BoundCritic<'g> {
    pub net: BoundMlp<'g>,
}

impl<'g> BoundCritic<'g> {
    /// `[n, 1]` critic values.
    pub fn forward(&self, states: Var<'g>, actions: Var<'g>) -> Var<'g> {
        self.net.forward(states.concat_cols(actions))
    }

    /// On a concatenated `[n, ds + da]` input.
    pub fn forward_joint(&self, inputs: Var<'g>) -> Var<'g> {
        self.net.forward(inputs)
    }

    pub fn params(&self) -> Vec<Var<'g>> {
        self.net.params()
    }
}
