use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::critic::CriticF;
use super::mlp::{Linear, Mlp};
use super::policy::{TanhGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
use crate::diffcore::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Named parameter tensors: `{layer-name: {shape, values}}` in JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint(pub BTreeMap<String, ParamRecord>);

impl Checkpoint {
    pub fn from_named<'a>(params: impl IntoIterator<Item = (String, &'a Tensor)>) -> Self {
        Self(
            params
                .into_iter()
                .map(|(k, t)| (k, ParamRecord { shape: t.shape().to_vec(), values: t.data().to_vec() }))
                .collect(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    fn tensor(&self, name: &str) -> Result<Tensor> {
        let rec = self.0.get(name).ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
        Tensor::new(rec.shape.clone(), rec.values.clone())
            .map_err(|e| Error::Checkpoint(format!("parameter `{name}`: {e}")))
    }

    fn mlp(&self, prefix: &str) -> Result<Mlp> {
        let mut layers = Vec::new();
        while self.0.contains_key(&format!("{prefix}.l{}.weight", layers.len())) {
            let i = layers.len();
            layers.push(Linear {
                weight: self.tensor(&format!("{prefix}.l{i}.weight"))?,
                bias: self.tensor(&format!("{prefix}.l{i}.bias"))?,
            });
        }
        if layers.is_empty() {
            return Err(Error::Checkpoint(format!("no layers under `{prefix}`")));
        }
        Mlp::from_layers(layers)
    }
}

impl TanhGaussianPolicy {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_named(self.named_params())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mean_net = ckpt.mlp("mean_net")?;
        let log_std = ckpt.tensor("log_std")?;
        if log_std.shape() != [1, mean_net.output_dim()] {
            return Err(Error::Checkpoint(format!(
                "log_std shape {:?} does not match action dimension {}",
                log_std.shape(),
                mean_net.output_dim()
            )));
        }
        Ok(Self { mean_net, log_std, log_std_bounds: (LOG_STD_MIN, LOG_STD_MAX) })
    }
}

impl CriticF {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_named(self.net.named_params("critic"))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(Self { net: ckpt.mlp("critic")? })
    }
}
