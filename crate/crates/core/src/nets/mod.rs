//! Networks, the squashed-Gaussian policy, the critic and the Adam rule.

mod adam;
mod checkpoint;
mod critic;
mod init;
mod mlp;
mod policy;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{Checkpoint, ParamRecord};
pub use critic::{BoundCritic, CriticF};
pub use init::orthogonal_init;
pub use mlp::{orthogonal_penalty, BoundMlp, Linear, Mlp, MlpConfig};
pub use policy::{
    BoundPolicy, PolicySample, TanhGaussianPolicy, ACTION_LIMIT, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS,
};
