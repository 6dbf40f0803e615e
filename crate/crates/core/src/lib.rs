//! Offline imitation learning by entropy-regularized Earth-Mover distribution
//! matching (SoftDICE), with offline ValueDICE and behavioral-cloning
//! baselines and an exact verification suite for the underlying identities.

pub mod analysis;
pub mod baselines;
pub mod diffcore;
pub mod envs;
mod error;
pub mod nets;
pub mod replay;
pub mod softdice;

pub use error::{Error, Result};
