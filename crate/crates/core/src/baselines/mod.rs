//! Baselines trained on the same buffers, networks, initialization, and
//! evaluation as SoftDICE: offline ValueDICE and behavioral cloning.

mod bc;
mod valuedice;

pub use bc::{bc_loss, bc_train, bc_train_step, BcConfig, BcState};
pub use valuedice::{
    valuedice_loss, valuedice_terms, valuedice_train, valuedice_train_step, ValueDiceBatch, ValueDiceConfig,
    ValueDiceNoise, ValueDiceReport, ValueDiceTerms, EXP_CLAMP,
};
