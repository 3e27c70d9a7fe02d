//! From-scratch recurrent classifier: GRU/LSTM/RNN cells, additive temporal
//! attention, softmax head, reverse-mode gradients, Adam, and the training
//! loop.

pub mod adam;
pub mod attention;
pub mod cell;
pub mod init;
pub mod model;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use attention::AttentionParams;
pub use cell::{gru_step, lstm_step, rnn_step, CellParams, GruParams, LstmParams, RnnParams};
pub use model::{cross_entropy, DenseParams, ForwardCache, TemporalModel};
pub use train::{train, EpochLog};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gru,
    Lstm,
    Rnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalModelConfig {
    pub cell: CellKind,
    pub layer_sizes: [usize; 2],
    pub attention: bool,
    pub dense_units: Option<usize>,
    pub num_classes: usize,
    pub input_dim: usize,
}

impl TemporalModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::data("layer sizes must be positive"));
        }
        if self.dense_units == Some(0) {
            return Err(Error::data("dense units must be positive"));
        }
        if self.num_classes == 0 || self.input_dim == 0 {
            return Err(Error::data("num_classes and input_dim must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub recurrent_dropout: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 300,
            batch_size: 32,
            recurrent_dropout: 0.6,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate < 1.0) {
            return Err(Error::data("learning rate must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.recurrent_dropout) {
            return Err(Error::data("recurrent dropout must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::data("batch size must be positive"));
        }
        Ok(())
    }
}
