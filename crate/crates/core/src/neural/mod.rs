//! From-scratch neural core: dense and LSTM forward passes, analytic
//! gradients, the two loss functions, and the Adam training loop.

pub mod activations;
mod adam;
mod loss;
mod lstm;
mod mlp;
mod model_io;
mod train;

pub use adam::Adam;
pub use loss::{
    batch_loss_and_grad, margin_distance_loss, mse_loss, LossKind, TargetVector,
};
pub use lstm::{
    lstm_forward, lstm_forward_trace, lstm_backward, LstmBatchTrace, LstmParameters, LstmState,
    LSTM_HEAD_HIDDEN, LSTM_HIDDEN, LSTM_STEP_WIDTH,
};
pub use mlp::{
    mlp_backward, mlp_forward, mlp_forward_trace, mlp_scores_batch, MlpBatchTrace, MlpParameters,
    MlpTrace, MLP_HIDDEN1, MLP_HIDDEN2,
};
pub use model_io::{read_model, read_model_file, write_model, write_model_file, ModelIoError};
pub use train::{
    train, EpochLoss, NetworkConfig, TrainConfig, TrainError, TrainOutcome,
};

use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

use crate::types::{ByteVector, ScoreVector, CLASS_COUNT};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite value in {location}")]
    NonFinite { location: String },
    #[error("shape error: {context}")]
    Shape { context: String },
    #[error("configuration error: {context}")]
    Config { context: String },
}

/// Which network family a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Mlp,
    Lstm,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Mlp => write!(f, "mlp"),
            Architecture::Lstm => write!(f, "lstm"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(Architecture::Mlp),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(format!("unknown architecture {other:?} (expected mlp or lstm)")),
        }
    }
}

/// A trained parameter set of either architecture, as stored in model files
/// and referenced by pipelines.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkParameters {
    Mlp(MlpParameters),
    Lstm(LstmParameters),
}

impl NetworkParameters {
    pub fn architecture(&self) -> Architecture {
        match self {
            NetworkParameters::Mlp(_) => Architecture::Mlp,
            NetworkParameters::Lstm(_) => Architecture::Lstm,
        }
    }

    /// Class scores for a single 784-byte input.
    pub fn scores(&self, x: &ByteVector) -> Result<ScoreVector, NeuralError> {
        match self {
            NetworkParameters::Mlp(p) => Ok(mlp_forward(p, x)?.y),
            NetworkParameters::Lstm(p) => Ok(lstm_forward(p, x)?.1),
        }
    }

    /// Class scores for a batch, one row per sample.
    pub fn scores_batch(&self, inputs: ndarray::ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        match self {
            NetworkParameters::Mlp(p) => mlp_scores_batch(p, inputs),
            NetworkParameters::Lstm(p) => Ok(lstm_forward_trace(p, inputs)?.y),
        }
    }

    pub fn array_names(&self) -> Vec<&'static str> {
        match self {
            NetworkParameters::Mlp(_) => MlpParameters::array_names().to_vec(),
            NetworkParameters::Lstm(_) => LstmParameters::array_names().to_vec(),
        }
    }

    pub fn arrays(&self) -> Vec<&Array2<f64>> {
        match self {
            NetworkParameters::Mlp(p) => p.arrays().to_vec(),
            NetworkParameters::Lstm(p) => p.arrays().to_vec(),
        }
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            NetworkParameters::Mlp(p) => p.arrays_mut().into_iter().collect(),
            NetworkParameters::Lstm(p) => p.arrays_mut().into_iter().collect(),
        }
    }

    /// Batch loss and parameter gradients for the given labels.
    pub fn backward_batch(
        &self,
        inputs: ndarray::ArrayView2<f64>,
        labels: &[crate::types::Label],
        loss: LossKind,
        margin_eta: f64,
    ) -> Result<(f64, GradientSet), NeuralError> {
        match self {
            NetworkParameters::Mlp(p) => {
                let trace = mlp_forward_trace(p, inputs)?;
                let (loss_value, d_y) = batch_loss_and_grad(&trace.y, labels, loss, margin_eta)?;
                let grads = mlp_backward(p, inputs, &trace, &d_y)?;
                Ok((loss_value, grads))
            }
            NetworkParameters::Lstm(p) => {
                let trace = lstm_forward_trace(p, inputs)?;
                let (loss_value, d_y) = batch_loss_and_grad(&trace.y, labels, loss, margin_eta)?;
                let grads = lstm_backward(p, inputs, &trace, &d_y)?;
                Ok((loss_value, grads))
            }
        }
    }

    /// Mean batch loss without gradients, for held-out reporting.
    pub fn batch_loss(
        &self,
        inputs: ndarray::ArrayView2<f64>,
        labels: &[crate::types::Label],
        loss: LossKind,
        margin_eta: f64,
    ) -> Result<f64, NeuralError> {
        let y = self.scores_batch(inputs)?;
        let (value, _) = batch_loss_and_grad(&y, labels, loss, margin_eta)?;
        Ok(value)
    }
}

/// One gradient array per parameter array, in the same order as
/// `array_names()` / `arrays()`.
#[derive(Debug, Clone)]
pub struct GradientSet {
    arrays: Vec<Array2<f64>>,
}

impl GradientSet {
    pub fn new(arrays: Vec<Array2<f64>>) -> Self {
        GradientSet { arrays }
    }

    pub fn arrays(&self) -> &[Array2<f64>] {
        &self.arrays
    }

    pub fn ensure_finite(&self) -> Result<(), NeuralError> {
        for (i, a) in self.arrays.iter().enumerate() {
            ensure_finite(&format!("gradient[{i}]"), a)?;
        }
        Ok(())
    }
}

/// Uniform Xavier/Glorot initialization over ±sqrt(6 / (fan_in + fan_out)),
/// filled row-major so draws are reproducible for a fixed shape order.
pub(crate) fn xavier_uniform<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut a = Array2::zeros((fan_in, fan_out));
    for v in a.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
    a
}

/// Same distribution but with explicit storage shape, for matrices whose
/// storage orientation differs from (fan_in, fan_out).
pub(crate) fn xavier_uniform_shaped<R: Rng>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut a = Array2::zeros((rows, cols));
    for v in a.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
    a
}

pub(crate) fn ensure_finite(location: &str, a: &Array2<f64>) -> Result<(), NeuralError> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NeuralError::NonFinite {
            location: location.to_string(),
        })
    }
}

/// Stack sample feature vectors into a (B, 784) batch matrix.
pub fn batch_matrix(samples: &[&ByteVector]) -> Array2<f64> {
    let mut m = Array2::zeros((samples.len(), crate::types::FEATURE_LEN));
    for (mut row, sample) in m.rows_mut().into_iter().zip(samples) {
        row.as_slice_mut()
            .unwrap()
            .copy_from_slice(sample.values().as_slice());
    }
    m
}

/// Scores for `CLASS_COUNT` outputs as a typed vector; callers guarantee the
/// row came from a Gaussian output layer.
pub(crate) fn score_vector_from_row(
    y: ndarray::ArrayView1<f64>,
) -> Result<ScoreVector, NeuralError> {
    let mut scores = [0.0; CLASS_COUNT];
    if y.len() != CLASS_COUNT {
        return Err(NeuralError::Shape {
            context: format!("expected {CLASS_COUNT} scores, got {}", y.len()),
        });
    }
    for (slot, &v) in scores.iter_mut().zip(y.iter()) {
        *slot = v;
    }
    ScoreVector::new(scores).map_err(|e| NeuralError::NonFinite {
        location: format!("score vector: {e}"),
    })
}
