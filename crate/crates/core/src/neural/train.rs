//! The training loop: seeded 80/20 split, per-epoch shuffling, mini-batch
//! Adam with decoupled weight decay. Fully deterministic for a fixed
//! (dataset, config, network, filter).

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    Adam, Architecture, LossKind, LstmParameters, MlpParameters, NetworkParameters, NeuralError,
};
use crate::flow::LabeledSample;
use crate::types::{Label, LabelSet, FEATURE_LEN};

// Independent ChaCha streams per concern, so the split is identical for any
// two runs sharing a seed regardless of network shape.
const STREAM_SPLIT: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {context}")]
    InvalidConfig { context: String },
    #[error("dataset is empty after applying the class filter")]
    EmptyFiltered,
    #[error("no training samples remain after the test split and class filter")]
    EmptyTrainSplit,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub margin_eta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 20,
            learning_rate: 1.0e-4,
            weight_decay: 0.05,
            test_fraction: 0.2,
            seed: 0,
            loss_kind: LossKind::Mse,
            margin_eta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig {
                context: "batch size must be at least 1".to_string(),
            });
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(TrainError::InvalidConfig {
                context: format!("test fraction must be in (0, 1), got {}", self.test_fraction),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig {
                context: format!("learning rate must be positive, got {}", self.learning_rate),
            });
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::InvalidConfig {
                context: format!("weight decay must be non-negative, got {}", self.weight_decay),
            });
        }
        if self.loss_kind == LossKind::Margin && !(self.margin_eta > 0.0) {
            return Err(TrainError::InvalidConfig {
                context: format!("margin eta must be positive, got {}", self.margin_eta),
            });
        }
        Ok(())
    }
}

/// Network family and layer widths to train. Input is always 784 bytes and
/// output always the five class scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkConfig {
    Mlp {
        hidden1: usize,
        hidden2: usize,
    },
    Lstm {
        hidden: usize,
        step_width: usize,
        head_hidden: usize,
    },
}

impl NetworkConfig {
    /// The standard MLP: 784 → 1000 → 100 → 5.
    pub fn mlp() -> Self {
        NetworkConfig::Mlp {
            hidden1: super::MLP_HIDDEN1,
            hidden2: super::MLP_HIDDEN2,
        }
    }

    /// The standard LSTM: 28 steps of 28 bytes, hidden 300, head 100 → 5.
    pub fn lstm() -> Self {
        NetworkConfig::Lstm {
            hidden: super::LSTM_HIDDEN,
            step_width: super::LSTM_STEP_WIDTH,
            head_hidden: super::LSTM_HEAD_HIDDEN,
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            NetworkConfig::Mlp { .. } => Architecture::Mlp,
            NetworkConfig::Lstm { .. } => Architecture::Lstm,
        }
    }

    fn build(&self, rng: &mut ChaCha8Rng) -> Result<NetworkParameters, TrainError> {
        match *self {
            NetworkConfig::Mlp { hidden1, hidden2 } => {
                if hidden1 == 0 || hidden2 == 0 {
                    return Err(TrainError::InvalidConfig {
                        context: "mlp hidden widths must be positive".to_string(),
                    });
                }
                Ok(NetworkParameters::Mlp(MlpParameters::seeded_with_dims(
                    FEATURE_LEN,
                    hidden1,
                    hidden2,
                    crate::types::CLASS_COUNT,
                    rng,
                )))
            }
            NetworkConfig::Lstm {
                hidden,
                step_width,
                head_hidden,
            } => {
                if step_width == 0 || FEATURE_LEN % step_width != 0 {
                    return Err(TrainError::InvalidConfig {
                        context: format!(
                            "step width {step_width} must divide the {FEATURE_LEN}-byte input"
                        ),
                    });
                }
                if hidden == 0 || head_hidden == 0 {
                    return Err(TrainError::InvalidConfig {
                        context: "lstm widths must be positive".to_string(),
                    });
                }
                Ok(NetworkParameters::Lstm(LstmParameters::seeded_with_dims(
                    step_width,
                    hidden,
                    head_hidden,
                    crate::types::CLASS_COUNT,
                    rng,
                )))
            }
        }
    }
}

/// Train and held-out loss after one epoch. `test_loss` is NaN when the
/// filtered test split is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParameters,
    pub curve: Vec<EpochLoss>,
    /// Indices (into the input dataset, ascending) of the held-out test
    /// split. The split is taken before the class filter, so runs over the
    /// same dataset and seed share it regardless of filter.
    pub test_indices: Vec<usize>,
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Train one network. The dataset is split 80/20 by a seeded shuffle, the
/// class filter then restricts which samples contribute gradients (VPN is
/// excluded from second-network training this way), and each epoch runs
/// freshly shuffled mini-batches through Adam.
pub fn train(
    dataset: &[LabeledSample],
    network: &NetworkConfig,
    cfg: &TrainConfig,
    class_filter: LabelSet,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if !dataset.iter().any(|s| class_filter.contains(s.label)) {
        return Err(TrainError::EmptyFiltered);
    }

    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut seeded_stream(cfg.seed, STREAM_SPLIT));
    let test_count = (dataset.len() as f64 * cfg.test_fraction) as usize;
    let (test_split, train_split) = indices.split_at(test_count);

    let mut train_indices: Vec<usize> = train_split
        .iter()
        .copied()
        .filter(|&i| class_filter.contains(dataset[i].label))
        .collect();
    if train_indices.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    let test_filtered: Vec<usize> = test_split
        .iter()
        .copied()
        .filter(|&i| class_filter.contains(dataset[i].label))
        .collect();

    let mut params = network.build(&mut seeded_stream(cfg.seed, STREAM_INIT))?;
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay, &params.arrays());
    let mut shuffle_rng = seeded_stream(cfg.seed, STREAM_SHUFFLE);

    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        train_indices.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for (batch, chunk) in train_indices.chunks(cfg.batch_size).enumerate() {
            let (inputs, labels) = gather(dataset, chunk);
            let (loss, grads) =
                params.backward_batch(inputs.view(), &labels, cfg.loss_kind, cfg.margin_eta)?;
            if !loss.is_finite() {
                return Err(TrainError::NanLoss { epoch, batch });
            }
            adam.step(params.arrays_mut(), &grads);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_indices.len() as f64;

        let test_loss = mean_loss(&params, dataset, &test_filtered, cfg)?;
        curve.push(EpochLoss {
            epoch,
            train_loss,
            test_loss,
        });
    }

    let mut test_indices = test_split.to_vec();
    test_indices.sort_unstable();
    Ok(TrainOutcome {
        params,
        curve,
        test_indices,
    })
}

fn gather(dataset: &[LabeledSample], indices: &[usize]) -> (Array2<f64>, Vec<Label>) {
    let mut inputs = Array2::zeros((indices.len(), FEATURE_LEN));
    let mut labels = Vec::with_capacity(indices.len());
    for (mut row, &i) in inputs.rows_mut().into_iter().zip(indices) {
        row.as_slice_mut()
            .unwrap()
            .copy_from_slice(dataset[i].features.values().as_slice());
        labels.push(dataset[i].label);
    }
    (inputs, labels)
}

fn mean_loss(
    params: &NetworkParameters,
    dataset: &[LabeledSample],
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for chunk in indices.chunks(cfg.batch_size.max(64)) {
        let (inputs, labels) = gather(dataset, chunk);
        let loss = params.batch_loss(inputs.view(), &labels, cfg.loss_kind, cfg.margin_eta)?;
        sum += loss * chunk.len() as f64;
    }
    Ok(sum / indices.len() as f64)
}
