//! A complete two-phase classifier: method, both networks, and thresholds,
//! plus the versioned text descriptor that ties them together on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::decision::{
    center_distances, distance_cascade, distance_cascade_lazy, score_cascade, score_cascade_lazy,
    ClassCenters, Decision, DistanceVector, Method, ThresholdError, Thresholds,
};
use crate::flow::LabeledSample;
use crate::neural::{
    read_model_file, train, write_model_file, EpochLoss, LossKind, ModelIoError, NetworkConfig,
    NetworkParameters, NeuralError, TrainConfig, TrainError,
};
use crate::types::{ByteVector, Label, LabelSet, ScoreVector, CLASS_COUNT, FEATURE_LEN};

const DESCRIPTOR_VERSION: &str = "PIPE1";

/// Canonical label map line, spelled out so descriptor files are
/// self-describing.
fn canonical_label_map() -> String {
    let mut s = String::new();
    for label in Label::all() {
        if !s.is_empty() {
            s.push(',');
        }
        let _ = write!(s, "{}:{}", label.value(), label.name());
    }
    s
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("descriptor line {line}: {context}")]
    Descriptor { line: usize, context: String },
    #[error("descriptor is missing key {0:?}")]
    MissingKey(&'static str),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("model {path}: {source}")]
    Model {
        path: PathBuf,
        source: ModelIoError,
    },
    #[error("network {role} must take {FEATURE_LEN} inputs and produce {CLASS_COUNT} scores")]
    WrongNetworkShape { role: &'static str },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// The on-disk pipeline description: method name, two model paths
/// (relative paths resolve against the descriptor's directory), the four
/// thresholds, and the label map.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineDescriptor {
    pub method: Method,
    pub net1_path: PathBuf,
    pub net2_path: PathBuf,
    pub thresholds: Thresholds,
}

impl PipelineDescriptor {
    pub fn to_text(&self) -> String {
        let t = &self.thresholds;
        format!(
            "{DESCRIPTOR_VERSION}\n\
             method = {}\n\
             net1 = {}\n\
             net2 = {}\n\
             lambda = {}\n\
             mu = {}\n\
             eta = {}\n\
             delta = {}\n\
             labels = {}\n",
            self.method,
            self.net1_path.display(),
            self.net2_path.display(),
            t.lambda(),
            t.mu(),
            t.eta(),
            t.delta(),
            canonical_label_map(),
        )
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate();
        let (_, version) = lines
            .next()
            .ok_or(PipelineError::Descriptor {
                line: 1,
                context: "empty descriptor".to_string(),
            })?;
        if version.trim() != DESCRIPTOR_VERSION {
            return Err(PipelineError::Descriptor {
                line: 1,
                context: format!("expected version {DESCRIPTOR_VERSION}, got {version:?}"),
            });
        }

        let mut method = None;
        let mut net1 = None;
        let mut net2 = None;
        let mut values: [Option<f64>; 4] = [None; 4];
        let mut labels_line = None;

        for (index, raw) in lines {
            let line = index + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(PipelineError::Descriptor {
                line,
                context: format!("expected key = value, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_threshold = |v: &str| {
                v.parse::<f64>().map_err(|_| PipelineError::Descriptor {
                    line,
                    context: format!("{key}: not a number: {v:?}"),
                })
            };
            match key {
                "method" => {
                    method = Some(value.parse::<Method>().map_err(|e| {
                        PipelineError::Descriptor { line, context: e }
                    })?)
                }
                "net1" => net1 = Some(PathBuf::from(value)),
                "net2" => net2 = Some(PathBuf::from(value)),
                "lambda" => values[0] = Some(parse_threshold(value)?),
                "mu" => values[1] = Some(parse_threshold(value)?),
                "eta" => values[2] = Some(parse_threshold(value)?),
                "delta" => values[3] = Some(parse_threshold(value)?),
                "labels" => labels_line = Some((line, value.to_string())),
                other => {
                    return Err(PipelineError::Descriptor {
                        line,
                        context: format!("unknown key {other:?}"),
                    })
                }
            }
        }

        let (line, labels) = labels_line.ok_or(PipelineError::MissingKey("labels"))?;
        if labels != canonical_label_map() {
            return Err(PipelineError::Descriptor {
                line,
                context: format!(
                    "label map {labels:?} does not match {:?}",
                    canonical_label_map()
                ),
            });
        }

        let thresholds = Thresholds::new(
            values[0].ok_or(PipelineError::MissingKey("lambda"))?,
            values[1].ok_or(PipelineError::MissingKey("mu"))?,
            values[2].ok_or(PipelineError::MissingKey("eta"))?,
            values[3].ok_or(PipelineError::MissingKey("delta"))?,
        )?;
        Ok(PipelineDescriptor {
            method: method.ok_or(PipelineError::MissingKey("method"))?,
            net1_path: net1.ok_or(PipelineError::MissingKey("net1"))?,
            net2_path: net2.ok_or(PipelineError::MissingKey("net2"))?,
            thresholds,
        })
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<(), PipelineError> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|source| PipelineError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| PipelineError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Load both model files, resolving relative paths against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Pipeline, PipelineError> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let load = |p: &Path, role| -> Result<NetworkParameters, PipelineError> {
            let path = resolve(p);
            let params = read_model_file(&path).map_err(|source| PipelineError::Model {
                path: path.clone(),
                source,
            })?;
            check_shape(&params, role)?;
            Ok(params)
        };
        Ok(Pipeline {
            method: self.method,
            net1: load(&self.net1_path, "net1")?,
            net2: load(&self.net2_path, "net2")?,
            thresholds: self.thresholds,
        })
    }
}

fn check_shape(params: &NetworkParameters, role: &'static str) -> Result<(), PipelineError> {
    let ok = match params {
        NetworkParameters::Mlp(p) => {
            p.input_dim() == FEATURE_LEN && p.output_dim() == CLASS_COUNT
        }
        NetworkParameters::Lstm(p) => {
            FEATURE_LEN % p.step_width() == 0 && p.output_dim() == CLASS_COUNT
        }
    };
    if ok {
        Ok(())
    } else {
        Err(PipelineError::WrongNetworkShape { role })
    }
}

/// Parse a descriptor file and load its models (paths relative to the
/// descriptor's directory).
pub fn load_pipeline_file<P: AsRef<Path>>(path: P) -> Result<Pipeline, PipelineError> {
    let descriptor = PipelineDescriptor::read_file(path.as_ref())?;
    let base = path.as_ref().parent().unwrap_or_else(|| Path::new("."));
    descriptor.load(base)
}

/// A loaded two-phase classifier.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub method: Method,
    pub net1: NetworkParameters,
    pub net2: NetworkParameters,
    pub thresholds: Thresholds,
}

/// First-stage verdict: either fully decided by net1/rejection, or the
/// cascade's middle branch, which needs the second network.
enum Stage1 {
    Decided(Decision),
    NeedsNet2,
}

fn score_stage1(y1: &ScoreVector, thresholds: &Thresholds) -> Stage1 {
    let mut needs_net2 = false;
    let decision = score_cascade_lazy(y1, thresholds, || {
        needs_net2 = true;
        ScoreVector::new([1.0; CLASS_COUNT]).unwrap()
    });
    if needs_net2 {
        Stage1::NeedsNet2
    } else {
        Stage1::Decided(decision)
    }
}

fn distance_stage1(d1: &DistanceVector, thresholds: &Thresholds) -> Stage1 {
    let mut needs_net2 = false;
    let decision = distance_cascade_lazy(d1, thresholds, || {
        needs_net2 = true;
        DistanceVector::new([0.0; CLASS_COUNT])
    });
    if needs_net2 {
        Stage1::NeedsNet2
    } else {
        Stage1::Decided(decision)
    }
}

impl Pipeline {
    /// Classify one input. The second network runs only when the cascade's
    /// middle branch is reached.
    pub fn classify(&self, x: &ByteVector) -> Result<Decision, NeuralError> {
        let y1 = self.net1.scores(x)?;
        match self.method {
            Method::Score => match score_stage1(&y1, &self.thresholds) {
                Stage1::Decided(d) => Ok(d),
                Stage1::NeedsNet2 => {
                    let y2 = self.net2.scores(x)?;
                    Ok(score_cascade(&y1, &y2, &self.thresholds))
                }
            },
            Method::Distance => {
                let centers = ClassCenters::default();
                let d1 = center_distances(&y1, &centers);
                match distance_stage1(&d1, &self.thresholds) {
                    Stage1::Decided(d) => Ok(d),
                    Stage1::NeedsNet2 => {
                        let y2 = self.net2.scores(x)?;
                        let d2 = center_distances(&y2, &centers);
                        Ok(distance_cascade(&d1, &d2, &self.thresholds))
                    }
                }
            }
        }
    }

    /// Classify a batch. Net1 scores are computed for every row; net2 runs
    /// once over only the rows that reach the middle branch.
    pub fn classify_batch(&self, inputs: ArrayView2<f64>) -> Result<Vec<Decision>, NeuralError> {
        let scored = self.score_batch(inputs)?;
        Ok(scored.decisions)
    }

    /// Batch classification that also returns both networks' score
    /// matrices, for callers that reuse them across thresholds.
    pub(crate) fn score_batch(&self, inputs: ArrayView2<f64>) -> Result<ScoredBatch, NeuralError> {
        let y1 = self.net1.scores_batch(inputs)?;
        let mut decisions: Vec<Option<Decision>> = Vec::with_capacity(inputs.nrows());
        let mut pending: Vec<usize> = Vec::new();
        let centers = ClassCenters::default();

        for (i, row) in y1.rows().into_iter().enumerate() {
            let y1_row = crate::neural::score_vector_from_row(row)?;
            let stage1 = match self.method {
                Method::Score => score_stage1(&y1_row, &self.thresholds),
                Method::Distance => {
                    distance_stage1(&center_distances(&y1_row, &centers), &self.thresholds)
                }
            };
            match stage1 {
                Stage1::Decided(d) => decisions.push(Some(d)),
                Stage1::NeedsNet2 => {
                    pending.push(i);
                    decisions.push(None);
                }
            }
        }

        let mut y2 = None;
        if !pending.is_empty() {
            let mut sub = Array2::zeros((pending.len(), inputs.ncols()));
            for (mut row, &i) in sub.rows_mut().into_iter().zip(&pending) {
                row.assign(&inputs.row(i));
            }
            let y2_rows = self.net2.scores_batch(sub.view())?;
            for (k, &i) in pending.iter().enumerate() {
                let y1_row = crate::neural::score_vector_from_row(y1.row(i))?;
                let y2_row = crate::neural::score_vector_from_row(y2_rows.row(k))?;
                decisions[i] = Some(match self.method {
                    Method::Score => score_cascade(&y1_row, &y2_row, &self.thresholds),
                    Method::Distance => {
                        let d1 = center_distances(&y1_row, &centers);
                        let d2 = center_distances(&y2_row, &centers);
                        distance_cascade(&d1, &d2, &self.thresholds)
                    }
                });
            }
            y2 = Some((pending, y2_rows));
        }

        Ok(ScoredBatch {
            y1,
            y2_middle: y2,
            decisions: decisions
                .into_iter()
                .map(|d| d.expect("every middle-branch row was resolved"))
                .collect(),
        })
    }

    /// Write both models plus the descriptor.
    pub fn save(
        &self,
        descriptor_path: &Path,
        net1_path: &Path,
        net2_path: &Path,
    ) -> Result<(), PipelineError> {
        for (params, path) in [(&self.net1, net1_path), (&self.net2, net2_path)] {
            write_model_file(params, path).map_err(|source| PipelineError::Model {
                path: path.to_path_buf(),
                source,
            })?;
        }
        let base = descriptor_path.parent().unwrap_or_else(|| Path::new("."));
        let relative = |p: &Path| {
            p.strip_prefix(base)
                .map(Path::to_path_buf)
                .unwrap_or_else(|_| p.to_path_buf())
        };
        PipelineDescriptor {
            method: self.method,
            net1_path: relative(net1_path),
            net2_path: relative(net2_path),
            thresholds: self.thresholds,
        }
        .write_file(descriptor_path)
    }
}

pub(crate) struct ScoredBatch {
    pub y1: Array2<f64>,
    /// Row indices that reached the middle branch, with net2's scores for
    /// exactly those rows.
    pub y2_middle: Option<(Vec<usize>, Array2<f64>)>,
    pub decisions: Vec<Decision>,
}

/// Run the full two-phase rule chain on one input.
pub fn classify_flow(x: &ByteVector, pipeline: &Pipeline) -> Result<Decision, NeuralError> {
    pipeline.classify(x)
}

/// Result of training a two-network pair: the assembled pipeline, both loss
/// curves, and the shared held-out split.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub pipeline: Pipeline,
    pub net1_curve: Vec<EpochLoss>,
    pub net2_curve: Vec<EpochLoss>,
    /// Indices into the input dataset of the held-out 20% (identical for
    /// both networks, which share the dataset and seed).
    pub test_indices: Vec<usize>,
}

/// Train the two-phase pair for one method: the first network on all six
/// labels (VPN handled by the method's loss), the second on the five
/// application classes only. The loss follows the method — squared error
/// for score, margin-distance for distance — and `cfg.loss_kind` is
/// overridden accordingly.
pub fn train_pipeline(
    dataset: &[LabeledSample],
    method: Method,
    network: &NetworkConfig,
    cfg: &TrainConfig,
    thresholds: Thresholds,
) -> Result<TrainedPipeline, TrainError> {
    let mut cfg = *cfg;
    cfg.loss_kind = match method {
        Method::Score => LossKind::Mse,
        Method::Distance => LossKind::Margin,
    };
    let net1 = train(dataset, network, &cfg, LabelSet::all())?;
    let net2 = train(dataset, network, &cfg, LabelSet::non_vpn())?;
    debug_assert_eq!(net1.test_indices, net2.test_indices);
    Ok(TrainedPipeline {
        pipeline: Pipeline {
            method,
            net1: net1.params,
            net2: net2.params,
            thresholds,
        },
        net1_curve: net1.curve,
        net2_curve: net2.curve,
        test_indices: net1.test_indices,
    })
}
