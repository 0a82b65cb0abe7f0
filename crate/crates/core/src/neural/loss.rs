//! The two training losses: squared error on scores and the
//! margin-distance loss that pulls outputs toward the correct one-hot
//! center while pushing the others past the margin.

use ndarray::Array2;

use super::NeuralError;
use crate::decision::{ClassCenters, DistanceVector};
use crate::types::{Label, ScoreVector, CLASS_COUNT};

/// Distances below this are treated as zero when dividing by them in the
/// margin-loss gradient (the distance function is not differentiable at its
/// center; the subgradient 0 is used there).
const DISTANCE_GRADIENT_FLOOR: f64 = 1e-12;

/// Which loss a training run minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Margin,
}

/// Desired network output for a sample: one-hot for the five application
/// classes, all-zero for VPN (which has no output neuron and should score
/// low everywhere).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVector([f64; CLASS_COUNT]);

impl TargetVector {
    pub fn for_label(label: Label) -> Self {
        let mut t = [0.0; CLASS_COUNT];
        if !label.is_vpn() {
            t[label.index()] = 1.0;
        }
        TargetVector(t)
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }
}

/// Sum of squared differences between the model output and its target.
pub fn mse_loss(y: &ScoreVector, target: &TargetVector) -> f64 {
    y.values()
        .iter()
        .zip(target.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Margin-distance loss for one sample.
///
/// For an application class: the distance to the correct center plus a
/// hinge `max(0, eta - d_j)` for every other center. For VPN (no correct
/// class): the hinge over all five centers, pushing every distance past the
/// margin.
pub fn margin_distance_loss(
    distances: &DistanceVector,
    label: Label,
    eta: f64,
) -> Result<f64, NeuralError> {
    if !(eta > 0.0) {
        return Err(NeuralError::Config {
            context: format!("margin eta must be positive, got {eta}"),
        });
    }
    let d = distances.values();
    let mut loss = 0.0;
    for (j, &dj) in d.iter().enumerate() {
        if !label.is_vpn() && j == label.index() {
            loss += dj;
        } else {
            loss += (eta - dj).max(0.0);
        }
    }
    Ok(loss)
}

/// Mean batch loss and its gradient with respect to the network outputs.
///
/// `outputs` is (B, 5); one label per row. The returned gradient has the
/// same shape and already carries the 1/B factor of the mean.
pub fn batch_loss_and_grad(
    outputs: &Array2<f64>,
    labels: &[Label],
    kind: LossKind,
    margin_eta: f64,
) -> Result<(f64, Array2<f64>), NeuralError> {
    let n = outputs.nrows();
    if n != labels.len() {
        return Err(NeuralError::Shape {
            context: format!("{n} output rows for {} labels", labels.len()),
        });
    }
    if outputs.ncols() != CLASS_COUNT {
        return Err(NeuralError::Shape {
            context: format!("expected {CLASS_COUNT} outputs per row, got {}", outputs.ncols()),
        });
    }
    if n == 0 {
        return Err(NeuralError::Shape {
            context: "empty batch".to_string(),
        });
    }

    match kind {
        LossKind::Mse => Ok(mse_batch(outputs, labels)),
        LossKind::Margin => margin_batch(outputs, labels, margin_eta),
    }
}

fn mse_batch(outputs: &Array2<f64>, labels: &[Label]) -> (f64, Array2<f64>) {
    let n = outputs.nrows() as f64;
    let mut grad = Array2::zeros(outputs.raw_dim());
    let mut total = 0.0;
    for ((row, label), mut grad_row) in outputs
        .rows()
        .into_iter()
        .zip(labels)
        .zip(grad.rows_mut())
    {
        let target = TargetVector::for_label(*label);
        for (k, (&y, &t)) in row.iter().zip(target.values()).enumerate() {
            let diff = y - t;
            total += diff * diff;
            grad_row[k] = 2.0 * diff / n;
        }
    }
    (total / n, grad)
}

fn margin_batch(
    outputs: &Array2<f64>,
    labels: &[Label],
    eta: f64,
) -> Result<(f64, Array2<f64>), NeuralError> {
    if !(eta > 0.0) {
        return Err(NeuralError::Config {
            context: format!("margin eta must be positive, got {eta}"),
        });
    }
    let centers = ClassCenters::default();
    let n = outputs.nrows() as f64;
    let mut grad = Array2::zeros(outputs.raw_dim());
    let mut total = 0.0;

    for ((row, label), mut grad_row) in outputs
        .rows()
        .into_iter()
        .zip(labels)
        .zip(grad.rows_mut())
    {
        let mut y = [0.0; CLASS_COUNT];
        for (slot, &v) in y.iter_mut().zip(row.iter()) {
            *slot = v;
        }
        let mut d = [0.0; CLASS_COUNT];
        for (j, slot) in d.iter_mut().enumerate() {
            *slot = crate::decision::euclidean(&y, centers.center(j));
        }
        total += margin_distance_loss(&DistanceVector::new(d), *label, eta)?;

        // dL/dd_j is +1 for the correct-class term and -1 for each active
        // hinge (d_j < eta; the subgradient at d_j == eta is 0). Each feeds
        // back through dd_j/dy = (y - c_j) / d_j.
        for (j, &dj) in d.iter().enumerate() {
            let coefficient = if !label.is_vpn() && j == label.index() {
                1.0
            } else if dj < eta {
                -1.0
            } else {
                continue;
            };
            if dj < DISTANCE_GRADIENT_FLOOR {
                continue;
            }
            let center = centers.center(j);
            for k in 0..CLASS_COUNT {
                grad_row[k] += coefficient * (y[k] - center[k]) / dj / n;
            }
        }
    }
    Ok((total / n, grad))
}
