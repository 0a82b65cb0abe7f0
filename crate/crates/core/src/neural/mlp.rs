//! Three-layer perceptron: Linear+ReLU 784→1000, Linear+ReLU 1000→100,
//! Linear+Gaussian 100→5, with analytic batch gradients.
//!
//! Batches are row-major: an input batch is (B, in) and every weight matrix
//! is stored (in, out), so a layer is one `X · W` product.

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::Rng;

use super::activations::{gaussian, gaussian_prime};
use super::{ensure_finite, xavier_uniform, GradientSet, NeuralError};
use crate::types::{ByteVector, ScoreVector, CLASS_COUNT, FEATURE_LEN};

/// Default layer widths (input 784, hidden 1000 and 100, output 5).
pub const MLP_HIDDEN1: usize = 1000;
pub const MLP_HIDDEN2: usize = 100;

/// MLP weights. No biases: each layer is a pure matrix product followed by
/// its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    /// First layer, 784×1000.
    pub w: Array2<f64>,
    /// Second layer, 1000×100.
    pub u: Array2<f64>,
    /// Output layer, 100×5.
    pub v: Array2<f64>,
}

impl MlpParameters {
    /// Seeded Xavier-uniform initialization with the standard widths.
    pub fn seeded<R: Rng>(rng: &mut R) -> Self {
        Self::seeded_with_dims(FEATURE_LEN, MLP_HIDDEN1, MLP_HIDDEN2, CLASS_COUNT, rng)
    }

    /// Arbitrary widths, used by reduced-dimension gradient checks.
    pub fn seeded_with_dims<R: Rng>(
        input: usize,
        hidden1: usize,
        hidden2: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        MlpParameters {
            w: xavier_uniform(input, hidden1, rng),
            u: xavier_uniform(hidden1, hidden2, rng),
            v: xavier_uniform(hidden2, output, rng),
        }
    }

    pub fn zeros(input: usize, hidden1: usize, hidden2: usize, output: usize) -> Self {
        MlpParameters {
            w: Array2::zeros((input, hidden1)),
            u: Array2::zeros((hidden1, hidden2)),
            v: Array2::zeros((hidden2, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn array_names() -> [&'static str; 3] {
        ["w", "u", "v"]
    }

    pub fn arrays(&self) -> [&Array2<f64>; 3] {
        [&self.w, &self.u, &self.v]
    }

    pub fn arrays_mut(&mut self) -> [&mut Array2<f64>; 3] {
        [&mut self.w, &mut self.u, &mut self.v]
    }

    /// Internal consistency: layer widths chain and all entries are finite.
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.w.ncols() != self.u.nrows() || self.u.ncols() != self.v.nrows() {
            return Err(NeuralError::Shape {
                context: format!(
                    "mlp layer widths do not chain: w {}x{}, u {}x{}, v {}x{}",
                    self.w.nrows(),
                    self.w.ncols(),
                    self.u.nrows(),
                    self.u.ncols(),
                    self.v.nrows(),
                    self.v.ncols()
                ),
            });
        }
        for (name, a) in Self::array_names().iter().zip(self.arrays()) {
            ensure_finite(name, a)?;
        }
        Ok(())
    }
}

/// All intermediate values of one forward pass over a batch, kept for the
/// backward pass. Rows are samples.
#[derive(Debug, Clone)]
pub struct MlpBatchTrace {
    pub q: Array2<f64>,
    pub s: Array2<f64>,
    pub p: Array2<f64>,
    pub r: Array2<f64>,
    pub z: Array2<f64>,
    pub y: Array2<f64>,
}

/// Single-sample trace: q = Wx, s = ReLU(q), p = Us, r = ReLU(p), z = Vr,
/// y_k = exp(-z_k^2 / 2).
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub q: Array1<f64>,
    pub s: Array1<f64>,
    pub p: Array1<f64>,
    pub r: Array1<f64>,
    pub z: Array1<f64>,
    pub y: ScoreVector,
}

/// Batch forward pass. Errors if the input width does not match the first
/// layer or any intermediate goes non-finite (named by layer).
pub fn mlp_forward_trace(
    params: &MlpParameters,
    inputs: ArrayView2<f64>,
) -> Result<MlpBatchTrace, NeuralError> {
    if inputs.ncols() != params.input_dim() {
        return Err(NeuralError::Shape {
            context: format!(
                "input width {} does not match first layer {}",
                inputs.ncols(),
                params.input_dim()
            ),
        });
    }
    let q = inputs.dot(&params.w);
    ensure_finite("q", &q)?;
    let s = q.mapv(|x| x.max(0.0));
    let p = s.dot(&params.u);
    ensure_finite("p", &p)?;
    let r = p.mapv(|x| x.max(0.0));
    let z = r.dot(&params.v);
    ensure_finite("z", &z)?;
    let y = z.mapv(gaussian);
    Ok(MlpBatchTrace { q, s, p, r, z, y })
}

/// Forward pass for one 784-byte input through a standard-shape network.
pub fn mlp_forward(params: &MlpParameters, x: &ByteVector) -> Result<MlpTrace, NeuralError> {
    if params.input_dim() != FEATURE_LEN || params.output_dim() != CLASS_COUNT {
        return Err(NeuralError::Shape {
            context: format!(
                "expected a {FEATURE_LEN}-input {CLASS_COUNT}-output network, got {}-input {}-output",
                params.input_dim(),
                params.output_dim()
            ),
        });
    }
    let input = ArrayView2::from_shape((1, FEATURE_LEN), x.values().as_slice()).unwrap();
    let trace = mlp_forward_trace(params, input)?;
    let mut scores = [0.0; CLASS_COUNT];
    scores.copy_from_slice(trace.y.row(0).as_slice().unwrap());
    Ok(MlpTrace {
        q: trace.q.row(0).to_owned(),
        s: trace.s.row(0).to_owned(),
        p: trace.p.row(0).to_owned(),
        r: trace.r.row(0).to_owned(),
        z: trace.z.row(0).to_owned(),
        y: ScoreVector::new(scores).expect("gaussian output is always in [0, 1]"),
    })
}

/// Backpropagate a loss gradient dL/dY through the trace. Returns gradients
/// in [w, u, v] order.
pub fn mlp_backward(
    params: &MlpParameters,
    inputs: ArrayView2<f64>,
    trace: &MlpBatchTrace,
    d_y: &Array2<f64>,
) -> Result<GradientSet, NeuralError> {
    // dL/dz = dL/dy * (-z * y)
    let mut d_z = d_y.clone();
    Zip::from(&mut d_z)
        .and(&trace.z)
        .and(&trace.y)
        .for_each(|d, &z, &y| *d *= gaussian_prime(z, y));

    let d_v = trace.r.t().dot(&d_z);
    let mut d_r = d_z.dot(&params.v.t());
    Zip::from(&mut d_r).and(&trace.p).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });

    let d_u = trace.s.t().dot(&d_r);
    let mut d_s = d_r.dot(&params.u.t());
    Zip::from(&mut d_s).and(&trace.q).for_each(|d, &q| {
        if q <= 0.0 {
            *d = 0.0;
        }
    });

    let d_w = inputs.t().dot(&d_s);
    let grads = GradientSet::new(vec![d_w, d_u, d_v]);
    grads.ensure_finite()?;
    Ok(grads)
}

/// Batch-mean scores for inference: one row of five Gaussian outputs per
/// input row.
pub fn mlp_scores_batch(
    params: &MlpParameters,
    inputs: ArrayView2<f64>,
) -> Result<Array2<f64>, NeuralError> {
    Ok(mlp_forward_trace(params, inputs)?.y)
}
