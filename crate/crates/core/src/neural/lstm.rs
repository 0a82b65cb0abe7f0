//! LSTM classifier: the 784-byte input is reshaped into a sequence of
//! fixed-width steps, run through a single LSTM layer, and the final hidden
//! state is fed through the same Linear+ReLU / Linear+Gaussian head as the
//! MLP's last two layers. Backpropagation through time is unrolled over the
//! cached per-step gate activations.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::activations::{gaussian, gaussian_prime, sigmoid};
use super::{ensure_finite, xavier_uniform, xavier_uniform_shaped, GradientSet, NeuralError};
use crate::types::{ByteVector, ScoreVector, CLASS_COUNT, FEATURE_LEN};

/// Default hidden width.
pub const LSTM_HIDDEN: usize = 300;

/// Default bytes per time step: 784 = 28 steps of width 28.
pub const LSTM_STEP_WIDTH: usize = 28;

/// Default width of the head's ReLU layer.
pub const LSTM_HEAD_HIDDEN: usize = 100;

/// Weights of one LSTM layer plus the classification head. Gate matrices
/// follow the convention `hidden × input` for `w_*` and `hidden × hidden`
/// for `u_*`; biases are stored as one-row matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParameters {
    pub w_f: Array2<f64>,
    pub u_f: Array2<f64>,
    pub b_f: Array2<f64>,
    pub w_i: Array2<f64>,
    pub u_i: Array2<f64>,
    pub b_i: Array2<f64>,
    pub w_o: Array2<f64>,
    pub u_o: Array2<f64>,
    pub b_o: Array2<f64>,
    pub w_c: Array2<f64>,
    pub u_c: Array2<f64>,
    pub b_c: Array2<f64>,
    pub head_u: Array2<f64>,
    pub head_v: Array2<f64>,
    step_width: usize,
}

impl LstmParameters {
    /// Seeded Xavier-uniform initialization with the standard widths
    /// (hidden 300, 28 steps of 28 bytes, head 100, 5 outputs).
    pub fn seeded<R: Rng>(rng: &mut R) -> Self {
        Self::seeded_with_dims(LSTM_STEP_WIDTH, LSTM_HIDDEN, LSTM_HEAD_HIDDEN, CLASS_COUNT, rng)
    }

    pub fn seeded_with_dims<R: Rng>(
        step_width: usize,
        hidden: usize,
        head_hidden: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let gate_w = |rng: &mut R| xavier_uniform_shaped(hidden, step_width, step_width, hidden, rng);
        let gate_u = |rng: &mut R| xavier_uniform_shaped(hidden, hidden, hidden, hidden, rng);
        let bias = || Array2::zeros((1, hidden));
        LstmParameters {
            w_f: gate_w(rng),
            u_f: gate_u(rng),
            b_f: bias(),
            w_i: gate_w(rng),
            u_i: gate_u(rng),
            b_i: bias(),
            w_o: gate_w(rng),
            u_o: gate_u(rng),
            b_o: bias(),
            w_c: gate_w(rng),
            u_c: gate_u(rng),
            b_c: bias(),
            head_u: xavier_uniform(hidden, head_hidden, rng),
            head_v: xavier_uniform(head_hidden, output, rng),
            step_width,
        }
    }

    pub fn zeros(step_width: usize, hidden: usize, head_hidden: usize, output: usize) -> Self {
        LstmParameters {
            w_f: Array2::zeros((hidden, step_width)),
            u_f: Array2::zeros((hidden, hidden)),
            b_f: Array2::zeros((1, hidden)),
            w_i: Array2::zeros((hidden, step_width)),
            u_i: Array2::zeros((hidden, hidden)),
            b_i: Array2::zeros((1, hidden)),
            w_o: Array2::zeros((hidden, step_width)),
            u_o: Array2::zeros((hidden, hidden)),
            b_o: Array2::zeros((1, hidden)),
            w_c: Array2::zeros((hidden, step_width)),
            u_c: Array2::zeros((hidden, hidden)),
            b_c: Array2::zeros((1, hidden)),
            head_u: Array2::zeros((hidden, head_hidden)),
            head_v: Array2::zeros((head_hidden, output)),
            step_width,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.nrows()
    }

    pub fn step_width(&self) -> usize {
        self.step_width
    }

    pub fn output_dim(&self) -> usize {
        self.head_v.ncols()
    }

    pub fn array_names() -> [&'static str; 14] {
        [
            "w_f", "u_f", "b_f", "w_i", "u_i", "b_i", "w_o", "u_o", "b_o", "w_c", "u_c", "b_c",
            "head_u", "head_v",
        ]
    }

    pub fn arrays(&self) -> [&Array2<f64>; 14] {
        [
            &self.w_f, &self.u_f, &self.b_f, &self.w_i, &self.u_i, &self.b_i, &self.w_o,
            &self.u_o, &self.b_o, &self.w_c, &self.u_c, &self.b_c, &self.head_u, &self.head_v,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut Array2<f64>; 14] {
        [
            &mut self.w_f, &mut self.u_f, &mut self.b_f, &mut self.w_i, &mut self.u_i,
            &mut self.b_i, &mut self.w_o, &mut self.u_o, &mut self.b_o, &mut self.w_c,
            &mut self.u_c, &mut self.b_c, &mut self.head_u, &mut self.head_v,
        ]
    }

    /// Gate and head shapes congruent, step width matching, everything
    /// finite.
    pub fn validate(&self) -> Result<(), NeuralError> {
        let hidden = self.hidden();
        let gates = [
            ("f", &self.w_f, &self.u_f, &self.b_f),
            ("i", &self.w_i, &self.u_i, &self.b_i),
            ("o", &self.w_o, &self.u_o, &self.b_o),
            ("c", &self.w_c, &self.u_c, &self.b_c),
        ];
        for (gate, w, u, b) in gates {
            if w.dim() != (hidden, self.step_width)
                || u.dim() != (hidden, hidden)
                || b.dim() != (1, hidden)
            {
                return Err(NeuralError::Shape {
                    context: format!("gate {gate} arrays inconsistent with hidden {hidden} and step width {}", self.step_width),
                });
            }
        }
        if self.head_u.nrows() != hidden || self.head_v.nrows() != self.head_u.ncols() {
            return Err(NeuralError::Shape {
                context: "head layer widths do not chain".to_string(),
            });
        }
        for (name, a) in Self::array_names().iter().zip(self.arrays()) {
            ensure_finite(name, a)?;
        }
        Ok(())
    }
}

/// Cell and hidden state after consuming a sequence; both start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Array1<f64>,
    pub h: Array1<f64>,
}

/// Per-step activations cached for backpropagation through time.
#[derive(Debug, Clone)]
struct StepTrace {
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    f: Array2<f64>,
    i: Array2<f64>,
    o: Array2<f64>,
    g: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Full forward trace over a batch: step caches, final state, and the head
/// activations through the Gaussian output.
#[derive(Debug, Clone)]
pub struct LstmBatchTrace {
    steps: Vec<StepTrace>,
    pub final_h: Array2<f64>,
    pub final_c: Array2<f64>,
    pub head_p: Array2<f64>,
    pub head_r: Array2<f64>,
    pub z: Array2<f64>,
    pub y: Array2<f64>,
}

/// Batch forward pass. The input width must be a multiple of the step
/// width; each row is consumed as `width / step_width` consecutive steps.
pub fn lstm_forward_trace(
    params: &LstmParameters,
    inputs: ArrayView2<f64>,
) -> Result<LstmBatchTrace, NeuralError> {
    let sw = params.step_width;
    if sw == 0 || inputs.ncols() == 0 || inputs.ncols() % sw != 0 {
        return Err(NeuralError::Config {
            context: format!(
                "input width {} is not a positive multiple of step width {sw}",
                inputs.ncols()
            ),
        });
    }
    let batch = inputs.nrows();
    let hidden = params.hidden();
    let step_count = inputs.ncols() / sw;

    let mut h = Array2::zeros((batch, hidden));
    let mut c = Array2::zeros((batch, hidden));
    let mut steps = Vec::with_capacity(step_count);

    for t in 0..step_count {
        let x_t = inputs.slice(s![.., t * sw..(t + 1) * sw]);
        let f = gate(&x_t, &h, &params.w_f, &params.u_f, &params.b_f, sigmoid);
        let i = gate(&x_t, &h, &params.w_i, &params.u_i, &params.b_i, sigmoid);
        let o = gate(&x_t, &h, &params.w_o, &params.u_o, &params.b_o, sigmoid);
        let g = gate(&x_t, &h, &params.w_c, &params.u_c, &params.b_c, f64::tanh);

        let c_next = &f * &c + &i * &g;
        let tanh_c = c_next.mapv(f64::tanh);
        let h_next = &o * &tanh_c;

        steps.push(StepTrace {
            h_prev: h,
            c_prev: c,
            f,
            i,
            o,
            g,
            tanh_c,
        });
        h = h_next;
        c = c_next;
    }
    ensure_finite("lstm hidden state", &h)?;

    let head_p = h.dot(&params.head_u);
    ensure_finite("head p", &head_p)?;
    let head_r = head_p.mapv(|x| x.max(0.0));
    let z = head_r.dot(&params.head_v);
    ensure_finite("head z", &z)?;
    let y = z.mapv(gaussian);

    Ok(LstmBatchTrace {
        steps,
        final_h: h,
        final_c: c,
        head_p,
        head_r,
        z,
        y,
    })
}

fn gate(
    x_t: &ArrayView2<f64>,
    h_prev: &Array2<f64>,
    w: &Array2<f64>,
    u: &Array2<f64>,
    b: &Array2<f64>,
    activation: fn(f64) -> f64,
) -> Array2<f64> {
    let mut pre = x_t.dot(&w.t()) + h_prev.dot(&u.t());
    pre += b;
    pre.mapv_into(activation)
}

/// Forward pass for one 784-byte input through a standard-output network.
/// Returns the final LSTM state and the five class scores.
pub fn lstm_forward(
    params: &LstmParameters,
    x: &ByteVector,
) -> Result<(LstmState, ScoreVector), NeuralError> {
    if FEATURE_LEN % params.step_width != 0 {
        return Err(NeuralError::Config {
            context: format!(
                "step width {} does not divide the {FEATURE_LEN}-byte input",
                params.step_width
            ),
        });
    }
    if params.output_dim() != CLASS_COUNT {
        return Err(NeuralError::Shape {
            context: format!("expected {CLASS_COUNT} outputs, got {}", params.output_dim()),
        });
    }
    let input = ArrayView2::from_shape((1, FEATURE_LEN), x.values().as_slice()).unwrap();
    let trace = lstm_forward_trace(params, input)?;
    let state = LstmState {
        c: trace.final_c.row(0).to_owned(),
        h: trace.final_h.row(0).to_owned(),
    };
    let scores = super::score_vector_from_row(trace.y.row(0))?;
    Ok((state, scores))
}

/// Backpropagation through time. `d_y` is dLoss/dY for the batch; returns
/// gradients in canonical array order.
pub fn lstm_backward(
    params: &LstmParameters,
    inputs: ArrayView2<f64>,
    trace: &LstmBatchTrace,
    d_y: &Array2<f64>,
) -> Result<GradientSet, NeuralError> {
    let sw = params.step_width;

    // Head: Gaussian, then Linear, then ReLU, then Linear.
    let mut d_z = d_y.clone();
    Zip::from(&mut d_z)
        .and(&trace.z)
        .and(&trace.y)
        .for_each(|d, &z, &y| *d *= gaussian_prime(z, y));
    let d_head_v = trace.head_r.t().dot(&d_z);
    let mut d_r = d_z.dot(&params.head_v.t());
    Zip::from(&mut d_r).and(&trace.head_p).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    let d_head_u = trace.final_h.t().dot(&d_r);
    let mut d_h = d_r.dot(&params.head_u.t());
    let mut d_c: Array2<f64> = Array2::zeros(d_h.raw_dim());

    let mut d_w = [
        Array2::zeros(params.w_f.raw_dim()),
        Array2::zeros(params.w_i.raw_dim()),
        Array2::zeros(params.w_o.raw_dim()),
        Array2::zeros(params.w_c.raw_dim()),
    ];
    let mut d_u = [
        Array2::zeros(params.u_f.raw_dim()),
        Array2::zeros(params.u_i.raw_dim()),
        Array2::zeros(params.u_o.raw_dim()),
        Array2::zeros(params.u_c.raw_dim()),
    ];
    let mut d_b = [
        Array2::zeros(params.b_f.raw_dim()),
        Array2::zeros(params.b_i.raw_dim()),
        Array2::zeros(params.b_o.raw_dim()),
        Array2::zeros(params.b_c.raw_dim()),
    ];

    for (t, step) in trace.steps.iter().enumerate().rev() {
        let x_t = inputs.slice(s![.., t * sw..(t + 1) * sw]);

        // h_t = o ∘ tanh(c_t)
        let d_o = &d_h * &step.tanh_c;
        let mut d_c_total = d_c;
        Zip::from(&mut d_c_total)
            .and(&d_h)
            .and(&step.o)
            .and(&step.tanh_c)
            .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));

        // c_t = f ∘ c_{t-1} + i ∘ g
        let d_f = &d_c_total * &step.c_prev;
        let d_i = &d_c_total * &step.g;
        let d_g = &d_c_total * &step.i;

        let d_pre_f = &d_f * &step.f * &step.f.mapv(|v| 1.0 - v);
        let d_pre_i = &d_i * &step.i * &step.i.mapv(|v| 1.0 - v);
        let d_pre_o = &d_o * &step.o * &step.o.mapv(|v| 1.0 - v);
        let d_pre_g = &d_g * &step.g.mapv(|v| 1.0 - v * v);

        d_h = Array2::zeros(d_h.raw_dim());
        for (k, (d_pre, u)) in [
            (&d_pre_f, &params.u_f),
            (&d_pre_i, &params.u_i),
            (&d_pre_o, &params.u_o),
            (&d_pre_g, &params.u_c),
        ]
        .into_iter()
        .enumerate()
        {
            d_w[k] += &d_pre.t().dot(&x_t);
            d_u[k] += &d_pre.t().dot(&step.h_prev);
            d_b[k] += &d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
            d_h += &d_pre.dot(u);
        }
        d_c = &d_c_total * &step.f;
    }

    let [dwf, dwi, dwo, dwc] = d_w;
    let [duf, dui, duo, duc] = d_u;
    let [dbf, dbi, dbo, dbc] = d_b;
    let grads = GradientSet::new(vec![
        dwf, duf, dbf, dwi, dui, dbi, dwo, duo, dbo, dwc, duc, dbc, d_head_u, d_head_v,
    ]);
    grads.ensure_finite()?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_are_a_fixed_point() {
        // All gates sigmoid(0) = 0.5, tanh(0) = 0, so c and h stay zero and
        // the head produces unit scores.
        let params = LstmParameters::zeros(28, 5, 4, 5);
        let x = ByteVector::from_bytes(&[200u8; 100]);
        let (state, scores) = lstm_forward(&params, &x).unwrap();
        assert!(state.c.iter().all(|&v| v == 0.0));
        assert!(state.h.iter().all(|&v| v == 0.0));
        assert_eq!(scores.values(), &[1.0; 5]);
    }

    #[test]
    fn scalar_lstm_matches_hand_computation() {
        // Hidden 1, one step of width 1, all input weights 1, recurrent
        // weights and biases 0, x = 1:
        //   f = i = o = sigmoid(1), g = tanh(1)
        //   c1 = sigmoid(1) * tanh(1)
        //   h1 = sigmoid(1) * tanh(c1)
        let mut params = LstmParameters::zeros(1, 1, 1, 5);
        params.w_f[(0, 0)] = 1.0;
        params.w_i[(0, 0)] = 1.0;
        params.w_o[(0, 0)] = 1.0;
        params.w_c[(0, 0)] = 1.0;

        let input = array![[1.0]];
        let trace = lstm_forward_trace(&params, input.view()).unwrap();

        let sig1 = sigmoid(1.0);
        let c1 = sig1 * 1.0f64.tanh();
        let h1 = sig1 * c1.tanh();
        assert!((trace.final_c[(0, 0)] - c1).abs() < 1e-12);
        assert!((trace.final_h[(0, 0)] - h1).abs() < 1e-12);

        assert!((sig1 - 0.73106).abs() < 1e-5);
        assert!((c1 - 0.55677).abs() < 1e-5);
        assert!((h1 - 0.36961).abs() < 1e-5);
    }

    #[test]
    fn default_shapes_produce_expected_dimensions() {
        // 784 input -> 28 steps -> 300-wide hidden state -> 5 scores.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = LstmParameters::seeded(&mut rng);
        assert_eq!(params.hidden(), 300);
        assert_eq!(params.step_width(), 28);
        let x = ByteVector::from_bytes(&(0..=255u8).collect::<Vec<_>>());
        let (state, scores) = lstm_forward(&params, &x).unwrap();
        assert_eq!(state.h.len(), 300);
        assert_eq!(state.c.len(), 300);
        assert_eq!(scores.values().len(), 5);
    }

    #[test]
    fn initial_state_is_zero_and_scores_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = LstmParameters::seeded_with_dims(7, 9, 6, 5, &mut rng);
        let inputs = Array2::from_shape_fn((3, 21), |(r, c)| ((r * 31 + c) % 256) as f64 / 255.0);
        let trace = lstm_forward_trace(&params, inputs.view()).unwrap();
        assert_eq!(trace.steps.len(), 3);
        assert!(trace.steps[0].h_prev.iter().all(|&v| v == 0.0));
        assert!(trace.steps[0].c_prev.iter().all(|&v| v == 0.0));
        assert!(trace.y.iter().all(|&y| y > 0.0 && y <= 1.0));
    }

    #[test]
    fn indivisible_step_width_is_a_configuration_error() {
        let params = LstmParameters::zeros(5, 3, 2, 5);
        let inputs = Array2::zeros((1, 12));
        assert!(matches!(
            lstm_forward_trace(&params, inputs.view()),
            Err(NeuralError::Config { .. })
        ));
        let bad = LstmParameters::zeros(30, 3, 2, 5); // 784 % 30 != 0
        let x = ByteVector::from_bytes(&[1, 2, 3]);
        assert!(matches!(
            lstm_forward(&bad, &x),
            Err(NeuralError::Config { .. })
        ));
    }
}
