//! Adam with decoupled weight decay. Moment estimates live here, one pair
//! of arrays per parameter array.

use ndarray::Array2;

use super::GradientSet;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    weight_decay: f64,
    step_count: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    /// Moment arrays are initialized to zero, shaped after the parameter
    /// arrays they will update.
    pub fn new(learning_rate: f64, weight_decay: f64, parameters: &[&Array2<f64>]) -> Self {
        Adam {
            learning_rate,
            weight_decay,
            step_count: 0,
            m: parameters.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            v: parameters.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
        }
    }

    /// One update over all parameter arrays. Weight decay is decoupled:
    /// parameters shrink by `lr * wd * theta` independently of the gradient
    /// moments.
    pub fn step(&mut self, parameters: Vec<&mut Array2<f64>>, gradients: &GradientSet) {
        assert_eq!(parameters.len(), self.m.len());
        assert_eq!(gradients.arrays().len(), self.m.len());
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        let lr = self.learning_rate;
        let wd = self.weight_decay;

        for ((theta, grad), (m, v)) in parameters
            .into_iter()
            .zip(gradients.arrays())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut *theta)
                .and(grad)
                .and(m)
                .and(v)
                .for_each(|th, &g, m, v| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *th -= lr * wd * *th;
                    *th -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_against_gradient_by_learning_rate() {
        // With bias correction, the first Adam step is lr * g / (|g| + eps).
        let mut theta = array![[1.0, -2.0]];
        let grads = GradientSet::new(vec![array![[0.5, -0.25]]]);
        let mut adam = Adam::new(0.1, 0.0, &[&theta]);
        adam.step(vec![&mut theta], &grads);
        assert!((theta[(0, 0)] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((theta[(0, 1)] - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn weight_decay_shrinks_without_gradient() {
        let mut theta = array![[2.0]];
        let grads = GradientSet::new(vec![array![[0.0]]]);
        let mut adam = Adam::new(0.01, 0.5, &[&theta]);
        adam.step(vec![&mut theta], &grads);
        // Zero gradient: only the decay term applies.
        assert!((theta[(0, 0)] - 2.0 * (1.0 - 0.01 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn repeated_steps_converge_on_quadratic() {
        // Minimize (x - 3)^2 by feeding its gradient.
        let mut theta = array![[0.0]];
        let mut adam = Adam::new(0.05, 0.0, &[&theta]);
        for _ in 0..2000 {
            let g = 2.0 * (theta[(0, 0)] - 3.0);
            adam.step(vec![&mut theta], &GradientSet::new(vec![array![[g]]]));
        }
        assert!((theta[(0, 0)] - 3.0).abs() < 1e-3);
    }
}
