//! Scalar activation functions and their derivatives.

/// Variance of the Gaussian output activation, fixed at 1.
pub const GAUSSIAN_SIGMA_SQ: f64 = 1.0;

/// Center of the Gaussian output activation, fixed at 0.
pub const GAUSSIAN_CENTER: f64 = 0.0;

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Subgradient convention: relu'(0) = 0.
#[inline]
pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Output nonlinearity: exp(-(z - center)^2 / (2 sigma^2)), which with the
/// fixed center 0 and sigma^2 1 is exp(-z^2 / 2). Range (0, 1], maximal
/// exactly at z = 0.
#[inline]
pub fn gaussian(z: f64) -> f64 {
    let d = z - GAUSSIAN_CENTER;
    (-d * d / (2.0 * GAUSSIAN_SIGMA_SQ)).exp()
}

/// d/dz gaussian(z) = -(z - center)/sigma^2 * gaussian(z).
#[inline]
pub fn gaussian_prime(z: f64, y: f64) -> f64 {
    -(z - GAUSSIAN_CENTER) / GAUSSIAN_SIGMA_SQ * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_subgradient() {
        assert_eq!(relu(-2.0), 0.0);
        assert_eq!(relu(3.5), 3.5);
        assert_eq!(relu_prime(0.0), 0.0);
        assert_eq!(relu_prime(1e-9), 1.0);
    }

    #[test]
    fn gaussian_range_and_peak() {
        assert_eq!(gaussian(0.0), 1.0);
        assert!((gaussian(1.0) - (-0.5f64).exp()).abs() < 1e-15);
        for i in -50..=50 {
            let z = f64::from(i) * 0.2;
            let y = gaussian(z);
            assert!(y > 0.0 && y <= 1.0);
            assert!(y <= gaussian(0.0));
        }
    }

    #[test]
    fn gaussian_derivative_matches_finite_difference() {
        let eps = 1e-6;
        for i in -20..=20 {
            let z = f64::from(i) * 0.3;
            let numeric = (gaussian(z + eps) - gaussian(z - eps)) / (2.0 * eps);
            let analytic = gaussian_prime(z, gaussian(z));
            assert!((numeric - analytic).abs() < 1e-8, "z={z}");
        }
    }

    #[test]
    fn sigmoid_midpoint() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }
}
