//! Standard normal tail `Q(z) = P(Z > z)` and its inverse.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `Q(z) = erfc(z / sqrt 2) / 2`.
pub fn gaussian_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Q^{-1}(eps)`: the `z` with `Q(z) = eps`.
pub fn gaussian_quantile(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile needs 0 < eps < 1, got {eps}"
        )));
    }
    if eps == 0.5 {
        return Ok(0.0);
    }
    let mut z = SQRT_2 * erfc_inv(2.0 * eps);
    // Halley steps on Q(z) - eps; f' = -phi(z), f'' = z phi(z).
    for _ in 0..3 {
        let phi = density(z);
        if phi == 0.0 {
            break;
        }
        let f = gaussian_tail(z) - eps;
        let newton = f / phi;
        let step = newton / (1.0 + 0.5 * z * newton);
        z += step;
        if step.abs() <= 1e-16 * z.abs().max(1.0) {
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(gaussian_tail(0.0), 0.5);
        assert_eq!(gaussian_quantile(0.5).unwrap(), 0.0);
        assert!((gaussian_quantile(0.1).unwrap() - 1.2815516).abs() < 1e-7);
        assert!(gaussian_quantile(0.0).is_err());
        assert!(gaussian_quantile(1.0).is_err());
        assert!(gaussian_quantile(f64::NAN).is_err());
    }

    #[test]
    fn reflection() {
        for z in [0.1, 0.7, 1.3, 2.9, 5.5] {
            assert!((gaussian_tail(-z) - (1.0 - gaussian_tail(z))).abs() < 1e-15);
        }
    }
}
