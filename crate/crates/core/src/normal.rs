//! Standard normal helpers that stay finite deep in the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

const TAIL: f64 = -25.0;

/// `ln Φ(z)`.
pub fn log_cdf(z: f64) -> f64 {
    if z > TAIL {
        cdf(z).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - 0.5 * (2.0 * PI).ln() - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Inverse Mills ratio `φ(z)/Φ(z)`.
pub fn pdf_over_cdf(z: f64) -> f64 {
    if z > TAIL {
        pdf(z) / cdf(z)
    } else {
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    }
}
