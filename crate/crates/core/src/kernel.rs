//! Squared-exponential kernel, its derivative cross-covariances, and the
//! joint value/derivative covariance matrix.
//!
//! All functions here are pure and operate on whatever coordinates they are
//! given. Models rescale inputs to the unit cube before calling in, so a
//! single isotropic length scale is meaningful across mixed physical units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};

/// Diagonal jitter relative to the output variance.
pub const JITTER_SCALE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub output_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl KernelHyper {
    pub fn new(output_variance: f64, length_scale: f64, noise_variance: f64) -> Result<Self> {
        let h = Self {
            output_variance,
            length_scale,
            noise_variance,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.output_variance > 0.0 && self.output_variance.is_finite()) {
            return input_err(format!("output variance must be > 0, got {}", self.output_variance));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return input_err(format!("length scale must be > 0, got {}", self.length_scale));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return input_err(format!("noise variance must be >= 0, got {}", self.noise_variance));
        }
        Ok(())
    }

    pub fn jitter(&self) -> f64 {
        JITTER_SCALE * self.output_variance
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return input_err(format!("dimension mismatch: {} vs {}", a.len(), b.len()));
    }
    Ok(())
}

fn check_index(d: usize, dim: usize) -> Result<()> {
    if d >= dim {
        return input_err(format!("dimension index {d} out of range for dimension {dim}"));
    }
    Ok(())
}

// Unchecked variants used on hot paths where dimensions are already known to agree.

#[inline]
pub(crate) fn k_value(a: &[f64], b: &[f64], h: &KernelHyper) -> f64 {
    let l2 = h.length_scale * h.length_scale;
    h.output_variance * (-sq_dist(a, b) / (2.0 * l2)).exp()
}

#[inline]
pub(crate) fn k_dvalue(a: &[f64], b: &[f64], d: usize, h: &KernelHyper) -> f64 {
    let l2 = h.length_scale * h.length_scale;
    k_value(a, b, h) * (a[d] - b[d]) / l2
}

#[inline]
pub(crate) fn k_dd(a: &[f64], b: &[f64], d: usize, e: usize, h: &KernelHyper) -> f64 {
    let l2 = h.length_scale * h.length_scale;
    let delta = if d == e { 1.0 } else { 0.0 };
    k_value(a, b, h) * (delta / l2 - (a[d] - b[d]) * (a[e] - b[e]) / (l2 * l2))
}

/// `ε·exp(−‖a−b‖² / 2l²)`.
pub fn se_kernel(a: &[f64], b: &[f64], h: &KernelHyper) -> Result<f64> {
    check_dims(a, b)?;
    Ok(k_value(a, b, h))
}

/// Covariance between the value `f(a)` and the partial derivative
/// `∂f(b)/∂b_d`.
pub fn se_kernel_dvalue(a: &[f64], b: &[f64], d: usize, h: &KernelHyper) -> Result<f64> {
    check_dims(a, b)?;
    check_index(d, a.len())?;
    Ok(k_dvalue(a, b, d, h))
}

/// Covariance between `∂f(a)/∂a_d` and `∂f(b)/∂b_e`.
pub fn se_kernel_dd(a: &[f64], b: &[f64], d: usize, e: usize, h: &KernelHyper) -> Result<f64> {
    check_dims(a, b)?;
    check_index(d, a.len())?;
    check_index(e, a.len())?;
    Ok(k_dd(a, b, d, e, h))
}

/// A location at which a partial derivative along `dim` enters the joint prior.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeSite<'a> {
    pub x: &'a [f64],
    pub dim: usize,
}

/// Block covariance `[[K_XX, K_XS], [K_SX, K_SS]]` over function values at
/// `values` followed by partial derivatives at `sites`. No jitter or noise is
/// added.
pub fn build_joint_covariance(
    values: &[Vec<f64>],
    sites: &[DerivativeSite<'_>],
    h: &KernelHyper,
) -> Result<DMatrix<f64>> {
    let dim = values
        .first()
        .map(|v| v.len())
        .or_else(|| sites.first().map(|s| s.x.len()))
        .unwrap_or(0);
    for v in values {
        if v.len() != dim {
            return input_err("value locations have inconsistent dimensions");
        }
    }
    for s in sites {
        if s.x.len() != dim {
            return input_err("derivative sites have inconsistent dimensions");
        }
        check_index(s.dim, dim)?;
    }

    let t = values.len();
    let n = t + sites.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..t {
        for j in 0..=i {
            let v = k_value(&values[i], &values[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for (p, s) in sites.iter().enumerate() {
        for i in 0..t {
            let v = k_dvalue(&values[i], s.x, s.dim, h);
            k[(i, t + p)] = v;
            k[(t + p, i)] = v;
        }
        for (q, r) in sites.iter().enumerate().take(p + 1) {
            let v = k_dd(s.x, r.x, s.dim, r.dim, h);
            k[(t + p, t + q)] = v;
            k[(t + q, t + p)] = v;
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("joint covariance has non-finite entries".into()));
    }
    Ok(k)
}
