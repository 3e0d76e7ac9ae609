//! Search boxes and the unit-cube rescaling applied before every kernel
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Per-dimension closed intervals `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return input_err("bounds must have at least one dimension");
        }
        for (d, &(lo, hi)) in pairs.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return input_err(format!("dimension {d}: bounds must be finite"));
            }
            if lo >= hi {
                return input_err(format!("dimension {d}: lower {lo} must be < upper {hi}"));
            }
        }
        Ok(Self {
            lower: pairs.iter().map(|p| p.0).collect(),
            upper: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// The same interval repeated over `dim` dimensions.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(&vec![(lower, upper); dim])
    }

    pub fn unit(dim: usize) -> Self {
        Self::uniform(dim, 0.0, 1.0).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self, d: usize) -> f64 {
        self.lower[d]
    }

    pub fn upper(&self, d: usize) -> f64 {
        self.upper[d]
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| 0.5 * (self.lower[d] + self.upper[d]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(d, &v)| v >= self.lower[d] && v <= self.upper[d])
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return input_err(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dim()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return input_err("point has non-finite coordinates");
        }
        Ok(())
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(d, &v)| (v - self.lower[d]) / self.width(d))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(d, &v)| self.lower[d] + v * self.width(d))
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (d, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[d], self.upper[d]);
        }
    }
}
