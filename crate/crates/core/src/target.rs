//! The target-value objective `g(x) = |f(x) − y_T|` and the derivative signs
//! on `g` that follow from a monotone `f` (used by BO-DS).

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{input_err, Result};
use crate::gp::ObservationSet;
use crate::monotonic::{Sign, SignObservation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub target: f64,
}

impl TargetSpec {
    pub fn new(target: f64) -> Result<Self> {
        if !target.is_finite() {
            return input_err("target must be finite");
        }
        Ok(Self { target })
    }

    pub fn distance(&self, y: f64) -> f64 {
        to_target_space(y, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decreasing,
    Increasing,
}

impl Direction {
    /// Sign of `∂f/∂x_d` implied by the direction.
    pub fn derivative_sign(self) -> Sign {
        match self {
            Direction::Decreasing => Sign::Negative,
            Direction::Increasing => Sign::Positive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneDeclaration {
    pub dim: usize,
    pub direction: Direction,
}

impl MonotoneDeclaration {
    pub fn decreasing(dim: usize) -> Self {
        Self {
            dim,
            direction: Direction::Decreasing,
        }
    }

    pub fn increasing(dim: usize) -> Self {
        Self {
            dim,
            direction: Direction::Increasing,
        }
    }
}

/// Checks indices against the problem dimension and rejects two declarations
/// on the same dimension.
pub fn validate_declarations(decls: &[MonotoneDeclaration], dim: usize) -> Result<()> {
    for (i, d) in decls.iter().enumerate() {
        if d.dim >= dim {
            return input_err(format!("monotone declaration on dimension {} but problem has {dim}", d.dim));
        }
        if decls[..i].iter().any(|o| o.dim == d.dim) {
            return input_err(format!("duplicate monotone declaration on dimension {}", d.dim));
        }
    }
    Ok(())
}

pub fn to_target_space(y: f64, spec: &TargetSpec) -> f64 {
    (y - spec.target).abs()
}

/// `count` equally spaced values covering `[lo, hi]` including both ends;
/// a single value sits at the midpoint.
pub(crate) fn equally_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        n => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / (n - 1) as f64) })
            .collect(),
    }
}

/// Derivative signs on `g` implied by one monotone dimension of `f`.
///
/// For decreasing `f`: an observation above target puts `−1` on
/// `[L_d, x_id]`, one below target puts `+1` on `[x_id, U_d]`. Increasing
/// `f` mirrors this: above target gives `+1` on `[x_id, U_d]`, below target
/// gives `−1` on `[L_d, x_id]`. Observations exactly on target emit nothing.
/// Sites closer than 1e-6 (unit-cube distance) to an earlier site are
/// dropped.
pub fn derive_ds_signs(
    obs: &ObservationSet,
    spec: &TargetSpec,
    bounds: &Bounds,
    decl: &MonotoneDeclaration,
    sites_per_obs: usize,
) -> Result<Vec<SignObservation>> {
    let d = decl.dim;
    if d >= bounds.dim() {
        return input_err(format!("dimension {d} out of range"));
    }
    let mut out: Vec<SignObservation> = Vec::new();
    for (x, y) in obs.iter() {
        bounds.check_point(x)?;
        let above = y > spec.target;
        if y == spec.target {
            continue;
        }
        let xd = x[d];
        let (lo, hi, sign) = match (decl.direction, above) {
            (Direction::Decreasing, true) => (bounds.lower(d), xd, Sign::Negative),
            (Direction::Decreasing, false) => (xd, bounds.upper(d), Sign::Positive),
            (Direction::Increasing, true) => (xd, bounds.upper(d), Sign::Positive),
            (Direction::Increasing, false) => (bounds.lower(d), xd, Sign::Negative),
        };
        for v in equally_spaced(lo, hi, sites_per_obs) {
            let mut loc = x.to_vec();
            loc[d] = v;
            push_dedup(&mut out, SignObservation { x: loc, dim: d, sign }, bounds);
        }
    }
    Ok(out)
}

pub(crate) fn push_dedup(out: &mut Vec<SignObservation>, site: SignObservation, bounds: &Bounds) {
    let u = bounds.to_unit(&site.x);
    let dup = out.iter().any(|o| {
        o.dim == site.dim && {
            let v = bounds.to_unit(&o.x);
            u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < 1e-6
        }
    });
    if !dup {
        out.push(site);
    }
}
