//! Lower-confidence-bound acquisition and its exploration schedules.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{input_err, Result};
use crate::gp::PredictiveDistribution;
use crate::sampling::{rng_for, shifted_halton_unit, Stream};

/// Exploration schedule for the confidence coefficient. `tail_a` and
/// `tail_b` are the Lipschitz tail constants of the regret bound; with no
/// better information they default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcbSchedule {
    pub delta: f64,
    pub scale: f64,
    pub dim: usize,
    pub tail_a: f64,
    pub tail_b: f64,
    pub length_scale: f64,
}

impl LcbSchedule {
    pub fn new(dim: usize, length_scale: f64) -> Result<Self> {
        let s = Self {
            delta: 0.1,
            scale: 0.1,
            dim,
            tail_a: 1.0,
            tail_b: 1.0,
            length_scale,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return input_err(format!("delta must be in (0, 1), got {}", self.delta));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return input_err(format!("scale must be >= 0, got {}", self.scale));
        }
        if self.dim == 0 {
            return input_err("schedule dimension must be >= 1");
        }
        for (name, v) in [("tail_a", self.tail_a), ("tail_b", self.tail_b), ("length_scale", self.length_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return input_err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Confidence coefficient at iteration `t` (1-based).
///
/// The second log term can go negative for short length scales or small
/// `t`; it is floored at zero so the coefficient stays positive and
/// strictly increasing.
pub fn alpha_t(t: usize, sched: &LcbSchedule) -> f64 {
    let t = t.max(1) as f64;
    let d = sched.dim as f64;
    let delta = sched.delta;
    let first = 2.0 * (2.0 * t * t * PI * PI / (3.0 * delta)).ln();
    let inner = (4.0 * d * sched.tail_a / delta).ln().sqrt();
    let second = 2.0 * d * (d * t * t * sched.tail_b * sched.length_scale * inner).ln();
    sched.scale * (first + second.max(0.0))
}

/// `μ − √α·σ`.
pub fn lcb(pred: &PredictiveDistribution, alpha: f64) -> f64 {
    pred.mean - alpha.max(0.0).sqrt() * pred.std_dev()
}

/// Inflated coefficient `ratio²·η·α`.
pub fn beta_t(max_ratio: f64, eta: f64, alpha: f64) -> Result<f64> {
    if !(max_ratio >= 1.0) || !max_ratio.is_finite() {
        return input_err(format!("variance ratio must be >= 1, got {max_ratio}"));
    }
    if !(eta >= 0.0) || !(alpha >= 0.0) {
        return input_err(format!("eta and alpha must be >= 0, got {eta} and {alpha}"));
    }
    Ok(max_ratio * max_ratio * eta * alpha)
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub num_candidates: usize,
    pub polish_starts: usize,
    /// Objective evaluations spent polishing each start.
    pub polish_evals: usize,
    pub seed: u64,
    pub deadline: Option<Instant>,
    /// Extra points probed ahead of the quasi-random candidates.
    pub extra_candidates: Vec<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            num_candidates: 500,
            polish_starts: 5,
            polish_evals: 50,
            seed: 0,
            deadline: None,
            extra_candidates: Vec::new(),
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub timed_out: bool,
}

fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Minimizes `objective` over `bounds`: quasi-random probing followed by a
/// compass-search polish of the best few probes. NaN values are treated as
/// +∞. Ties keep the earliest candidate.
pub fn minimize_objective<F>(objective: F, bounds: &Bounds, cfg: &SearchConfig) -> Result<SearchOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = bounds.dim();
    for x in &cfg.extra_candidates {
        bounds.check_point(x)?;
    }
    let eval = |u: &[f64]| {
        let v = objective(&bounds.from_unit(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut rng = rng_for(cfg.seed, 0, Stream::Acquisition);
    let mut candidates: Vec<Vec<f64>> = cfg.extra_candidates.iter().map(|x| bounds.to_unit(x)).collect();
    candidates.extend(shifted_halton_unit(cfg.num_candidates.max(1), dim, &mut rng));

    let mut timed_out = false;
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for (i, u) in candidates.iter().enumerate() {
        if i > 0 && expired(cfg.deadline) {
            timed_out = true;
            break;
        }
        scored.push((i, eval(u)));
    }
    let mut evaluations = scored.len();
    // stable sort keeps index order among ties
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut best_u = candidates[scored[0].0].clone();
    let mut best_v = scored[0].1;

    if !timed_out {
        let spacing = 0.5 / (cfg.num_candidates.max(1) as f64).powf(1.0 / dim as f64);
        for &(idx, v0) in scored.iter().take(cfg.polish_starts) {
            if expired(cfg.deadline) {
                timed_out = true;
                break;
            }
            let (u, v, n) = compass_polish(&eval, candidates[idx].clone(), v0, spacing, cfg.polish_evals, cfg.deadline);
            evaluations += n;
            if v < best_v {
                best_v = v;
                best_u = u;
            }
        }
    }

    Ok(SearchOutcome {
        x: bounds.from_unit(&best_u),
        value: best_v,
        evaluations,
        timed_out,
    })
}

pub fn maximize_objective<F>(objective: F, bounds: &Bounds, cfg: &SearchConfig) -> Result<SearchOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    let mut out = minimize_objective(|x| -objective(x), bounds, cfg)?;
    out.value = -out.value;
    Ok(out)
}

fn compass_polish<F: Fn(&[f64]) -> f64>(
    eval: &F,
    mut u: Vec<f64>,
    mut value: f64,
    initial_step: f64,
    budget: usize,
    deadline: Option<Instant>,
) -> (Vec<f64>, f64, usize) {
    let mut step = initial_step;
    let mut used = 0;
    let mut trial = u.clone();
    while used < budget && step > 1e-9 {
        let mut improved = false;
        'dims: for d in 0..u.len() {
            for dir in [1.0, -1.0] {
                if used >= budget {
                    break 'dims;
                }
                let moved = (u[d] + dir * step).clamp(0.0, 1.0);
                if moved == u[d] {
                    continue;
                }
                trial.copy_from_slice(&u);
                trial[d] = moved;
                let v = eval(&trial);
                used += 1;
                if v < value {
                    value = v;
                    u[d] = moved;
                    improved = true;
                    break;
                }
            }
        }
        if expired(deadline) {
            break;
        }
        if !improved {
            step *= 0.5;
        }
    }
    (u, value, used)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub prediction: PredictiveDistribution,
    pub timed_out: bool,
}

/// Minimizes the LCB of `predict` with coefficient `alpha` over `bounds`.
pub fn minimize_acquisition<P>(predict: P, bounds: &Bounds, alpha: f64, cfg: &SearchConfig) -> Result<AcquisitionOutcome>
where
    P: Fn(&[f64]) -> PredictiveDistribution,
{
    if !(alpha >= 0.0) {
        return input_err(format!("alpha must be >= 0, got {alpha}"));
    }
    let out = minimize_objective(|x| lcb(&predict(x), alpha), bounds, cfg)?;
    let prediction = predict(&out.x);
    Ok(AcquisitionOutcome {
        x: out.x,
        value: out.value,
        prediction,
        timed_out: out.timed_out,
    })
}
