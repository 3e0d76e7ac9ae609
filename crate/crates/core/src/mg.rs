//! BO with a monotone GP on the raw response: virtual observations drawn
//! from the monotone model feed a heteroscedastic GP on the distance to
//! target, and the exploration coefficient is inflated by how much those
//! virtual points shrink the predictive spread.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::acquisition::{alpha_t, beta_t, maximize_objective, SearchConfig};
use crate::bounds::Bounds;
use crate::engine::{fallback_random, fit_distance_hyper, lcb_recommendation, step_standard, BoState, Fallback, Recommendation};
use crate::error::{input_err, Error, Result};
use crate::gp::{fit_hyperparameters, GpModel, ObservationSet};
use crate::kernel::{k_value, KernelHyper};
use crate::monotonic::{ep_fit, place_sign_sites, EpState, SignObservation};
use crate::sampling::{derive_seed, latin_hypercube, nested_latin_hypercube, rng_for, shifted_halton_unit, Stream};
use crate::target::TargetSpec;

/// A pseudo-datum taken from the monotone model of the raw response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualObservation {
    pub x: Vec<f64>,
    pub mean_f: f64,
    pub var_f: f64,
}

impl VirtualObservation {
    pub fn mean_g(&self, target: &TargetSpec) -> f64 {
        target.distance(self.mean_f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    /// Size of the smaller nested virtual set used for the variance ratio.
    pub n_small: usize,
    /// Size of the larger nested virtual set.
    pub n_large: usize,
    pub eta: f64,
    /// Virtual points fed to the distance model.
    pub virtual_count: usize,
    pub sites_per_dim: usize,
    /// Also compute the information-gain coefficient (diagnostic only).
    pub info_gain_diagnostic: bool,
}

impl MgConfig {
    pub fn for_dim(dim: usize) -> Self {
        let n_large = match dim {
            0..=2 => 10,
            3..=5 => 20,
            _ => 40,
        };
        Self {
            n_small: 5,
            n_large,
            eta: if dim <= 5 { 0.1 } else { 0.01 },
            virtual_count: n_large,
            sites_per_dim: 5,
            info_gain_diagnostic: true,
        }
    }

    /// Both nested sizes may be zero, which disables virtual points in the
    /// ratio; otherwise `n_large > n_small >= 1`.
    pub fn validate(&self) -> Result<()> {
        let degenerate = self.n_small == 0 && self.n_large == 0;
        if !degenerate && !(self.n_large > self.n_small && self.n_small >= 1) {
            return Err(Error::Config(format!(
                "nested virtual sets need n_large > n_small >= 1, got {} and {}",
                self.n_large, self.n_small
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.sites_per_dim == 0 {
            return Err(Error::Config("sites_per_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Monotone-model predictions at `locations`.
pub fn sample_virtual(state: &EpState, locations: &[Vec<f64>]) -> Result<Vec<VirtualObservation>> {
    locations
        .iter()
        .map(|x| {
            let p = state.predict(x)?;
            Ok(VirtualObservation {
                x: x.clone(),
                mean_f: p.mean,
                var_f: p.variance,
            })
        })
        .collect()
}

/// Heteroscedastic GP on the distance to target over `[virtual; real]`.
/// Virtual points carry their monotone-model variance as noise; real points
/// carry the kernel's noise variance.
pub fn build_combined_gp(
    virtual_obs: &[VirtualObservation],
    target: &TargetSpec,
    real_g: &ObservationSet,
    bounds: &Bounds,
    hyper: KernelHyper,
) -> Result<GpModel> {
    let mut data = ObservationSet::new();
    let mut noise = Vec::with_capacity(virtual_obs.len() + real_g.len());
    for v in virtual_obs {
        data.push(v.x.clone(), v.mean_g(target));
        noise.push(v.var_f);
    }
    for (x, g) in real_g.iter() {
        data.push(x.to_vec(), g);
        noise.push(hyper.noise_variance);
    }
    GpModel::fit_heteroscedastic(&data, bounds, hyper, noise)
}

/// Drops locations within 1e-6 (unit-cube, per coordinate) of any `existing`
/// point. Returns the kept indices.
fn dedup_against(locations: &[Vec<f64>], existing: &[Vec<f64>], bounds: &Bounds) -> Vec<usize> {
    let ex: Vec<Vec<f64>> = existing.iter().map(|x| bounds.to_unit(x)).collect();
    locations
        .iter()
        .enumerate()
        .filter(|(_, x)| {
            let u = bounds.to_unit(x);
            !ex.iter().any(|e| e.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-6))
        })
        .map(|(i, _)| i)
        .collect()
}

fn predictive_std_ratio(small: &GpModel, large: &GpModel, u: &[f64]) -> f64 {
    let floor = large.hyper().jitter();
    let a = small.predict_unit(u).variance.max(floor);
    let b = large.predict_unit(u).variance.max(floor);
    (a / b).sqrt()
}

/// `σ_small(x) / σ_large(x)`, the predictive spread of a model with fewer
/// data over one with more.
pub fn variance_ratio(small: &GpModel, large: &GpModel, x: &[f64]) -> Result<f64> {
    small.bounds().check_point(x)?;
    Ok(predictive_std_ratio(small, large, &small.bounds().to_unit(x)))
}

/// Maximum of the spread ratio over `bounds`, clamped to at least 1. The
/// extra data of `large` are probed first since the ratio peaks there.
pub fn max_variance_ratio(small: &GpModel, large: &GpModel, bounds: &Bounds, cfg: &SearchConfig) -> Result<f64> {
    let large_inputs = large.inputs_unit();
    let mut extra = Vec::new();
    let mut remaining: Vec<bool> = vec![true; large_inputs.len()];
    for u in small.inputs_unit() {
        match large_inputs.iter().enumerate().position(|(j, v)| remaining[j] && v == u) {
            Some(j) => remaining[j] = false,
            None => return input_err("the larger model's data must contain the smaller model's data"),
        }
    }
    for (j, keep) in remaining.iter().enumerate() {
        if *keep {
            extra.push(bounds.from_unit(&large_inputs[j]));
        }
    }
    if extra.is_empty() {
        return Ok(1.0);
    }
    let mut cfg = cfg.clone();
    cfg.extra_candidates.extend(extra.into_iter().map(|mut x| {
        bounds.clamp(&mut x);
        x
    }));
    let out = maximize_objective(|x| predictive_std_ratio(small, large, &bounds.to_unit(x)), bounds, &cfg)?;
    Ok(out.value.max(1.0))
}

fn half_log_det_chol(m: DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum())
}

fn check_distinct(points: &[Vec<f64>]) -> Result<()> {
    for i in 0..points.len() {
        for j in 0..i {
            if points[i] == points[j] {
                return input_err("query points must be distinct");
            }
        }
    }
    Ok(())
}

/// Mutual information between the latent function and noisy observations
/// at `query`, given the model's data. `noise[i]` is the observation
/// variance at `query[i]`; the kernel jitter is added on top, matching how
/// training data are treated.
pub fn information_gain_with_noise(model: &GpModel, query: &[Vec<f64>], noise: &[f64]) -> Result<f64> {
    if query.len() != noise.len() {
        return input_err("one noise value per query point is required");
    }
    if query.is_empty() {
        return Ok(0.0);
    }
    check_distinct(query)?;
    let cov = model.posterior_covariance(query)?;
    let jitter = model.hyper().jitter();
    let n = query.len();
    // ½ log det(I + N^{-1/2} Σ N^{-1/2})
    let s: Vec<f64> = noise.iter().map(|v| 1.0 / (v + jitter).sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| s[i] * cov[(i, j)] * s[j] + if i == j { 1.0 } else { 0.0 });
    half_log_det_chol(m)
}

/// Information gain at the model's homoscedastic noise level.
pub fn information_gain(model: &GpModel, query: &[Vec<f64>]) -> Result<f64> {
    let noise = vec![model.hyper().noise_variance; query.len()];
    information_gain_with_noise(model, query, &noise)
}

/// Mutual information between the latent value at `x` and noisy
/// observations at `query`, given the model's data:
/// `½ log det(Σ_QQ + N) − ½ log det(Σ_QQ|x + N)`.
pub fn conditional_information_gain(model: &GpModel, x: &[f64], query: &[Vec<f64>], noise: &[f64]) -> Result<f64> {
    if query.len() != noise.len() {
        return input_err("one noise value per query point is required");
    }
    check_distinct(query)?;
    let mut pts = vec![x.to_vec()];
    pts.extend(query.iter().cloned());
    let cov = model.posterior_covariance(&pts)?;
    let n = query.len();
    let jitter = model.hyper().jitter();
    let sxx = cov[(0, 0)];
    if !(sxx > 0.0) {
        return Err(Error::Numeric("latent variance at x is zero".into()));
    }
    let mut joint = DMatrix::from_fn(n, n, |i, j| cov[(i + 1, j + 1)]);
    for i in 0..n {
        joint[(i, i)] += noise[i] + jitter;
    }
    let sqx = DVector::from_fn(n, |i, _| cov[(i + 1, 0)]);
    let cond = &joint - &sqx * sqx.transpose() / sxx;
    Ok(half_log_det_chol(joint)? - half_log_det_chol(cond)?)
}

/// Greedy maximum-variance selection of `count` points from `pool`,
/// conditioning on noisy observations at each pick. Returns pool indices
/// and the variance each pick had when chosen.
pub fn uncertainty_sampling_from_pool(model: &GpModel, pool: &[Vec<f64>], count: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    for p in pool {
        model.bounds().check_point(p)?;
    }
    let bounds = model.bounds();
    let unit: Vec<Vec<f64>> = pool.iter().map(|p| bounds.to_unit(p)).collect();
    let h = *model.hyper();
    let obs_noise = h.noise_variance + h.jitter();
    let mut var: Vec<f64> = unit.iter().map(|u| model.predict_unit(u).variance).collect();
    let mut factors: Vec<DVector<f64>> = Vec::new();
    let mut picked = Vec::new();
    let mut picked_var = Vec::new();
    let whitened = model.whitened_cross_unit(&unit);
    let base_cov = |j: usize| -> DVector<f64> {
        // posterior covariance between every pool point and pool[j]
        let mut col = DVector::from_iterator(unit.len(), unit.iter().map(|u| k_value(u, &unit[j], &h)));
        if let Some(w) = &whitened {
            col -= w.transpose() * w.column(j);
        }
        col
    };
    for _ in 0..count.min(pool.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in var.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let Some((j, vj)) = best else { break };
        let mut col = base_cov(j);
        for f in &factors {
            col.axpy(-f[j], f, 1.0);
        }
        let f = col / (vj + obs_noise).sqrt();
        for (i, v) in var.iter_mut().enumerate() {
            *v = (*v - f[i] * f[i]).max(0.0);
        }
        factors.push(f);
        picked.push(j);
        picked_var.push(vj);
    }
    Ok((picked, picked_var))
}

/// Greedy maximum-variance selection over a fixed quasi-random pool of
/// 1000 points spanning `bounds`.
pub fn uncertainty_sampling(model: &GpModel, bounds: &Bounds, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return input_err("count must be >= 1");
    }
    let mut rng = rng_for(0, 0, Stream::Diagnostic);
    let pool: Vec<Vec<f64>> = shifted_halton_unit(1000, bounds.dim(), &mut rng)
        .iter()
        .map(|u| bounds.from_unit(u))
        .collect();
    let (idx, _) = uncertainty_sampling_from_pool(model, &pool, count)?;
    Ok(idx.into_iter().map(|i| pool[i].clone()).collect())
}

/// The coefficient implied by the information-gain bound,
/// `exp(2C)·α` with `C = e/(e−1)·I(g; y_S)` for an uncertainty-sampled `S`
/// of size `count` under the prior.
pub fn info_gain_coefficient(bounds: &Bounds, hyper: KernelHyper, count: usize, alpha: f64) -> Result<f64> {
    if count == 0 {
        return Ok(alpha);
    }
    let prior = GpModel::prior(bounds, hyper)?;
    let picks = uncertainty_sampling(&prior, bounds, count)?;
    let c = E / (E - 1.0) * information_gain(&prior, &picks)?;
    Ok((2.0 * c).exp() * alpha)
}

/// Everything a monotone-GP step fits before the acquisition search.
pub struct MgModels {
    pub f_hyper: KernelHyper,
    pub g_hyper: KernelHyper,
    pub sites: Vec<SignObservation>,
    pub f_model: EpState,
    pub virtual_obs: Vec<VirtualObservation>,
    pub combined: GpModel,
    pub max_ratio: f64,
}

/// Fits the monotone response model, draws virtual observations, builds
/// the combined distance model and the variance ratio for the state's
/// current iteration. Needs at least two observations.
pub fn fit_mg_models(state: &BoState, mcfg: &MgConfig) -> Result<MgModels> {
    mcfg.validate()?;
    if state.declarations.is_empty() {
        return input_err("monotone-GP steps need at least one monotone declaration");
    }
    if state.observations.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: state.observations.len(),
        });
    }
    let t = state.iteration() as u64;
    let cfg = &state.config;
    let bounds = &state.bounds;
    let g = state.distances();

    let g_hyper = fit_distance_hyper(state, &g)?;
    let f_hyper = fit_hyperparameters(
        &state.observations,
        bounds,
        &cfg.fit_config(derive_seed(state.seed, t, Stream::FHyper)),
    )?;

    let anchor = state.observations.xs[state.incumbent().expect("at least two observations")].clone();
    let dims: Vec<_> = state.declarations.iter().map(|d| (d.dim, d.direction)).collect();
    let sites = place_sign_sites(bounds, &dims, mcfg.sites_per_dim, &anchor)?;
    let f_model = ep_fit(&state.observations, &sites, bounds, f_hyper, &cfg.probit, &cfg.ep)?;

    // nested sets for the ratio; the large one doubles as the virtual set
    // when the counts agree
    let mut rng = rng_for(state.seed, t, Stream::Virtual);
    let nested = nested_latin_hypercube(mcfg.n_small, mcfg.n_large, bounds, &mut rng);
    let keep = dedup_against(&nested, &state.observations.xs, bounds);
    let nested_virtual = sample_virtual(&f_model, &keep.iter().map(|&i| nested[i].clone()).collect::<Vec<_>>())?;
    let small_len = keep.iter().filter(|&&i| i < mcfg.n_small).count();

    let virtual_obs = if mcfg.virtual_count == mcfg.n_large {
        nested_virtual.clone()
    } else {
        let mut rng = rng_for(state.seed, t, Stream::Ratio);
        let locs = latin_hypercube(mcfg.virtual_count, bounds, &mut rng);
        let keep = dedup_against(&locs, &state.observations.xs, bounds);
        sample_virtual(&f_model, &keep.iter().map(|&i| locs[i].clone()).collect::<Vec<_>>())?
    };

    let combined = build_combined_gp(&virtual_obs, &state.target, &g, bounds, g_hyper)?;

    let max_ratio = if nested_virtual.len() > small_len {
        let small = build_combined_gp(&nested_virtual[..small_len], &state.target, &g, bounds, g_hyper)?;
        let large = build_combined_gp(&nested_virtual, &state.target, &g, bounds, g_hyper)?;
        let seed = derive_seed(state.seed, t, Stream::Ratio);
        max_variance_ratio(&small, &large, bounds, &cfg.search_config(seed, state.deadline))?
    } else {
        1.0
    };

    Ok(MgModels {
        f_hyper,
        g_hyper,
        sites,
        f_model,
        virtual_obs,
        combined,
        max_ratio,
    })
}

/// One step of monotone-GP BO. A failed hyperparameter fit falls back to a
/// random point and a failed monotone fit to the standard step, both
/// flagged.
pub fn step_bo_mg(state: &BoState, mcfg: &MgConfig) -> Result<Recommendation> {
    mcfg.validate()?;
    if state.declarations.is_empty() {
        return input_err("monotone-GP steps need at least one monotone declaration");
    }
    if state.observations.len() < 2 {
        return Ok(fallback_random(state, Fallback::ColdStart));
    }
    let models = match fit_mg_models(state, mcfg) {
        Ok(m) => m,
        Err(Error::EpFailure { reason, .. }) => {
            let mut rec = step_standard(state)?;
            rec.diagnostics.fallback = Some(Fallback::EpFailure(reason));
            return Ok(rec);
        }
        Err(e @ (Error::Numeric(_) | Error::InsufficientData { .. })) => {
            return Ok(fallback_random(state, Fallback::ModelFailure(e.to_string())));
        }
        Err(e) => return Err(e),
    };
    let bounds = &state.bounds;
    let alpha = alpha_t(state.iteration(), &state.config.schedule(state.dim(), models.g_hyper.length_scale)?);
    let beta = beta_t(models.max_ratio, mcfg.eta, alpha)?;
    let combined = &models.combined;
    let mut rec = lcb_recommendation(state, |x| combined.predict_unit(&bounds.to_unit(x)), beta, models.g_hyper)?;
    rec.diagnostics.max_ratio = Some(models.max_ratio);
    rec.diagnostics.sign_sites = models.sites.len();
    rec.diagnostics.virtual_points = models.virtual_obs.len();
    if mcfg.info_gain_diagnostic {
        rec.diagnostics.info_gain_coefficient =
            Some(info_gain_coefficient(bounds, models.g_hyper, mcfg.n_large - mcfg.n_small, alpha)?);
    }
    Ok(rec)
}
