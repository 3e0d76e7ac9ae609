//! Zero-mean GP regression with an isotropic SE kernel.
//!
//! A [`GpModel`] is immutable once built: it owns the unit-cube training
//! inputs, the per-datum noise used on the diagonal and the Cholesky factor of
//! `K + diag(noise) + jitter·I`. Refitting always produces a new model.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{input_err, Error, Result};
use crate::kernel::{k_value, KernelHyper};
use crate::sampling::{latin_hypercube_unit, SeededRng};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return input_err(format!("{} inputs but {} responses", xs.len(), ys.len()));
        }
        let set = Self { xs, ys };
        set.validate()?;
        Ok(set)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.xs.push(x);
        self.ys.push(y);
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.iter().map(|x| x.as_slice()).zip(self.ys.iter().copied())
    }

    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|&y| f(y)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.xs.first() {
            if self.xs.iter().any(|x| x.len() != first.len()) {
                return input_err("observations have inconsistent dimensions");
            }
        }
        if self.ys.iter().any(|y| !y.is_finite()) {
            return input_err("observations contain non-finite responses");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveDistribution {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct GpModel {
    hyper: KernelHyper,
    bounds: Bounds,
    x_unit: Vec<Vec<f64>>,
    y: DVector<f64>,
    noise: Vec<f64>,
    heteroscedastic: bool,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Homoscedastic model: every datum carries `hyper.noise_variance`.
    pub fn fit(data: &ObservationSet, bounds: &Bounds, hyper: KernelHyper) -> Result<Self> {
        let noise = vec![hyper.noise_variance; data.len()];
        Self::build(data, bounds, hyper, noise, false)
    }

    /// Heteroscedastic model: datum `i` carries `noise[i]` instead of the
    /// kernel's noise variance.
    pub fn fit_heteroscedastic(
        data: &ObservationSet,
        bounds: &Bounds,
        hyper: KernelHyper,
        noise: Vec<f64>,
    ) -> Result<Self> {
        if noise.len() != data.len() {
            return input_err(format!(
                "{} noise entries for {} observations",
                noise.len(),
                data.len()
            ));
        }
        if let Some(bad) = noise.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return input_err(format!("per-datum noise must be finite and >= 0, got {bad}"));
        }
        Self::build(data, bounds, hyper, noise, true)
    }

    /// The prior: no data, mean 0 and variance ε everywhere.
    pub fn prior(bounds: &Bounds, hyper: KernelHyper) -> Result<Self> {
        Self::fit(&ObservationSet::new(), bounds, hyper)
    }

    fn build(
        data: &ObservationSet,
        bounds: &Bounds,
        hyper: KernelHyper,
        noise: Vec<f64>,
        heteroscedastic: bool,
    ) -> Result<Self> {
        hyper.validate()?;
        data.validate()?;
        for x in &data.xs {
            bounds.check_point(x)?;
        }
        let x_unit: Vec<Vec<f64>> = data.xs.iter().map(|x| bounds.to_unit(x)).collect();
        let y = DVector::from_column_slice(&data.ys);
        let (chol, alpha) = if x_unit.is_empty() {
            (None, DVector::zeros(0))
        } else {
            let k = noisy_gram(&x_unit, &noise, &hyper);
            let chol = Cholesky::new(k).ok_or_else(|| {
                Error::Numeric("kernel matrix is not positive definite after jitter".into())
            })?;
            let alpha = chol.solve(&y);
            (Some(chol), alpha)
        };
        Ok(Self {
            hyper,
            bounds: bounds.clone(),
            x_unit,
            y,
            noise,
            heteroscedastic,
            chol,
            alpha,
        })
    }

    pub fn hyper(&self) -> &KernelHyper {
        &self.hyper
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.x_unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_unit.is_empty()
    }

    pub fn is_heteroscedastic(&self) -> bool {
        self.heteroscedastic
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn responses(&self) -> &[f64] {
        self.y.as_slice()
    }

    /// Training inputs in original coordinates.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.x_unit.iter().map(|u| self.bounds.from_unit(u)).collect()
    }

    pub(crate) fn inputs_unit(&self) -> &[Vec<f64>] {
        &self.x_unit
    }

    pub fn predict(&self, x: &[f64]) -> Result<PredictiveDistribution> {
        self.bounds.check_point(x)?;
        Ok(self.predict_unit(&self.bounds.to_unit(x)))
    }

    pub(crate) fn predict_unit(&self, u: &[f64]) -> PredictiveDistribution {
        let prior = self.hyper.output_variance;
        let Some(chol) = &self.chol else {
            return PredictiveDistribution {
                mean: 0.0,
                variance: prior,
            };
        };
        let kx = DVector::from_iterator(
            self.x_unit.len(),
            self.x_unit.iter().map(|xi| k_value(u, xi, &self.hyper)),
        );
        let mean = kx.dot(&self.alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("cholesky factor has a non-zero diagonal");
        let variance = (prior - v.norm_squared()).clamp(0.0, prior);
        PredictiveDistribution { mean, variance }
    }

    /// Posterior covariance of the latent function at `points` (unit
    /// coordinates).
    pub(crate) fn posterior_cov_unit(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let q = points.len();
        let mut cov = DMatrix::from_fn(q, q, |i, j| k_value(&points[i], &points[j], &self.hyper));
        if let Some(chol) = &self.chol {
            let kxq = DMatrix::from_fn(self.x_unit.len(), q, |i, j| {
                k_value(&self.x_unit[i], &points[j], &self.hyper)
            });
            let v = chol
                .l_dirty()
                .solve_lower_triangular(&kxq)
                .expect("cholesky factor has a non-zero diagonal");
            cov -= v.transpose() * v;
        }
        cov
    }

    /// `L⁻¹ K(X, points)` for the training Cholesky factor `L`; `None`
    /// without data.
    pub(crate) fn whitened_cross_unit(&self, points: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let chol = self.chol.as_ref()?;
        let kxq = DMatrix::from_fn(self.x_unit.len(), points.len(), |i, j| {
            k_value(&self.x_unit[i], &points[j], &self.hyper)
        });
        Some(
            chol.l_dirty()
                .solve_lower_triangular(&kxq)
                .expect("cholesky factor has a non-zero diagonal"),
        )
    }

    pub fn posterior_covariance(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        for p in points {
            self.bounds.check_point(p)?;
        }
        let unit: Vec<Vec<f64>> = points.iter().map(|p| self.bounds.to_unit(p)).collect();
        Ok(self.posterior_cov_unit(&unit))
    }

    /// Gaussian log evidence of the training responses.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x_unit.len();
        let Some(chol) = &self.chol else { return 0.0 };
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.y.dot(&self.alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `K(X, X) + diag(noise) + jitter·I`.
pub(crate) fn noisy_gram(x_unit: &[Vec<f64>], noise: &[f64], hyper: &KernelHyper) -> DMatrix<f64> {
    let n = x_unit.len();
    let jitter = hyper.jitter();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = k_value(&x_unit[i], &x_unit[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = hyper.output_variance + noise[i] + jitter;
    }
    k
}

pub fn posterior_predict(model: &GpModel, x: &[f64]) -> Result<PredictiveDistribution> {
    model.predict(x)
}

pub fn posterior_predict_hetero(model: &GpModel, x: &[f64]) -> Result<PredictiveDistribution> {
    if !model.is_heteroscedastic() {
        return input_err("model was built without per-datum noise");
    }
    model.predict(x)
}

pub fn log_marginal_likelihood(model: &GpModel) -> f64 {
    model.log_marginal_likelihood()
}

/// Hyperparameters in log space: `(ln ε, ln l, ln σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogHyper(pub [f64; 3]);

impl LogHyper {
    pub fn from_hyper(h: &KernelHyper) -> Self {
        Self([h.output_variance.ln(), h.length_scale.ln(), h.noise_variance.ln()])
    }

    pub fn to_hyper(self) -> KernelHyper {
        KernelHyper {
            output_variance: self.0[0].exp(),
            length_scale: self.0[1].exp(),
            noise_variance: self.0[2].exp(),
        }
    }
}

/// Log evidence and its gradient with respect to `(ln ε, ln l, ln σ²)` for a
/// homoscedastic model on unit-cube inputs.
pub fn log_evidence_and_gradient(
    x_unit: &[Vec<f64>],
    y: &[f64],
    theta: LogHyper,
) -> Result<(f64, [f64; 3])> {
    let h = theta.to_hyper();
    let n = x_unit.len();
    if n == 0 {
        return Ok((0.0, [0.0; 3]));
    }
    let noise = vec![h.noise_variance; n];
    let k = noisy_gram(x_unit, &noise, &h);
    let chol = Cholesky::new(k.clone())
        .ok_or_else(|| Error::Numeric("kernel matrix is not positive definite after jitter".into()))?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let value = -0.5 * yv.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = αα^T − K^{-1}; each gradient component is ½ tr(W ∂K/∂θ).
    let mut w = chol.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let l2 = h.length_scale * h.length_scale;
    let mut g_eps = 0.0;
    let mut g_len = 0.0;
    let mut g_noise = 0.0;
    for i in 0..n {
        let wii = w[(i, i)];
        g_eps += wii * (h.output_variance + h.jitter());
        g_noise += wii * h.noise_variance;
        for j in 0..i {
            let r2: f64 = x_unit[i]
                .iter()
                .zip(&x_unit[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let kij = k[(i, j)];
            // off-diagonal pairs appear twice in the trace
            g_eps += 2.0 * w[(i, j)] * kij;
            g_len += 2.0 * w[(i, j)] * kij * r2 / l2;
        }
    }
    Ok((value, [0.5 * g_eps, 0.5 * g_len, 0.5 * g_noise]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub length_scale_range: (f64, f64),
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            length_scale_range: (0.01, 2.0),
            seed: 0,
        }
    }
}

pub const FALLBACK_OUTPUT_VARIANCE: f64 = 1e-6;
pub const MIN_NOISE_VARIANCE: f64 = 1e-6;

fn population_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Admissible box in log space, derived from the response variance.
pub fn hyper_box(y: &[f64], cfg: &FitConfig) -> [(f64, f64); 3] {
    let var = population_variance(y);
    [
        ((1e-4 * var).ln(), (10.0 * var).ln()),
        (cfg.length_scale_range.0.ln(), cfg.length_scale_range.1.ln()),
        (MIN_NOISE_VARIANCE.ln(), var.max(MIN_NOISE_VARIANCE).ln()),
    ]
}

/// Maximizes the log evidence over the admissible box by multi-start
/// projected gradient ascent. The first start is always the box centre, so
/// more restarts never do worse than fewer.
pub fn fit_hyperparameters(data: &ObservationSet, bounds: &Bounds, cfg: &FitConfig) -> Result<KernelHyper> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if cfg.restarts == 0 {
        return Err(Error::Config("at least one restart is required".into()));
    }
    data.validate()?;
    let var = population_variance(&data.ys);
    if var <= 1e-14 * (1.0 + data.ys[0] * data.ys[0]) {
        return Ok(KernelHyper {
            output_variance: FALLBACK_OUTPUT_VARIANCE,
            length_scale: cfg.length_scale_range.1,
            noise_variance: MIN_NOISE_VARIANCE,
        });
    }
    let x_unit: Vec<Vec<f64>> = data.xs.iter().map(|x| bounds.to_unit(x)).collect();
    let bx = hyper_box(&data.ys, cfg);

    let mut starts = vec![[
        0.5 * (bx[0].0 + bx[0].1),
        0.5 * (bx[1].0 + bx[1].1),
        0.5 * (bx[2].0 + bx[2].1),
    ]];
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    for u in latin_hypercube_unit(cfg.restarts - 1, 3, &mut rng) {
        starts.push([
            bx[0].0 + u[0] * (bx[0].1 - bx[0].0),
            bx[1].0 + u[1] * (bx[1].1 - bx[1].0),
            bx[2].0 + u[2] * (bx[2].1 - bx[2].0),
        ]);
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for start in starts {
        if let Some((theta, value)) = ascend(&x_unit, &data.ys, start, &bx, cfg.max_iters) {
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((theta, value));
            }
        }
    }
    let (theta, _) = best.ok_or_else(|| Error::Numeric("no restart produced a finite evidence".into()))?;
    Ok(LogHyper(theta).to_hyper())
}

fn project(theta: &mut [f64; 3], bx: &[(f64, f64); 3]) {
    for (v, (lo, hi)) in theta.iter_mut().zip(bx) {
        *v = v.clamp(*lo, (*hi).max(*lo));
    }
}

fn ascend(
    x_unit: &[Vec<f64>],
    y: &[f64],
    start: [f64; 3],
    bx: &[(f64, f64); 3],
    max_iters: usize,
) -> Option<([f64; 3], f64)> {
    let mut theta = start;
    project(&mut theta, bx);
    let (mut value, mut grad) = log_evidence_and_gradient(x_unit, y, LogHyper(theta)).ok()?;
    if !value.is_finite() {
        return None;
    }
    let mut step = 0.5;
    for _ in 0..max_iters {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-8 {
            break;
        }
        let mut improved = false;
        while step > 1e-10 {
            let mut cand = theta;
            for k in 0..3 {
                cand[k] += step * grad[k] / gnorm.max(1.0);
            }
            project(&mut cand, bx);
            if cand == theta {
                break;
            }
            match log_evidence_and_gradient(x_unit, y, LogHyper(cand)) {
                Ok((v, g)) if v.is_finite() && v > value => {
                    let gain = v - value;
                    theta = cand;
                    value = v;
                    grad = g;
                    improved = gain > 1e-10;
                    step *= 2.0;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    Some((theta, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn one_dim() -> Bounds {
        Bounds::unit(1)
    }

    #[test]
    fn single_observation_hand_case() {
        let data = ObservationSet::from_pairs(vec![vec![0.3]], vec![1.0]).unwrap();
        let h = KernelHyper::new(1.0, 0.2, 0.1).unwrap();
        let m = GpModel::fit(&data, &one_dim(), h).unwrap();
        let p = m.predict(&[0.3]).unwrap();
        assert!((p.mean - 0.9090909090909091).abs() < 1e-6);
        assert!((p.variance - 0.09090909090909094).abs() < 1e-6);
    }

    #[test]
    fn far_point_recovers_prior() {
        let b = Bounds::new(&[(0.0, 100.0)]).unwrap();
        let data = ObservationSet::from_pairs(vec![vec![0.0]], vec![3.0]).unwrap();
        let h = KernelHyper::new(2.0, 0.01, 0.01).unwrap();
        let m = GpModel::fit(&data, &b, h).unwrap();
        let p = m.predict(&[100.0]).unwrap();
        assert!(p.mean.abs() < 1e-12);
        assert!((p.variance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_data_is_the_prior() {
        let h = KernelHyper::new(1.5, 0.3, 0.0).unwrap();
        let m = GpModel::prior(&Bounds::unit(2), h).unwrap();
        let p = m.predict(&[0.2, 0.7]).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_eq!(p.variance, 1.5);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let m = GpModel::prior(&Bounds::unit(2), KernelHyper::new(1.0, 0.3, 0.0).unwrap()).unwrap();
        assert!(matches!(m.predict(&[0.1]), Err(Error::Input(_))));
    }

    #[test]
    fn noiseless_interpolation() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.25]).collect();
        let ys = vec![0.3, -0.2, 0.1, 0.45, -0.4];
        let data = ObservationSet::from_pairs(xs.clone(), ys.clone()).unwrap();
        let m = GpModel::fit(&data, &one_dim(), KernelHyper::new(1.0, 0.1, 0.0).unwrap()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.predict(x).unwrap().mean - y).abs() < 1e-8);
        }
    }

    #[test]
    fn evidence_single_zero_observation() {
        let data = ObservationSet::from_pairs(vec![vec![0.5]], vec![0.0]).unwrap();
        let m = GpModel::fit(&data, &one_dim(), KernelHyper::new(1.0, 0.3, 0.0).unwrap()).unwrap();
        assert!((m.log_marginal_likelihood() - (-0.9189385332046727)).abs() < 1e-8);
    }

    #[test]
    fn evidence_with_zero_responses_is_log_det_only() {
        let xs: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 * 0.3]).collect();
        let data = ObservationSet::from_pairs(xs, vec![0.0; 4]).unwrap();
        let m = GpModel::fit(&data, &one_dim(), KernelHyper::new(1.0, 0.3, 0.05).unwrap()).unwrap();
        let k = noisy_gram(m.inputs_unit(), m.noise(), m.hyper());
        let det = k.determinant();
        let expected = -0.5 * det.ln() - 2.0 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_marginal_likelihood() - expected).abs() < 1e-10);
    }

    #[test]
    fn hetero_noise_validation() {
        let data = ObservationSet::from_pairs(vec![vec![0.1], vec![0.2]], vec![1.0, 2.0]).unwrap();
        let h = KernelHyper::new(1.0, 0.3, 0.01).unwrap();
        assert!(GpModel::fit_heteroscedastic(&data, &one_dim(), h, vec![0.1, -0.1]).is_err());
        assert!(GpModel::fit_heteroscedastic(&data, &one_dim(), h, vec![0.1]).is_err());
        let homo = GpModel::fit(&data, &one_dim(), h).unwrap();
        assert!(posterior_predict_hetero(&homo, &[0.1]).is_err());
    }

    #[test]
    fn hetero_equal_noise_matches_homoscedastic() {
        let mut rng = SeededRng::seed_from_u64(11);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = (0..8).map(|_| rng.random()).collect();
        let data = ObservationSet::from_pairs(xs, ys).unwrap();
        let b = Bounds::unit(2);
        let h = KernelHyper::new(0.7, 0.4, 0.02).unwrap();
        let homo = GpModel::fit(&data, &b, h).unwrap();
        let het = GpModel::fit_heteroscedastic(&data, &b, h, vec![0.02; 8]).unwrap();
        for _ in 0..20 {
            let q = [rng.random(), rng.random()];
            let a = homo.predict(&q).unwrap();
            let c = posterior_predict_hetero(&het, &q).unwrap();
            assert!((a.mean - c.mean).abs() < 1e-12 && (a.variance - c.variance).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_noise_datum_is_ignored() {
        let xs = vec![vec![0.1], vec![0.5], vec![0.8]];
        let ys = vec![0.4, -0.3, 0.9];
        let b = one_dim();
        let h = KernelHyper::new(1.0, 0.25, 0.01).unwrap();
        let full = ObservationSet::from_pairs(xs.clone(), ys.clone()).unwrap();
        let het = GpModel::fit_heteroscedastic(&full, &b, h, vec![0.01, 1e12, 0.01]).unwrap();
        let reduced = ObservationSet::from_pairs(vec![xs[0].clone(), xs[2].clone()], vec![ys[0], ys[2]]).unwrap();
        let red = GpModel::fit(&reduced, &b, h).unwrap();
        for i in 0..=20 {
            let q = [i as f64 / 20.0];
            let a = het.predict(&q).unwrap();
            let c = red.predict(&q).unwrap();
            assert!((a.mean - c.mean).abs() < 1e-4, "mean at {q:?}");
            assert!((a.variance - c.variance).abs() < 1e-4, "var at {q:?}");
        }
    }

    #[test]
    fn zero_noise_datum_interpolates() {
        let data = ObservationSet::from_pairs(vec![vec![0.2], vec![0.7]], vec![1.3, 0.4]).unwrap();
        let h = KernelHyper::new(1.0, 0.3, 0.05).unwrap();
        let m = GpModel::fit_heteroscedastic(&data, &one_dim(), h, vec![0.0, 0.05]).unwrap();
        let p = m.predict(&[0.2]).unwrap();
        assert!((p.mean - 1.3).abs() < 1e-6);
        assert!(p.variance < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(3..12);
            let dim = rng.random_range(1..4);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let theta = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..0.5),
                rng.random_range(-5.0..-1.0),
            ];
            let (_, g) = log_evidence_and_gradient(&x, &y, LogHyper(theta)).unwrap();
            for k in 0..3 {
                let h = 1e-5;
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += h;
                tm[k] -= h;
                let fp = log_evidence_and_gradient(&x, &y, LogHyper(tp)).unwrap().0;
                let fm = log_evidence_and_gradient(&x, &y, LogHyper(tm)).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1e-2);
                assert!(rel <= 1e-4, "component {k}: analytic {} vs fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn fit_needs_two_points_and_handles_flat_data() {
        let b = one_dim();
        let one = ObservationSet::from_pairs(vec![vec![0.1]], vec![1.0]).unwrap();
        assert!(matches!(
            fit_hyperparameters(&one, &b, &FitConfig::default()),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        let flat = ObservationSet::from_pairs(vec![vec![0.4], vec![0.4]], vec![2.0, 2.0]).unwrap();
        let h = fit_hyperparameters(&flat, &b, &FitConfig::default()).unwrap();
        assert_eq!(h.output_variance, FALLBACK_OUTPUT_VARIANCE);
        assert_eq!(h.length_scale, 2.0);
    }

    #[test]
    fn more_restarts_never_worse() {
        let mut rng = SeededRng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..15).map(|_| vec![rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (9.0 * x[0]).sin() + 0.05 * rng.random::<f64>()).collect();
        let data = ObservationSet::from_pairs(xs, ys).unwrap();
        let b = one_dim();
        let eval = |h: KernelHyper| GpModel::fit(&data, &b, h).unwrap().log_marginal_likelihood();
        let one = fit_hyperparameters(&data, &b, &FitConfig { restarts: 1, seed: 3, ..Default::default() }).unwrap();
        let ten = fit_hyperparameters(&data, &b, &FitConfig { restarts: 10, seed: 3, ..Default::default() }).unwrap();
        assert!(eval(ten) >= eval(one) - 1e-12);
    }

    #[test]
    fn fit_is_deterministic_given_seed() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let data = ObservationSet::from_pairs(xs, ys).unwrap();
        let cfg = FitConfig { seed: 99, ..Default::default() };
        let a = fit_hyperparameters(&data, &one_dim(), &cfg).unwrap();
        let b = fit_hyperparameters(&data, &one_dim(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
