//! GP posterior conditioned on function observations and derivative-sign
//! observations.
//!
//! The latent vector is `[f(X); ∂f(X_s)]` under the joint SE prior. Function
//! observations enter through their exact Gaussian likelihood; each sign
//! enters through a probit likelihood `Φ(s·f′/ν)` that expectation
//! propagation replaces with an un-normalized Gaussian site. Because the
//! probit is log-concave, site precisions stay non-negative and the usual
//! `B = I + S½ K S½` factorization applies throughout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{input_err, Error, Result};
use crate::gp::{ObservationSet, PredictiveDistribution};
use crate::kernel::{build_joint_covariance, k_dvalue, k_value, DerivativeSite, KernelHyper};
use crate::normal;
use crate::sampling::SeededRng;
use crate::target::{equally_spaced, push_dedup, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }

    pub fn from_value(v: i32) -> Result<Self> {
        match v {
            -1 => Ok(Sign::Negative),
            1 => Ok(Sign::Positive),
            other => input_err(format!("derivative sign must be ±1, got {other}")),
        }
    }
}

/// Asserts the sign of `∂f/∂x_dim` at `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignObservation {
    pub x: Vec<f64>,
    pub dim: usize,
    pub sign: Sign,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbitConfig {
    pub steepness: f64,
}

impl Default for ProbitConfig {
    fn default() -> Self {
        Self { steepness: 0.01 }
    }
}

impl ProbitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steepness > 0.0 && self.steepness.is_finite()) {
            return input_err(format!("probit steepness must be > 0, got {}", self.steepness));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// When set, each sweep visits sites in a fresh random order drawn from
    /// this seed instead of index order.
    pub shuffle_seed: Option<u64>,
    /// Cap on `t + m`; the fit is cubic in this count.
    pub max_points: usize,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self {
            damping: 0.8,
            tolerance: 1e-6,
            max_sweeps: 200,
            shuffle_seed: None,
            max_points: 500,
        }
    }
}

/// `Φ(s·f′/ν)`.
pub fn probit_sign_likelihood(sign: Sign, fprime: f64, steepness: f64) -> f64 {
    normal::cdf(sign.value() * fprime / steepness)
}

/// Site approximation `Z̃ · N(f′ | μ̃, σ̃²)`. A site that has not been
/// updated yet has infinite variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub mean: f64,
    pub variance: f64,
    pub log_normalizer: f64,
}

#[derive(Clone, Debug)]
pub struct EpState {
    hyper: KernelHyper,
    bounds: Bounds,
    steepness: f64,
    x_unit: Vec<Vec<f64>>,
    sites_unit: Vec<(Vec<f64>, usize, Sign)>,
    tau: DVector<f64>,
    nu: DVector<f64>,
    log_z: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub skipped_updates: usize,
    chol_b: Cholesky<f64, Dyn>,
    sqrt_tau: DVector<f64>,
    weights: DVector<f64>,
    post_mean: DVector<f64>,
    post_var: DVector<f64>,
}

impl EpState {
    pub fn hyper(&self) -> &KernelHyper {
        &self.hyper
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn steepness(&self) -> f64 {
        self.steepness
    }

    pub fn num_observations(&self) -> usize {
        self.x_unit.len()
    }

    pub fn num_signs(&self) -> usize {
        self.sites_unit.len()
    }

    pub fn sites(&self) -> Vec<SiteParams> {
        let t = self.x_unit.len();
        (0..self.sites_unit.len())
            .map(|i| {
                let tau = self.tau[t + i];
                let nu = self.nu[t + i];
                SiteParams {
                    mean: if tau > 0.0 { nu / tau } else { 0.0 },
                    variance: if tau > 0.0 { 1.0 / tau } else { f64::INFINITY },
                    log_normalizer: self.log_z[i],
                }
            })
            .collect()
    }

    /// Approximate posterior mean and variance of each latent at the
    /// conditioning points: function values first, then derivatives.
    pub fn latent_marginals(&self) -> Vec<PredictiveDistribution> {
        self.post_mean
            .iter()
            .zip(self.post_var.iter())
            .map(|(&mean, &variance)| PredictiveDistribution { mean, variance })
            .collect()
    }

    fn cross_cov(&self, u: &[f64]) -> DVector<f64> {
        let t = self.x_unit.len();
        let n = t + self.sites_unit.len();
        DVector::from_fn(n, |j, _| {
            if j < t {
                k_value(u, &self.x_unit[j], &self.hyper)
            } else {
                let (s, d, _) = &self.sites_unit[j - t];
                k_dvalue(u, s, *d, &self.hyper)
            }
        })
    }

    pub(crate) fn predict_unit(&self, u: &[f64]) -> PredictiveDistribution {
        let prior = self.hyper.output_variance;
        if self.tau.is_empty() {
            return PredictiveDistribution { mean: 0.0, variance: prior };
        }
        let kx = self.cross_cov(u);
        let mean = kx.dot(&self.weights);
        let v = self
            .chol_b
            .l_dirty()
            .solve_lower_triangular(&kx.component_mul(&self.sqrt_tau))
            .expect("cholesky factor has a non-zero diagonal");
        let variance = (prior - v.norm_squared()).clamp(0.0, prior);
        PredictiveDistribution { mean, variance }
    }

    pub fn predict(&self, x: &[f64]) -> Result<PredictiveDistribution> {
        self.bounds.check_point(x)?;
        Ok(self.predict_unit(&self.bounds.to_unit(x)))
    }
}

pub fn predict_monotonic(state: &EpState, x: &[f64]) -> Result<PredictiveDistribution> {
    state.predict(x)
}

struct Factorization {
    chol_b: Cholesky<f64, Dyn>,
    sqrt_tau: DVector<f64>,
    sigma: DMatrix<f64>,
    mu: DVector<f64>,
}

/// Recomputes the approximate posterior from site natural parameters.
fn factorize(k: &DMatrix<f64>, tau: &DVector<f64>, nu: &DVector<f64>) -> Option<Factorization> {
    let sqrt_tau = tau.map(|v| v.max(0.0).sqrt());
    let n = k.nrows();
    let mut b = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += sqrt_tau[i] * k[(i, j)] * sqrt_tau[j];
        }
    }
    let chol_b = Cholesky::new(b)?;
    let mut sk = k.clone();
    for i in 0..n {
        sk.row_mut(i).scale_mut(sqrt_tau[i]);
    }
    let v = chol_b.l_dirty().solve_lower_triangular(&sk)?;
    let sigma = k - v.transpose() * &v;
    let mu = &sigma * nu;
    if mu.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
        return None;
    }
    Some(Factorization {
        chol_b,
        sqrt_tau,
        sigma,
        mu,
    })
}

/// Tilted moments of `Φ(s·f/ν)·N(f | m, v)`: `(ln Ẑ, mean, variance)`.
fn probit_moments(sign: f64, m: f64, v: f64, steepness: f64) -> (f64, f64, f64) {
    let denom = (steepness * steepness + v).sqrt();
    let z = sign * m / denom;
    let ratio = normal::pdf_over_cdf(z);
    let mean = m + sign * v * ratio / denom;
    let var = v - v * v * ratio * (z + ratio) / (denom * denom);
    (normal::log_cdf(z), mean, var)
}

/// Runs EP over the sign sites. Function observations use the kernel's noise
/// variance; all inputs are rescaled to the unit cube of `bounds` first, so
/// `steepness` applies to derivatives in unit-cube coordinates.
pub fn ep_fit(
    data: &ObservationSet,
    signs: &[SignObservation],
    bounds: &Bounds,
    hyper: KernelHyper,
    probit: &ProbitConfig,
    cfg: &EpConfig,
) -> Result<EpState> {
    hyper.validate()?;
    probit.validate()?;
    data.validate()?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Config(format!("damping must be in (0, 1], got {}", cfg.damping)));
    }
    let t = data.len();
    let m = signs.len();
    if t + m > cfg.max_points {
        return Err(Error::Config(format!(
            "{t} observations + {m} sign sites exceed the cap of {}",
            cfg.max_points
        )));
    }
    for x in &data.xs {
        bounds.check_point(x)?;
    }
    for s in signs {
        bounds.check_point(&s.x)?;
        if s.dim >= bounds.dim() {
            return input_err(format!("sign site dimension {} out of range", s.dim));
        }
    }

    let x_unit: Vec<Vec<f64>> = data.xs.iter().map(|x| bounds.to_unit(x)).collect();
    let sites_unit: Vec<(Vec<f64>, usize, Sign)> = signs
        .iter()
        .map(|s| (bounds.to_unit(&s.x), s.dim, s.sign))
        .collect();
    let deriv: Vec<DerivativeSite<'_>> = sites_unit
        .iter()
        .map(|(x, d, _)| DerivativeSite { x, dim: *d })
        .collect();
    let mut k = build_joint_covariance(&x_unit, &deriv, &hyper)?;
    let jitter = hyper.jitter();
    for i in t..t + m {
        k[(i, i)] += jitter;
    }

    let n = t + m;
    let obs_precision = 1.0 / (hyper.noise_variance + jitter);
    let mut tau = DVector::zeros(n);
    let mut nu = DVector::zeros(n);
    for i in 0..t {
        tau[i] = obs_precision;
        nu[i] = data.ys[i] * obs_precision;
    }
    let mut log_z = vec![0.0; m];

    let mut fac = factorize(&k, &tau, &nu).ok_or_else(|| Error::EpFailure {
        reason: "prior with observations is not positive definite".into(),
        last_stable: None,
    })?;

    let make_state = |fac: &Factorization,
                      tau: &DVector<f64>,
                      nu: &DVector<f64>,
                      log_z: &[f64],
                      converged: bool,
                      sweeps: usize,
                      skipped: usize| {
        // weights w = ν − S½ B⁻¹ S½ K ν, so that the predictive mean is k*ᵀ w
        let knu = &k * nu;
        let b_inv = fac.chol_b.solve(&knu.component_mul(&fac.sqrt_tau));
        let weights = nu - b_inv.component_mul(&fac.sqrt_tau);
        EpState {
            hyper,
            bounds: bounds.clone(),
            steepness: probit.steepness,
            x_unit: x_unit.clone(),
            sites_unit: sites_unit.clone(),
            tau: tau.clone(),
            nu: nu.clone(),
            log_z: log_z.to_vec(),
            converged,
            sweeps,
            skipped_updates: skipped,
            chol_b: fac.chol_b.clone(),
            sqrt_tau: fac.sqrt_tau.clone(),
            weights,
            post_mean: fac.mu.clone(),
            post_var: fac.sigma.diagonal(),
        }
    };

    if m == 0 {
        return Ok(make_state(&fac, &tau, &nu, &log_z, true, 0, 0));
    }

    let steep = probit.steepness;
    let mut damping = cfg.damping;
    let mut order: Vec<usize> = (0..m).collect();
    let mut shuffler = cfg.shuffle_seed.map(SeededRng::seed_from_u64);
    let mut converged = false;
    let mut sweeps = 0;
    let mut skipped = 0;
    let mut sigma = fac.sigma.clone();
    let mut mu = fac.mu.clone();

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        if let Some(rng) = shuffler.as_mut() {
            order.shuffle(rng);
        }
        let mut max_change: f64 = 0.0;
        for &i in &order {
            let j = t + i;
            let sjj = sigma[(j, j)];
            let tau_cav = 1.0 / sjj - tau[j];
            if !(tau_cav > 0.0) || !tau_cav.is_finite() {
                skipped += 1;
                damping *= 0.5;
                continue;
            }
            let nu_cav = mu[j] / sjj - nu[j];
            let m_cav = nu_cav / tau_cav;
            let v_cav = 1.0 / tau_cav;
            let (lz, m_hat, v_hat) = probit_moments(sites_unit[i].2.value(), m_cav, v_cav, steep);
            let mut tau_new = 1.0 / v_hat - tau_cav;
            let mut nu_new = m_hat / v_hat - nu_cav;
            if !(tau_new >= 0.0) || !tau_new.is_finite() || !nu_new.is_finite() {
                skipped += 1;
                damping *= 0.5;
                continue;
            }
            tau_new = damping * tau_new + (1.0 - damping) * tau[j];
            nu_new = damping * nu_new + (1.0 - damping) * nu[j];

            let change = (tau_new - tau[j]).abs() * sjj + (nu_new - nu[j]).abs() * sjj.sqrt();
            max_change = max_change.max(change);

            let d_tau = tau_new - tau[j];
            let col = sigma.column(j).clone_owned();
            let denom = 1.0 + d_tau * sjj;
            sigma.ger(-d_tau / denom, &col, &col, 1.0);
            tau[j] = tau_new;
            nu[j] = nu_new;
            mu = &sigma * &nu;

            let site_var = if tau_new > 0.0 { 1.0 / tau_new } else { f64::INFINITY };
            let site_mean = if tau_new > 0.0 { nu_new / tau_new } else { 0.0 };
            log_z[i] = if site_var.is_finite() {
                lz + 0.5 * (2.0 * std::f64::consts::PI * (v_cav + site_var)).ln()
                    + (m_cav - site_mean).powi(2) / (2.0 * (v_cav + site_var))
            } else {
                lz
            };
        }

        match factorize(&k, &tau, &nu) {
            Some(f) => {
                sigma = f.sigma.clone();
                mu = f.mu.clone();
                fac = f;
            }
            None => {
                return Err(Error::EpFailure {
                    reason: format!("approximate posterior lost positive definiteness in sweep {sweeps}"),
                    last_stable: Some(Box::new(make_state(&fac, &tau, &nu, &log_z, false, sweeps, skipped))),
                });
            }
        }
        if max_change <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(make_state(&fac, &tau, &nu, &log_z, converged, sweeps, skipped))
}

/// Equally spaced sign sites along each monotone dimension; the remaining
/// coordinates are copied from `anchor`. One site per dimension sits at the
/// interval midpoint.
pub fn place_sign_sites(
    bounds: &Bounds,
    monotone_dims: &[(usize, Direction)],
    per_dim: usize,
    anchor: &[f64],
) -> Result<Vec<SignObservation>> {
    if per_dim == 0 {
        return input_err("at least one sign site per dimension is required");
    }
    bounds.check_point(anchor)?;
    let mut out = Vec::with_capacity(per_dim * monotone_dims.len());
    for &(d, direction) in monotone_dims {
        if d >= bounds.dim() {
            return input_err(format!("monotone dimension {d} out of range"));
        }
        for v in equally_spaced(bounds.lower(d), bounds.upper(d), per_dim) {
            let mut x = anchor.to_vec();
            x[d] = v;
            push_dedup(
                &mut out,
                SignObservation {
                    x,
                    dim: d,
                    sign: direction.derivative_sign(),
                },
                bounds,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpModel;

    #[test]
    fn probit_values() {
        assert_eq!(probit_sign_likelihood(Sign::Positive, 0.0, 0.01), 0.5);
        assert!(probit_sign_likelihood(Sign::Positive, 1.0, 0.01) >= 1.0 - 1e-12);
        let v = probit_sign_likelihood(Sign::Negative, 0.01, 0.01);
        assert!((v - 0.15865525393145707).abs() < 1e-12);
        assert!(probit_sign_likelihood(Sign::Positive, 0.3, 0.1) > probit_sign_likelihood(Sign::Positive, 0.2, 0.1));
    }

    #[test]
    fn sign_from_value() {
        assert_eq!(Sign::from_value(-1).unwrap(), Sign::Negative);
        assert!(Sign::from_value(0).is_err());
    }

    #[test]
    fn single_sign_tilts_derivative() {
        let b = Bounds::unit(1);
        let h = KernelHyper::new(1.0, 0.3, 0.01).unwrap();
        for sign in [Sign::Negative, Sign::Positive] {
            let s = [SignObservation { x: vec![0.5], dim: 0, sign }];
            let st = ep_fit(&ObservationSet::new(), &s, &b, h, &ProbitConfig::default(), &EpConfig::default()).unwrap();
            let marg = st.latent_marginals();
            assert_eq!(marg.len(), 1);
            assert_eq!(marg[0].mean.signum(), sign.value());
            assert!(st.converged);
        }
    }

    #[test]
    fn no_signs_reduces_to_standard_gp() {
        let b = Bounds::new(&[(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let data = ObservationSet::from_pairs(
            vec![vec![0.1, 0.2], vec![1.5, -0.7], vec![0.9, 0.9], vec![1.9, 0.0]],
            vec![0.3, -1.1, 0.8, 0.05],
        )
        .unwrap();
        let h = KernelHyper::new(0.9, 0.45, 0.01).unwrap();
        let gp = GpModel::fit(&data, &b, h).unwrap();
        let ep = ep_fit(&data, &[], &b, h, &ProbitConfig::default(), &EpConfig::default()).unwrap();
        for i in 0..10 {
            let x = [0.2 * i as f64, -1.0 + 0.2 * i as f64];
            let a = gp.predict(&x).unwrap();
            let c = ep.predict(&x).unwrap();
            assert!((a.mean - c.mean).abs() < 1e-10, "{} vs {}", a.mean, c.mean);
            assert!((a.variance - c.variance).abs() < 1e-10);
        }
    }

    #[test]
    fn site_placement() {
        let b = Bounds::new(&[(0.0, 5.0), (0.0, 5.0)]).unwrap();
        let s = place_sign_sites(&b, &[(0, Direction::Decreasing)], 5, &[1.0, 2.0]).unwrap();
        assert_eq!(s.iter().map(|o| o.x[0]).collect::<Vec<_>>(), vec![0.0, 1.25, 2.5, 3.75, 5.0]);
        assert!(s.iter().all(|o| o.sign == Sign::Negative && o.x[1] == 2.0));

        let s = place_sign_sites(&b, &[(0, Direction::Decreasing), (1, Direction::Increasing)], 5, &[1.0, 2.0]).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s[5..].iter().all(|o| o.sign == Sign::Positive && o.dim == 1));

        let s = place_sign_sites(&b, &[(1, Direction::Increasing)], 1, &[1.0, 2.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].x, vec![1.0, 2.5]);

        assert!(place_sign_sites(&b, &[(2, Direction::Increasing)], 5, &[1.0, 2.0]).is_err());
        assert!(place_sign_sites(&b, &[(0, Direction::Increasing)], 0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cap_on_conditioning_points() {
        let b = Bounds::unit(1);
        let h = KernelHyper::new(1.0, 0.3, 0.01).unwrap();
        let signs: Vec<SignObservation> = (0..6)
            .map(|i| SignObservation { x: vec![i as f64 / 5.0], dim: 0, sign: Sign::Positive })
            .collect();
        let cfg = EpConfig { max_points: 5, ..Default::default() };
        assert!(matches!(
            ep_fit(&ObservationSet::new(), &signs, &b, h, &ProbitConfig::default(), &cfg),
            Err(Error::Config(_))
        ));
    }
}
