//! Optimization loops: standard GP-LCB, derivative-sign BO, monotone-GP BO
//! and a uniform random baseline, sharing one state and trace format.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{alpha_t, minimize_acquisition, LcbSchedule, SearchConfig};
use crate::bounds::Bounds;
use crate::error::{input_err, Error, Result};
use crate::gp::{fit_hyperparameters, FitConfig, GpModel, ObservationSet, PredictiveDistribution};
use crate::kernel::KernelHyper;
use crate::mg::{step_bo_mg, MgConfig};
use crate::monotonic::{ep_fit, EpConfig, ProbitConfig};
use crate::sampling::{derive_seed, rng_for, uniform_point, Stream};
use crate::target::{derive_ds_signs, validate_declarations, MonotoneDeclaration, TargetSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoTag {
    Standard,
    BoDs,
    BoMg,
    Random,
}

impl AlgoTag {
    pub const ALL: [AlgoTag; 4] = [AlgoTag::Standard, AlgoTag::BoDs, AlgoTag::BoMg, AlgoTag::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgoTag::Standard => "standard",
            AlgoTag::BoDs => "bo_ds",
            AlgoTag::BoMg => "bo_mg",
            AlgoTag::Random => "random",
        }
    }

    pub fn needs_declarations(self) -> bool {
        matches!(self, AlgoTag::BoDs | AlgoTag::BoMg)
    }
}

impl fmt::Display for AlgoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgoTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoTag::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| Error::Input(format!("unknown algorithm '{s}'")))
    }
}

/// Tunables shared by every algorithm. `mg = None` picks the defaults for
/// the problem dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgoConfig {
    pub fit_restarts: usize,
    pub fit_max_iters: usize,
    pub length_scale_range: (f64, f64),
    pub num_candidates: usize,
    pub polish_starts: usize,
    pub polish_evals: usize,
    pub delta: f64,
    pub alpha_scale: f64,
    pub tail_a: f64,
    pub tail_b: f64,
    pub probit: ProbitConfig,
    pub ep: EpConfig,
    pub ds_sites_per_obs: usize,
    pub mg: Option<MgConfig>,
    /// Stop once the best distance reaches this value.
    pub tolerance: Option<f64>,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        let search = SearchConfig::default();
        Self {
            fit_restarts: fit.restarts,
            fit_max_iters: fit.max_iters,
            length_scale_range: fit.length_scale_range,
            num_candidates: search.num_candidates,
            polish_starts: search.polish_starts,
            polish_evals: search.polish_evals,
            delta: 0.1,
            alpha_scale: 0.1,
            tail_a: 1.0,
            tail_b: 1.0,
            probit: ProbitConfig::default(),
            ep: EpConfig::default(),
            ds_sites_per_obs: 2,
            mg: None,
            tolerance: None,
        }
    }
}

impl AlgoConfig {
    pub fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            restarts: self.fit_restarts,
            max_iters: self.fit_max_iters,
            length_scale_range: self.length_scale_range,
            seed,
        }
    }

    pub fn search_config(&self, seed: u64, deadline: Option<Instant>) -> SearchConfig {
        SearchConfig {
            num_candidates: self.num_candidates,
            polish_starts: self.polish_starts,
            polish_evals: self.polish_evals,
            seed,
            deadline,
            extra_candidates: Vec::new(),
        }
    }

    pub fn schedule(&self, dim: usize, length_scale: f64) -> Result<LcbSchedule> {
        let s = LcbSchedule {
            delta: self.delta,
            scale: self.alpha_scale,
            dim,
            tail_a: self.tail_a,
            tail_b: self.tail_b,
            length_scale,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn mg_config(&self, dim: usize) -> MgConfig {
        self.mg.clone().unwrap_or_else(|| MgConfig::for_dim(dim))
    }
}

/// Why a step did not follow its algorithm's normal path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Fallback {
    /// Too few observations for a model.
    ColdStart,
    /// Hyperparameter fit or GP construction failed; a random point was used.
    ModelFailure(String),
    /// Monotone inference failed; the standard step was used.
    EpFailure(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acquisition_value: Option<f64>,
    pub predicted_mean: Option<f64>,
    pub predicted_variance: Option<f64>,
    /// α for standard and sign-based steps, β for monotone-GP steps.
    pub coefficient: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Coefficient implied by the information-gain bound, for comparison.
    pub info_gain_coefficient: Option<f64>,
    pub sign_sites: usize,
    pub virtual_points: usize,
    pub hyper: Option<KernelHyper>,
    pub fallback: Option<Fallback>,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub x_next: Vec<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub distance: f64,
    pub best_distance: f64,
    pub coefficient: Option<f64>,
    pub max_ratio: Option<f64>,
    pub hyper: Option<KernelHyper>,
}

#[derive(Clone, Debug)]
pub struct BoState {
    pub bounds: Bounds,
    pub target: TargetSpec,
    pub declarations: Vec<MonotoneDeclaration>,
    pub observations: ObservationSet,
    /// Observations that belong to the initial design rather than to steps.
    pub initial_count: usize,
    pub algo: AlgoTag,
    pub config: AlgoConfig,
    pub seed: u64,
    pub trace: Vec<TraceRecord>,
    /// Wall-clock limit for the acquisition search of the next step.
    pub deadline: Option<Instant>,
}

impl BoState {
    pub fn new(
        bounds: Bounds,
        target: TargetSpec,
        declarations: Vec<MonotoneDeclaration>,
        algo: AlgoTag,
        config: AlgoConfig,
        seed: u64,
    ) -> Result<Self> {
        validate_declarations(&declarations, bounds.dim())?;
        if algo.needs_declarations() && declarations.is_empty() {
            return input_err(format!("{algo} needs at least one monotone declaration"));
        }
        Ok(Self {
            bounds,
            target,
            declarations,
            observations: ObservationSet::new(),
            initial_count: 0,
            algo,
            config,
            seed,
            trace: Vec::new(),
            deadline: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// 1-based index of the next model-based step.
    pub fn iteration(&self) -> usize {
        self.observations.len().saturating_sub(self.initial_count) + 1
    }

    pub fn distances(&self) -> ObservationSet {
        self.observations.map_responses(|y| self.target.distance(y))
    }

    pub fn best_distance(&self) -> Option<f64> {
        self.observations
            .ys
            .iter()
            .map(|&y| self.target.distance(y))
            .min_by(f64::total_cmp)
    }

    /// Index of the observation closest to the target; earliest on ties.
    pub fn incumbent(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &y) in self.observations.ys.iter().enumerate() {
            let d = self.target.distance(y);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// `dim + 1` uniform points drawn from the seed's initial-design stream.
    pub fn initial_design(&self) -> Vec<Vec<f64>> {
        initial_design(&self.bounds, self.seed, self.dim() + 1)
    }

    /// Adds an initial-design observation. Only valid before any step.
    pub fn add_initial(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if self.observations.len() != self.initial_count {
            return input_err("initial observations must precede model-based steps");
        }
        self.check_observation(&x, y)?;
        self.observations.push(x, y);
        self.initial_count += 1;
        Ok(())
    }

    /// Evaluates and records the initial design.
    pub fn initialize<E>(&mut self, mut evaluator: E) -> Result<()>
    where
        E: FnMut(&[f64]) -> Result<f64>,
    {
        for x in self.initial_design() {
            let y = evaluator(&x)?;
            self.add_initial(x, y)?;
        }
        Ok(())
    }

    fn check_observation(&self, x: &[f64], y: f64) -> Result<()> {
        self.bounds.check_point(x)?;
        if !self.bounds.contains(x) {
            return input_err(format!("point {x:?} lies outside the bounds"));
        }
        if !y.is_finite() {
            return Err(Error::Evaluator(format!("non-finite response {y}")));
        }
        Ok(())
    }

    /// Records the outcome of a step.
    pub fn record(&mut self, x: Vec<f64>, y: f64, diagnostics: &Diagnostics) -> Result<()> {
        self.check_observation(&x, y)?;
        let iter = self.iteration();
        let distance = self.target.distance(y);
        let best_distance = self.best_distance().map_or(distance, |b| b.min(distance));
        self.observations.push(x.clone(), y);
        self.trace.push(TraceRecord {
            iter,
            x,
            y,
            distance,
            best_distance,
            coefficient: diagnostics.coefficient,
            max_ratio: diagnostics.max_ratio,
            hyper: diagnostics.hyper,
        });
        Ok(())
    }
}

/// `count` uniform points from the seed's initial-design stream. Designs of
/// different sizes from one seed share their leading points.
pub fn initial_design(bounds: &Bounds, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 0, Stream::InitialDesign);
    (0..count).map(|_| uniform_point(bounds, &mut rng)).collect()
}

/// Next suggestion for the state's algorithm.
pub fn suggest(state: &BoState) -> Result<Recommendation> {
    match state.algo {
        AlgoTag::Standard => step_standard(state),
        AlgoTag::BoDs => step_bo_ds(state),
        AlgoTag::BoMg => step_bo_mg(state, &state.config.mg_config(state.dim())),
        AlgoTag::Random => Ok(step_random(state)),
    }
}

pub fn step_random(state: &BoState) -> Recommendation {
    let mut rng = rng_for(state.seed, state.iteration() as u64, Stream::Random);
    Recommendation {
        x_next: uniform_point(&state.bounds, &mut rng),
        diagnostics: Diagnostics::default(),
    }
}

pub(crate) fn fallback_random(state: &BoState, reason: Fallback) -> Recommendation {
    let mut rec = step_random(state);
    rec.diagnostics.fallback = Some(reason);
    rec
}

/// Hyperparameters of the distance model, shared by all model-based steps.
pub(crate) fn fit_distance_hyper(state: &BoState, g: &ObservationSet) -> Result<KernelHyper> {
    let seed = derive_seed(state.seed, state.iteration() as u64, Stream::GHyper);
    fit_hyperparameters(g, &state.bounds, &state.config.fit_config(seed))
}

/// Minimizes the LCB of `predict` with coefficient `coef`.
pub(crate) fn lcb_recommendation<P>(state: &BoState, predict: P, coef: f64, hyper: KernelHyper) -> Result<Recommendation>
where
    P: Fn(&[f64]) -> PredictiveDistribution,
{
    let seed = derive_seed(state.seed, state.iteration() as u64, Stream::Acquisition);
    let cfg = state.config.search_config(seed, state.deadline);
    let out = minimize_acquisition(predict, &state.bounds, coef, &cfg)?;
    Ok(Recommendation {
        x_next: out.x,
        diagnostics: Diagnostics {
            acquisition_value: Some(out.value),
            predicted_mean: Some(out.prediction.mean),
            predicted_variance: Some(out.prediction.variance),
            coefficient: Some(coef),
            hyper: Some(hyper),
            timed_out: out.timed_out,
            ..Diagnostics::default()
        },
    })
}

/// GP-LCB on the distance-to-target observations.
pub fn step_standard(state: &BoState) -> Result<Recommendation> {
    if state.observations.len() < 2 {
        return Ok(fallback_random(state, Fallback::ColdStart));
    }
    let g = state.distances();
    let fitted = fit_distance_hyper(state, &g).and_then(|h| Ok((h, GpModel::fit(&g, &state.bounds, h)?)));
    let (hyper, gp) = match fitted {
        Ok(v) => v,
        Err(e) => return Ok(fallback_random(state, Fallback::ModelFailure(e.to_string()))),
    };
    let alpha = alpha_t(state.iteration(), &state.config.schedule(state.dim(), hyper.length_scale)?);
    let bounds = &state.bounds;
    lcb_recommendation(state, |x| gp.predict_unit(&bounds.to_unit(x)), alpha, hyper)
}

/// GP-LCB on a distance model conditioned on the derivative signs implied
/// by the monotone declarations.
pub fn step_bo_ds(state: &BoState) -> Result<Recommendation> {
    if state.declarations.is_empty() {
        return input_err("derivative-sign steps need at least one monotone declaration");
    }
    if state.observations.len() < 2 {
        return Ok(fallback_random(state, Fallback::ColdStart));
    }
    let g = state.distances();
    let hyper = match fit_distance_hyper(state, &g) {
        Ok(h) => h,
        Err(e) => return Ok(fallback_random(state, Fallback::ModelFailure(e.to_string()))),
    };
    let mut signs = Vec::new();
    for decl in &state.declarations {
        signs.extend(derive_ds_signs(
            &state.observations,
            &state.target,
            &state.bounds,
            decl,
            state.config.ds_sites_per_obs,
        )?);
    }
    let cfg = &state.config;
    let ep = match ep_fit(&g, &signs, &state.bounds, hyper, &cfg.probit, &cfg.ep) {
        Ok(ep) => ep,
        Err(Error::EpFailure { reason, .. }) => {
            let mut rec = step_standard(state)?;
            rec.diagnostics.fallback = Some(Fallback::EpFailure(reason));
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    let alpha = alpha_t(state.iteration(), &cfg.schedule(state.dim(), hyper.length_scale)?);
    let bounds = &state.bounds;
    let mut rec = lcb_recommendation(state, |x| ep.predict_unit(&bounds.to_unit(x)), alpha, hyper)?;
    rec.diagnostics.sign_sites = signs.len();
    Ok(rec)
}

/// Why `run_loop` returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Tolerance,
}

/// Runs `budget` suggest/evaluate/record cycles, stopping early once the
/// configured tolerance is met. If the evaluator fails, the error is
/// returned and the state keeps every observation recorded before it.
pub fn run_loop<E>(state: &mut BoState, mut evaluator: E, budget: usize) -> Result<StopReason>
where
    E: FnMut(&[f64]) -> Result<f64>,
{
    if budget == 0 {
        return input_err("budget must be >= 1");
    }
    for _ in 0..budget {
        if let (Some(tol), Some(best)) = (state.config.tolerance, state.best_distance()) {
            if best <= tol {
                return Ok(StopReason::Tolerance);
            }
        }
        let rec = suggest(state)?;
        let y = evaluator(&rec.x_next)?;
        if !y.is_finite() {
            return Err(Error::Evaluator(format!("non-finite response {y} at {:?}", rec.x_next)));
        }
        state.record(rec.x_next, y, &rec.diagnostics)?;
    }
    if let (Some(tol), Some(best)) = (state.config.tolerance, state.best_distance()) {
        if best <= tol {
            return Ok(StopReason::Tolerance);
        }
    }
    Ok(StopReason::Budget)
}

/// Writes the trace as CSV: `t, x1..xD, y, g, best_g, alpha_or_beta, algo, seed`.
pub fn write_trace_csv<W: Write>(state: &BoState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=state.dim()).map(|d| format!("x{d}")));
    header.extend(["y", "g", "best_g", "alpha_or_beta", "algo", "seed"].map(String::from));
    w.write_record(&header)?;
    for r in &state.trace {
        let mut row = vec![r.iter.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(r.y.to_string());
        row.push(r.distance.to_string());
        row.push(r.best_distance.to_string());
        row.push(r.coefficient.map(|c| c.to_string()).unwrap_or_default());
        row.push(state.algo.to_string());
        row.push(state.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(algo: AlgoTag, seed: u64) -> BoState {
        let b = Bounds::uniform(2, 0.0, 5.0).unwrap();
        BoState::new(
            b,
            TargetSpec::new(1.5).unwrap(),
            vec![MonotoneDeclaration::decreasing(0)],
            algo,
            AlgoConfig::default(),
            seed,
        )
        .unwrap()
    }

    fn bowl(x: &[f64]) -> Result<f64> {
        Ok(((x[0] - 5.0).powi(2) + (x[1] - 4.0).powi(2)) / 20.0)
    }

    #[test]
    fn algo_tags_round_trip() {
        for a in AlgoTag::ALL {
            assert_eq!(a.to_string().parse::<AlgoTag>().unwrap(), a);
            let json = serde_json_like(a);
            assert_eq!(json, a.as_str());
        }
        assert!("bo".parse::<AlgoTag>().is_err());
    }

    fn serde_json_like(a: AlgoTag) -> String {
        // csv serializes unit variants by their serde name
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
        w.serialize(a).unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap().trim().to_string()
    }

    #[test]
    fn monotone_algorithms_need_declarations() {
        let b = Bounds::unit(1);
        let t = TargetSpec::new(0.0).unwrap();
        for algo in [AlgoTag::BoDs, AlgoTag::BoMg] {
            assert!(BoState::new(b.clone(), t, vec![], algo, AlgoConfig::default(), 0).is_err());
        }
        assert!(BoState::new(b, t, vec![], AlgoTag::Standard, AlgoConfig::default(), 0).is_ok());
    }

    #[test]
    fn cold_start_is_random_and_flagged() {
        let s = state(AlgoTag::Standard, 3);
        let rec = step_standard(&s).unwrap();
        assert_eq!(rec.diagnostics.fallback, Some(Fallback::ColdStart));
        assert!(s.bounds.contains(&rec.x_next));
    }

    #[test]
    fn random_steps_are_feasible_and_centred() {
        let mut s = state(AlgoTag::Random, 11);
        let n = 10_000;
        let mut sum = [0.0; 2];
        for i in 0..n {
            s.observations.push(vec![0.0, 0.0], i as f64);
            let rec = step_random(&s);
            assert!(s.bounds.contains(&rec.x_next));
            sum[0] += rec.x_next[0];
            sum[1] += rec.x_next[1];
        }
        // uniform on [0, 5]: sd 5/√12
        let se = 5.0 / 12f64.sqrt() / (n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64 - 2.5).abs() < 3.0 * se);
        }
        let a = step_random(&state(AlgoTag::Random, 4));
        let b = step_random(&state(AlgoTag::Random, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn replay_is_deterministic() {
        let mut a = state(AlgoTag::Standard, 5);
        a.initialize(bowl).unwrap();
        let mut b = a.clone();
        run_loop(&mut a, bowl, 4).unwrap();
        run_loop(&mut b, bowl, 4).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(step_standard(&a).unwrap(), step_standard(&b).unwrap());
    }

    #[test]
    fn loop_counts_and_best_so_far() {
        let mut s = state(AlgoTag::BoDs, 2);
        s.initialize(bowl).unwrap();
        assert_eq!(s.initial_count, 3);
        assert_eq!(run_loop(&mut s, bowl, 6).unwrap(), StopReason::Budget);
        assert_eq!(s.trace.len(), 6);
        assert_eq!(s.trace.iter().map(|r| r.iter).collect::<Vec<_>>(), (1..=6).collect::<Vec<_>>());
        for w in s.trace.windows(2) {
            assert!(w[1].best_distance <= w[0].best_distance);
        }
        assert!(run_loop(&mut s, bowl, 0).is_err());
    }

    #[test]
    fn constant_evaluator() {
        let mut s = state(AlgoTag::Standard, 1);
        let c = |_: &[f64]| Ok(0.4);
        s.initialize(c).unwrap();
        run_loop(&mut s, c, 3).unwrap();
        assert!((s.best_distance().unwrap() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn tolerance_stops_early() {
        let mut s = state(AlgoTag::Standard, 1);
        s.config.tolerance = Some(0.5);
        let near = |_: &[f64]| Ok(1.4);
        s.initialize(near).unwrap();
        assert_eq!(run_loop(&mut s, near, 5).unwrap(), StopReason::Tolerance);
        assert!(s.trace.is_empty());
    }

    #[test]
    fn evaluator_failure_preserves_state() {
        let mut s = state(AlgoTag::Standard, 8);
        s.initialize(bowl).unwrap();
        let mut calls = 0;
        let flaky = |x: &[f64]| {
            calls += 1;
            if calls == 3 {
                Err(Error::Evaluator("instrument offline".into()))
            } else {
                bowl(x)
            }
        };
        assert!(matches!(run_loop(&mut s, flaky, 5), Err(Error::Evaluator(_))));
        assert_eq!(s.trace.len(), 2);
        assert_eq!(s.observations.len(), 5);
    }

    #[test]
    fn all_on_target_emits_no_signs() {
        let mut s = state(AlgoTag::BoDs, 8);
        let on = |_: &[f64]| Ok(1.5);
        s.initialize(on).unwrap();
        let rec = step_bo_ds(&s).unwrap();
        assert_eq!(rec.diagnostics.sign_sites, 0);
    }

    #[test]
    fn trace_csv_layout() {
        let mut s = state(AlgoTag::Standard, 5);
        s.initialize(bowl).unwrap();
        run_loop(&mut s, bowl, 2).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,y,g,best_g,alpha_or_beta,algo,seed");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",standard,5"));
    }

    #[test]
    fn observations_outside_bounds_are_rejected() {
        let mut s = state(AlgoTag::Standard, 5);
        assert!(s.add_initial(vec![6.0, 1.0], 0.0).is_err());
        assert!(s.add_initial(vec![1.0, 1.0], f64::NAN).is_err());
    }
}
