//! Synthetic target-value problems and a paired batch runner.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::engine::{run_loop, AlgoConfig, AlgoTag, BoState, TraceRecord};
use crate::error::{input_err, Error, Result};
use crate::sampling::{derive_seed, Stream};
use crate::target::{MonotoneDeclaration, TargetSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 6] = [
        BenchmarkId::F1,
        BenchmarkId::F2,
        BenchmarkId::F3,
        BenchmarkId::F4,
        BenchmarkId::F5,
        BenchmarkId::F6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkId::F1 => "f1",
            BenchmarkId::F2 => "f2",
            BenchmarkId::F3 => "f3",
            BenchmarkId::F4 => "f4",
            BenchmarkId::F5 => "f5",
            BenchmarkId::F6 => "f6",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            BenchmarkId::F1 | BenchmarkId::F4 => 2,
            BenchmarkId::F2 | BenchmarkId::F5 => 5,
            BenchmarkId::F3 | BenchmarkId::F6 => 7,
        }
    }

    pub fn spec(self) -> BenchmarkSpec {
        let (lo, hi, target) = match self {
            BenchmarkId::F1 => (0.0, 5.0, 1.5),
            BenchmarkId::F2 => (-2.0, 3.0, 1.5),
            BenchmarkId::F3 => (-3.0, 3.0, 1.3),
            BenchmarkId::F4 => (0.0, 5.0, 0.8),
            BenchmarkId::F5 | BenchmarkId::F6 => (0.0, 5.0, 1.5),
        };
        let declarations = match self {
            BenchmarkId::F1 | BenchmarkId::F2 | BenchmarkId::F3 => vec![MonotoneDeclaration::decreasing(0)],
            _ => vec![MonotoneDeclaration::decreasing(0), MonotoneDeclaration::increasing(1)],
        };
        BenchmarkSpec {
            id: self,
            bounds: Bounds::uniform(self.dim(), lo, hi).expect("static bounds are valid"),
            target: TargetSpec::new(target).expect("static target is finite"),
            declarations,
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkId::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown benchmark '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub id: BenchmarkId,
    pub bounds: Bounds,
    pub target: TargetSpec,
    pub declarations: Vec<MonotoneDeclaration>,
}

impl BenchmarkSpec {
    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        eval_benchmark(self.id, x)
    }
}

/// Un-normalized standard Gaussian bump `exp(−½‖z‖²)`.
fn bump(z: &[f64]) -> f64 {
    (-0.5 * z.iter().map(|v| v * v).sum::<f64>()).exp()
}

/// Closed-form value of a benchmark; `x` must lie inside its bounds.
pub fn eval_benchmark(id: BenchmarkId, x: &[f64]) -> Result<f64> {
    let spec_bounds = id.spec().bounds;
    spec_bounds.check_point(x)?;
    if !spec_bounds.contains(x) {
        return input_err(format!("{x:?} lies outside the bounds of {id}"));
    }
    let v = match id {
        BenchmarkId::F1 => ((x[0] - 5.0).powi(2) + (x[1] - 4.0).powi(2)) / 20.0,
        BenchmarkId::F2 | BenchmarkId::F3 => {
            ((x[0] - 3.0).powi(2) + (x[1] - 2.0).powi(2)) / 30.0 + bump(&x[2..])
        }
        // written as (5 − x1)·x2 so the response falls with x1 and rises with x2
        BenchmarkId::F4 => (5.0 - x[0]) * x[1] / 20.0,
        BenchmarkId::F5 | BenchmarkId::F6 => (5.0 - x[0]) * x[1] / 20.0 + bump(&x[2..]),
    };
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRun {
    pub algo: AlgoTag,
    pub trial: usize,
    pub seed: u64,
    pub initial: Vec<(Vec<f64>, f64)>,
    /// Best distance over the initial design.
    pub initial_best: f64,
    pub trace: Vec<TraceRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    pub benchmark: BenchmarkId,
    pub algos: Vec<AlgoTag>,
    pub trials: usize,
    pub budget: usize,
    pub seed: u64,
    pub runs: Vec<TrialRun>,
    pub curves: BTreeMap<AlgoTag, Curve>,
    pub failed_trials: usize,
}

impl BatchReport {
    /// Mean best distance after `iter` steps (1-based).
    pub fn mean_best_at(&self, algo: AlgoTag, iter: usize) -> Option<f64> {
        self.curves.get(&algo)?.mean.get(iter.checked_sub(1)?).copied()
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials).map(|t| trial_seed(self.seed, t)).collect()
    }
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, trial as u64, Stream::Trial)
}

/// Runs every `(algo, trial)` pair in parallel. Algorithms share the trial
/// seed, so they start from the same initial design within a trial.
/// Failed trials are kept in `runs` with their error and left out of the
/// curves.
pub fn run_batch(
    spec: &BenchmarkSpec,
    algos: &[AlgoTag],
    trials: usize,
    budget: usize,
    seed: u64,
    config: &AlgoConfig,
) -> Result<BatchReport> {
    if trials == 0 {
        return input_err("trials must be >= 1");
    }
    if budget == 0 {
        return input_err("budget must be >= 1");
    }
    if algos.is_empty() {
        return input_err("at least one algorithm is required");
    }
    let jobs: Vec<(AlgoTag, usize)> = algos.iter().flat_map(|&a| (0..trials).map(move |t| (a, t))).collect();
    let runs: Vec<TrialRun> = jobs
        .par_iter()
        .map(|&(algo, trial)| run_trial(spec, algo, trial, budget, trial_seed(seed, trial), config))
        .collect();

    let mut curves = BTreeMap::new();
    let mut failed_trials = 0;
    for &algo in algos {
        let ok: Vec<&TrialRun> = runs.iter().filter(|r| r.algo == algo && r.error.is_none()).collect();
        failed_trials += runs.iter().filter(|r| r.algo == algo && r.error.is_some()).count();
        curves.insert(algo, aggregate(&ok, budget));
    }
    Ok(BatchReport {
        benchmark: spec.id,
        algos: algos.to_vec(),
        trials,
        budget,
        seed,
        runs,
        curves,
        failed_trials,
    })
}

fn run_trial(spec: &BenchmarkSpec, algo: AlgoTag, trial: usize, budget: usize, seed: u64, config: &AlgoConfig) -> TrialRun {
    let declarations = if algo.needs_declarations() {
        spec.declarations.clone()
    } else {
        Vec::new()
    };
    let mut run = TrialRun {
        algo,
        trial,
        seed,
        initial: Vec::new(),
        initial_best: f64::INFINITY,
        trace: Vec::new(),
        error: None,
    };
    let result = BoState::new(spec.bounds.clone(), spec.target, declarations, algo, config.clone(), seed).and_then(|mut state| {
        let eval = |x: &[f64]| spec.evaluate(x);
        state.initialize(eval)?;
        let outcome = run_loop(&mut state, eval, budget);
        run.initial = state.observations.iter().take(state.initial_count).map(|(x, y)| (x.to_vec(), y)).collect();
        run.initial_best = run.initial.iter().map(|(_, y)| spec.target.distance(*y)).fold(f64::INFINITY, f64::min);
        run.trace = std::mem::take(&mut state.trace);
        outcome.map(|_| ())
    });
    if let Err(e) = result {
        run.error = Some(e.to_string());
    }
    run
}

/// Best distance after each step; a run that stopped early carries its
/// last value forward.
pub fn best_curve(run: &TrialRun, budget: usize) -> Vec<f64> {
    let mut best = run.initial_best;
    (0..budget)
        .map(|i| {
            if let Some(r) = run.trace.get(i) {
                best = best.min(r.best_distance);
            }
            best
        })
        .collect()
}

fn aggregate(runs: &[&TrialRun], budget: usize) -> Curve {
    let n = runs.len();
    if n == 0 {
        return Curve {
            mean: vec![f64::NAN; budget],
            stderr: vec![f64::NAN; budget],
            trials: 0,
        };
    }
    let curves: Vec<Vec<f64>> = runs.iter().map(|r| best_curve(r, budget)).collect();
    let mut mean = Vec::with_capacity(budget);
    let mut stderr = Vec::with_capacity(budget);
    for i in 0..budget {
        let m = curves.iter().map(|c| c[i]).sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = curves.iter().map(|c| (c[i] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        stderr.push(se);
    }
    Curve { mean, stderr, trials: n }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub const TRIAL_CSV_HEADER: [&str; 7] = ["algo", "trial", "iter", "best_distance", "distance", "beta_or_alpha", "max_ratio"];
pub const SUMMARY_CSV_HEADER: [&str; 5] = ["algo", "iter", "mean_best_distance", "stderr_best_distance", "trials"];

/// One row per `(algo, trial, iter)` of every successful trial.
pub fn write_trials_csv<W: Write>(report: &BatchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_CSV_HEADER)?;
    for run in report.runs.iter().filter(|r| r.error.is_none()) {
        for r in &run.trace {
            w.write_record([
                run.algo.to_string(),
                run.trial.to_string(),
                r.iter.to_string(),
                r.best_distance.to_string(),
                r.distance.to_string(),
                fmt_opt(r.coefficient),
                fmt_opt(r.max_ratio),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `(algo, iter)` with the mean and standard error of the best
/// distance across trials.
pub fn write_summary_csv<W: Write>(report: &BatchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_CSV_HEADER)?;
    for algo in &report.algos {
        let curve = &report.curves[algo];
        for i in 0..report.budget {
            w.write_record([
                algo.to_string(),
                (i + 1).to_string(),
                curve.mean[i].to_string(),
                curve.stderr[i].to_string(),
                curve.trials.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn text_summary(report: &BatchReport) -> String {
    let mut s = format!(
        "benchmark {}  trials {}  budget {}  seed {}  failed {}\n",
        report.benchmark, report.trials, report.budget, report.seed, report.failed_trials
    );
    let marks: Vec<usize> = [report.budget / 4, report.budget / 2, 3 * report.budget / 4, report.budget]
        .into_iter()
        .filter(|&i| i >= 1)
        .collect();
    for algo in &report.algos {
        let c = &report.curves[algo];
        s.push_str(&format!("{:<9}", algo.as_str()));
        for &i in &marks {
            s.push_str(&format!("  it{:<3} {:.4} ± {:.4}", i, c.mean[i - 1], c.stderr[i - 1]));
        }
        s.push('\n');
    }
    s
}

/// Writes the per-iteration summary CSV to `path` and the text summary next
/// to it with a `.txt` extension. Returns the text file path.
pub fn emit_report(report: &BatchReport, path: &Path) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_summary_csv(report, fs::File::create(path)?)?;
    let txt = path.with_extension("txt");
    fs::write(&txt, text_summary(report))?;
    Ok(txt)
}
