//! One-dimensional sweeps through the fitted response and distance models,
//! for plotting.

use serde::{Deserialize, Serialize};

use crate::engine::{fit_distance_hyper, AlgoTag, BoState};
use crate::error::{input_err, Result};
use crate::gp::{fit_hyperparameters, GpModel, PredictiveDistribution};
use crate::mg::fit_mg_models;
use crate::monotonic::{ep_fit, place_sign_sites, EpState};
use crate::sampling::{derive_seed, Stream};
use crate::target::derive_ds_signs;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub coord: f64,
    pub mean_f: f64,
    pub var_f: f64,
    pub mean_g: f64,
    pub var_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSlice {
    pub dim: usize,
    /// False when there are too few observations to fit a model; `points`
    /// is then empty.
    pub model_ready: bool,
    pub points: Vec<SlicePoint>,
}

enum Model {
    Gp(GpModel),
    Ep(EpState),
}

impl Model {
    fn predict(&self, x: &[f64]) -> Result<PredictiveDistribution> {
        match self {
            Model::Gp(m) => m.predict(x),
            Model::Ep(m) => m.predict(x),
        }
    }
}

/// Sweeps coordinate `dim` across its bounds at `resolution` evenly spaced
/// values (endpoints included), holding the other coordinates at `fixed`.
/// The response model is monotone when the state has declarations; the
/// distance model is the one the state's algorithm uses.
pub fn posterior_slice(state: &BoState, dim: usize, fixed: &[f64], resolution: usize) -> Result<PosteriorSlice> {
    let bounds = &state.bounds;
    if dim >= bounds.dim() {
        return input_err(format!("dimension {dim} out of range"));
    }
    if resolution < 2 {
        return input_err("resolution must be >= 2");
    }
    bounds.check_point(fixed)?;
    if state.observations.len() < 2 {
        return Ok(PosteriorSlice {
            dim,
            model_ready: false,
            points: Vec::new(),
        });
    }
    let cfg = &state.config;
    let t = state.iteration() as u64;
    let g = state.distances();
    let mcfg = cfg.mg_config(state.dim());

    let (f_model, g_model) = if state.algo == AlgoTag::BoMg {
        let m = fit_mg_models(state, &mcfg)?;
        (Model::Ep(m.f_model), Model::Gp(m.combined))
    } else {
        let f_hyper = fit_hyperparameters(
            &state.observations,
            bounds,
            &cfg.fit_config(derive_seed(state.seed, t, Stream::FHyper)),
        )?;
        let f_model = if state.declarations.is_empty() {
            Model::Gp(GpModel::fit(&state.observations, bounds, f_hyper)?)
        } else {
            let anchor = state.observations.xs[state.incumbent().expect("at least two observations")].clone();
            let dims: Vec<_> = state.declarations.iter().map(|d| (d.dim, d.direction)).collect();
            let sites = place_sign_sites(bounds, &dims, mcfg.sites_per_dim, &anchor)?;
            Model::Ep(ep_fit(&state.observations, &sites, bounds, f_hyper, &cfg.probit, &cfg.ep)?)
        };
        let g_hyper = fit_distance_hyper(state, &g)?;
        let g_model = if state.algo == AlgoTag::BoDs {
            let mut signs = Vec::new();
            for decl in &state.declarations {
                signs.extend(derive_ds_signs(&state.observations, &state.target, bounds, decl, cfg.ds_sites_per_obs)?);
            }
            Model::Ep(ep_fit(&g, &signs, bounds, g_hyper, &cfg.probit, &cfg.ep)?)
        } else {
            Model::Gp(GpModel::fit(&g, bounds, g_hyper)?)
        };
        (f_model, g_model)
    };

    let (lo, hi) = (bounds.lower(dim), bounds.upper(dim));
    let mut x = fixed.to_vec();
    let mut points = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let coord = if i + 1 == resolution {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        };
        x[dim] = coord;
        let f = f_model.predict(&x)?;
        let gp = g_model.predict(&x)?;
        points.push(SlicePoint {
            coord,
            mean_f: f.mean,
            var_f: f.variance,
            mean_g: gp.mean,
            var_g: gp.variance,
        });
    }
    Ok(PosteriorSlice {
        dim,
        model_ready: true,
        points,
    })
}
