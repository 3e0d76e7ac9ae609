//! One monotone-GP step in 1D: the distance model built from virtual
//! observations dips to its minimum near where the response crosses the
//! target, even though no real sample lies there.

use monobo::engine::{AlgoConfig, AlgoTag, BoState};
use monobo::mg::fit_mg_models;
use monobo::target::{MonotoneDeclaration, TargetSpec};
use monobo::Bounds;

fn main() -> monobo::Result<()> {
    let bounds = Bounds::new(&[(0.0, 1.0)])?;
    let f = |x: f64| 1.0 - x * x;
    let mut state = BoState::new(
        bounds,
        TargetSpec::new(0.7)?,
        vec![MonotoneDeclaration::decreasing(0)],
        AlgoTag::BoMg,
        AlgoConfig::default(),
        3,
    )?;
    for x in [0.05, 0.2, 0.35, 0.75, 0.9] {
        state.add_initial(vec![x], f(x))?;
    }
    let mcfg = state.config.mg_config(1);
    let models = fit_mg_models(&state, &mcfg)?;
    println!(
        "{} virtual points, max variance ratio {:.3}",
        models.virtual_obs.len(),
        models.max_ratio
    );
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=40 {
        let x = i as f64 / 40.0;
        let g = models.combined.predict(&[x])?;
        if g.mean < best.0 {
            best = (g.mean, x);
        }
        println!("x={x:.3}  g mean={:.4}  sd={:.4}", g.mean, g.std_dev());
    }
    println!("model minimum at x={:.3}; true crossing at x={:.3}", best.1, 0.3f64.sqrt());

    let rec = monobo::engine::suggest(&state)?;
    println!("next suggestion {:?}, beta {:?}", rec.x_next, rec.diagnostics.coefficient);
    Ok(())
}
