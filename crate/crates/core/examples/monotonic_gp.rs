//! A GP told that the response decreases: four samples plus five negative
//! derivative signs, compared with the unconstrained fit.

use monobo::gp::{fit_hyperparameters, FitConfig, GpModel, ObservationSet};
use monobo::monotonic::{ep_fit, place_sign_sites, EpConfig, ProbitConfig};
use monobo::target::Direction;
use monobo::Bounds;

fn main() -> monobo::Result<()> {
    let bounds = Bounds::unit(1);
    let f = |x: f64| 0.5 - 1.0 / (1.0 + (-6.0 * (x - 0.5)).exp());
    let xs = [0.1, 0.35, 0.6, 0.85];
    let data = ObservationSet::from_pairs(xs.iter().map(|&x| vec![x]).collect(), xs.iter().map(|&x| f(x)).collect())?;
    let hyper = fit_hyperparameters(&data, &bounds, &FitConfig::default())?;

    let plain = GpModel::fit(&data, &bounds, hyper)?;
    let signs = place_sign_sites(&bounds, &[(0, Direction::Decreasing)], 5, &[0.5])?;
    let mono = ep_fit(&data, &signs, &bounds, hyper, &ProbitConfig::default(), &EpConfig::default())?;
    println!("EP converged={} after {} sweeps", mono.converged, mono.sweeps);
    for s in mono.sites() {
        println!("site mean {:>9.4} var {:.4e}", s.mean, s.variance);
    }
    println!("{:>5} {:>9} {:>9} {:>9}", "x", "plain", "monotone", "truth");
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        println!(
            "{x:>5.2} {:>9.4} {:>9.4} {:>9.4}",
            plain.predict(&[x])?.mean,
            mono.predict(&[x])?.mean,
            f(x)
        );
    }
    Ok(())
}
