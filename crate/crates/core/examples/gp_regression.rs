//! Fit kernel hyperparameters by maximum evidence and predict.

use monobo::gp::{fit_hyperparameters, FitConfig, GpModel, ObservationSet};
use monobo::Bounds;

fn main() -> monobo::Result<()> {
    let bounds = Bounds::new(&[(0.0, 10.0)])?;
    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 1.3 + 0.4]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (x[0] / 2.0).sin()).collect();
    let data = ObservationSet::from_pairs(xs, ys)?;

    let hyper = fit_hyperparameters(&data, &bounds, &FitConfig::default())?;
    println!("fitted {hyper:?}");
    let model = GpModel::fit(&data, &bounds, hyper)?;
    println!("log evidence {:.4}", model.log_marginal_likelihood());
    for i in 0..=10 {
        let x = i as f64;
        let p = model.predict(&[x])?;
        println!("x={x:>4.1}  mean={:>7.4}  sd={:.4}  truth={:>7.4}", p.mean, p.std_dev(), (x / 2.0).sin());
    }
    Ok(())
}
