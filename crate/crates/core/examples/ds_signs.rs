//! Derivative signs on the distance to target implied by a monotone
//! response. Observations on either side of the target leave an unsigned
//! gap where the crossing lies.

use monobo::gp::ObservationSet;
use monobo::target::{derive_ds_signs, MonotoneDeclaration, TargetSpec};
use monobo::Bounds;

fn main() -> monobo::Result<()> {
    let bounds = Bounds::new(&[(0.0, 3.0)])?;
    let f = |x: f64| (-x).exp();
    let target = TargetSpec::new(0.4)?;
    let mut obs = ObservationSet::new();
    for x in [0.3, 0.6, 1.8, 2.5] {
        obs.push(vec![x], f(x));
    }
    let signs = derive_ds_signs(&obs, &target, &bounds, &MonotoneDeclaration::decreasing(0), 4)?;
    for s in &signs {
        println!("x={:.3}  sign of dg/dx: {:+}", s.x[0], s.sign.value());
    }
    println!("crossing at x={:.3}", -target.target.ln());
    Ok(())
}
