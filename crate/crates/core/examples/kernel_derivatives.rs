//! Value/derivative covariances of the squared-exponential kernel and the
//! joint covariance matrix they assemble into.

use monobo::kernel::{build_joint_covariance, se_kernel, se_kernel_dd, se_kernel_dvalue, DerivativeSite, KernelHyper};

fn main() -> monobo::Result<()> {
    let h = KernelHyper::new(1.0, 0.3, 0.0)?;
    let a = [0.2, 0.5];
    let b = [0.4, 0.5];
    println!("k(a, b)          = {:.6}", se_kernel(&a, &b, &h)?);
    println!("cov(f(a), df/db0) = {:.6}", se_kernel_dvalue(&a, &b, 0, &h)?);
    println!("cov(df/da0, df/db0) = {:.6}", se_kernel_dd(&a, &b, 0, 0, &h)?);

    let values = vec![a.to_vec(), b.to_vec()];
    let sites = [DerivativeSite { x: &[0.3, 0.5], dim: 0 }];
    let k = build_joint_covariance(&values, &sites, &h)?;
    println!("joint covariance [f(a), f(b), df/dx0 at (0.3, 0.5)]:{k:.4}");
    Ok(())
}
