//! Growth of the approximation dimension on the UHF algebra and on the
//! commutative torus, with affine fits of `ln D` against `ln(1/delta)`.

use qmetric::approxdim::Convention;
use qmetric::caps::Caps;
use qmetric::entropy::{torus_dimension, uhf_dimension, DimensionExperiment};

fn show(name: &str, exp: &DimensionExperiment) {
    println!("{name}: target {:.3}", exp.target);
    for r in &exp.rows {
        println!(
            "  n = {:3}  lower D({:.3e}) >= {}  upper D({:.3e}) <= {}",
            r.n, r.delta_lower, r.dim_lower, r.delta_upper, r.dim_upper
        );
    }
    println!("  slopes {:.4} / {:.4}", exp.slope_lower, exp.slope_upper);
}

fn main() -> qmetric::Result<()> {
    let caps = Caps::global();
    let uhf = uhf_dimension(2, 0.5, &[1, 2, 3, 4, 5], 2, Convention::Strict, &caps)?;
    show("UHF p = 2, lambda = 1/2", &uhf);
    let torus = torus_dimension(2, &[2, 4, 8, 16, 32, 64], Convention::Strict)?;
    show("torus p = 2", &torus);
    Ok(())
}
