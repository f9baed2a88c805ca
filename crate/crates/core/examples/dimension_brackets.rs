//! Lower and upper brackets for the approximation dimension of a vector
//! family: an orthonormal set, and a tight frame of equiangular lines.

use num_complex::Complex64 as C64;
use qmetric::approxdim::{dim_bracket, dim_exact_orthonormal, dim_upper_svd, Convention, NormTag, VectorFamily};

fn main() -> qmetric::Result<()> {
    let on = VectorFamily::orthonormal(6, 1.0);
    for delta in [0.3, 0.5, 0.8, 1.0] {
        let b = dim_bracket(&on, delta, Convention::Strict, NormTag::Gns)?;
        println!(
            "orthonormal m = 6, delta {delta}: [{}, {}], exact {}",
            b.lower,
            b.upper,
            dim_exact_orthonormal(6, delta, Convention::Strict)?
        );
    }

    // Mercedes frame in C^2: three unit vectors at 120 degrees.
    let frame: Vec<Vec<C64>> = (0..3)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            vec![C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]
        })
        .collect();
    let fam = VectorFamily::new(frame)?;
    for delta in [0.5, 0.9, 1.0] {
        let b = dim_bracket(&fam, delta, Convention::NonStrict, NormTag::Gns)?;
        let w = dim_upper_svd(&fam, delta, Convention::NonStrict)?;
        println!(
            "frame, delta {delta}: [{}, {}], witness {:?} residual {:.4}",
            b.lower, b.upper, w.source, w.max_residual
        );
    }
    Ok(())
}
