//! Clock and shift matrices, Weyl monomials on a window, the expansion
//! into monomials, the conditional expectation and the Lip norm.

use qmetric::linalg::operator_norm;
use qmetric::weyl::{
    clock_shift, conditional_expectation, weyl_expand, weyl_lip_norm, weyl_monomial, WeylElement, WeylWindow,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qmetric::Result<()> {
    let (u, v) = clock_shift(3)?;
    let vu = v.matmul(&u)?;
    let uv = u.matmul(&v)?;
    println!("p = 3: |vu - rho uv| = {:.2e}", {
        let rho = qmetric::weyl::root_of_unity(&WeylWindow::new(3, 0, 0)?);
        vu.max_abs_diff(&uv.scale(rho))
    });

    let window = WeylWindow::centered(2, 2)?;
    println!("window [{}, {}] has matrix dimension {}", window.lo(), window.hi(), window.dim());

    let m = weyl_monomial(window, &[(0, 0), (1, 0), (0, 1), (1, 1), (0, 0)])?;
    let coeffs = weyl_expand(&m);
    for (k, c) in coeffs.nonzero(1e-12) {
        println!("monomial expands to {:?} with coefficient {:.3}", k, c);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = WeylElement::random(window, &mut rng);
    let lambda = 0.5;
    let lip = weyl_lip_norm(&a, lambda)?;
    println!("random element: norm {:.4}, Lip norm {:.4}", a.norm()?, lip);
    for n in 0..=2 {
        let e = conditional_expectation(&a, n)?;
        let r = operator_norm(a.sub(&e)?.matrix())?;
        println!("  |a - E_{n} a| = {:.4}", r);
    }
    Ok(())
}
