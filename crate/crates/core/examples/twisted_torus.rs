//! Twisted polynomials on a noncommutative torus: products, the rational
//! matrix representation, Lip bounds, toral automorphisms and Cesaro means.

use num_complex::Complex64 as C64;
use qmetric::linalg::operator_norm;
use qmetric::nctorus::{
    cesaro_mean, lip_bounds, toral_map_apply, twisted_product, PhaseMatrix, RationalRepresentation, ToralMap,
    TwistedPolynomial,
};

fn main() -> qmetric::Result<()> {
    let phase = PhaseMatrix::two(2.0 / 7.0)?;
    let u = TwistedPolynomial::generator(&phase, 1)?;
    let v = TwistedPolynomial::generator(&phase, 2)?;
    let uv = twisted_product(&u, &v)?;
    let vu = twisted_product(&v, &u)?;
    println!("uv = {:?}", uv.as_monomial());
    println!("vu = {:?}", vu.as_monomial());

    let a = u.add(&v.scale(C64::new(0.0, 0.5)))?.add(&uv.scale(C64::new(0.25, 0.0)))?;
    let rep = RationalRepresentation::new(&phase)?;
    println!(
        "a: l1 {:.4}, GNS {:.4}, operator norm in the {}-dim representation {:.4}",
        a.l1_norm(),
        a.gns_norm(),
        rep.dim(),
        operator_norm(&rep.image(&a)?)?
    );

    let lb = lip_bounds(&a);
    println!("Lip norm in [{:.4}, {:.4}]", lb.lower, lb.upper);

    let cat = ToralMap::automorphism(2, vec![2, 1, 1, 1])?;
    println!("cat map preserves theta: {}", cat.preserves(&phase));
    let b = toral_map_apply(&cat, &a)?;
    for (k, c) in b.terms() {
        println!("  alpha(a): {:?} -> {:.3}", k, c);
    }

    for n in [1, 4, 16] {
        let s = cesaro_mean(&a, n);
        println!("sigma_{n}(a) differs from a by {:.4} in l1", a.sub(&s)?.l1_norm());
    }
    Ok(())
}
