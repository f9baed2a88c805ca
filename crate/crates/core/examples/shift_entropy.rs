//! Product entropy of the shift on the UHF algebra: the product sets of
//! site monomials and the resulting bracket for `ln D / n`.

use qmetric::approxdim::Convention;
use qmetric::caps::Caps;
use qmetric::entropy::{shift_entropy_bracket, shift_product_dim};

fn main() -> qmetric::Result<()> {
    let caps = Caps::global();
    for n in 1..=3 {
        let b = shift_product_dim(2, n, 0.5, Convention::Strict, &caps)?;
        println!("n = {n}: D(0.5) of the product set in [{}, {}]", b.lower, b.upper);
    }
    for n in [4, 8, 16] {
        let s = shift_entropy_bracket(2, n, 0.5, Convention::Strict)?;
        println!(
            "n = {:2}: D = {}, ln D / n in [{:.4}, {:.4}], ln 4 = {:.4}",
            n,
            s.dim,
            s.lower,
            s.upper,
            4f64.ln()
        );
    }
    Ok(())
}
