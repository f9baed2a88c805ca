//! Convergence rate of Cesaro means on the circle: the first absolute
//! moment of the Fejer kernel against `ln n / n`.

use qmetric::nctorus::{cesaro_abs_error, fejer_abs_moment, fejer_integral};

fn main() {
    println!("{:>6} {:>12} {:>12} {:>10} {:>10}", "n", "integral", "moment", "n*m/ln n", "err(|t|)");
    for k in 4..=12 {
        let n = 1u64 << k;
        let m = fejer_abs_moment(n);
        println!(
            "{:>6} {:>12.8} {:>12.8} {:>10.5} {:>10.2e}",
            n,
            fejer_integral(n, 8192),
            m,
            m * n as f64 / (n as f64).ln(),
            cesaro_abs_error(n, 8192)
        );
    }
}
