//! Lattice growth of toral automorphisms against the eigenvalue formula.
//!
//! Run with `cargo run --release --example toral_entropy`.

use qmetric::caps::Caps;
use qmetric::entropy::{box_bound_card, eigen_entropy, entropy_slope, lattice_orbit_card};

fn main() -> qmetric::Result<()> {
    let caps = Caps::global();
    let cases: [(&str, [i64; 4], f64); 3] = [
        ("cat map", [2, 1, 1, 1], 0.05),
        ("parabolic", [1, 1, 0, 1], 0.05),
        ("rotation", [0, -1, 1, 0], 0.05),
    ];
    for (name, t, pad) in cases {
        let h = eigen_entropy(2, &t)?;
        println!("{name}: T = {t:?}, eigen entropy {h:.6}");
        for m in [1, 2] {
            let series = lattice_orbit_card(2, &t, m, 14, &caps)?;
            let est = entropy_slope(&series, 5)?;
            println!("  m = {m}: tail slope {:.4}", est.slope);
            if m == 1 {
                for (i, c) in series.counts.iter().enumerate() {
                    let bound = box_bound_card(2, &t, m, i + 1, pad)?;
                    println!("    n = {:2}  c_n = {:9}  bound = {:.3e}", i + 1, c, bound);
                }
            }
        }
    }
    Ok(())
}
