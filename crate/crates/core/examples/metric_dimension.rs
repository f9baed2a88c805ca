//! Box dimension of a grid in the plane, and the partition-of-unity
//! unitaries whose GNS vectors witness it.

use qmetric::approxdim::{dim_bracket, Convention, NormTag, VectorFamily};
use qmetric::metricspace::{box_dimension, geometric_grid, kolm_unitaries, FiniteMetricSpace};

fn main() -> qmetric::Result<()> {
    let space = FiniteMetricSpace::unit_grid(48, 2)?;
    let deltas = geometric_grid(0.5, 0.0625, 4)?;
    let bd = box_dimension(&space, &deltas)?;
    for row in &bd.rows {
        println!("delta {:.4}: sep {}, spn {}, cover {}", row.delta, row.sep, row.spn, row.cover);
    }
    println!("box dimension {:.4} (affine fit {:.4})", bd.slope, bd.affine_slope);

    let kb = kolm_unitaries(&space, 0.25)?;
    println!("r = {}, gram defect {:.2e}", kb.r(), kb.gram_defect());
    let fam = VectorFamily::new(kb.gns_vectors())?;
    let b = dim_bracket(&fam, 0.5, Convention::Strict, NormTag::Gns)?;
    println!("D(0.5) in [{}, {}]", b.lower, b.upper);
    Ok(())
}
