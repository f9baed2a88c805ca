//! Subspace-approximation dimension `D(Omega, delta)`: the least dimension of
//! a subspace that comes within `delta` of every vector of a family.
//!
//! Lower bounds come from the singular spectrum (Eckart-Young), upper bounds
//! from explicit witness subspaces whose residuals are recomputed directly.
//! Orthonormal families have a closed form.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};

/// Relative slack under which two sides of a boundary comparison count as equal.
pub const TIE_TOL: f64 = 1e-12;

/// Witness residuals must clear `delta` by this relative margin.
pub const WITNESS_MARGIN: f64 = 1e-9;

/// Whether approximation means `< delta` or `<= delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    Strict,
    NonStrict,
}

impl Convention {
    // `lhs < rhs` (or `<=`), with ties within TIE_TOL counted as equal
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        let tol = TIE_TOL * rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
        match self {
            Convention::Strict => lhs < rhs - tol,
            Convention::NonStrict => lhs <= rhs + tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormTag {
    /// Residuals measured in the GNS Hilbert space.
    Gns,
    /// Bracket of C*-norm quantities.
    CstarBracket,
}

impl NormTag {
    pub fn as_str(self) -> &'static str {
        match self {
            NormTag::Gns => "gns",
            NormTag::CstarBracket => "cstar-bracket",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimBracket {
    pub delta: f64,
    pub lower: usize,
    pub upper: usize,
    pub norm_tag: NormTag,
}

impl DimBracket {
    pub fn new(delta: f64, lower: usize, upper: usize, norm_tag: NormTag) -> Result<Self> {
        if lower > upper {
            return Err(Error::Numerical(format!("bracket lower {lower} exceeds upper {upper} at delta {delta}")));
        }
        Ok(DimBracket { delta, lower, upper, norm_tag })
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// CSV rows `delta,lower,upper,norm_tag`.
pub fn write_brackets_csv<W: Write>(out: W, rows: &[DimBracket]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "lower", "upper", "norm_tag"])?;
    for r in rows {
        w.write_record([
            crate::fmt_float(r.delta),
            r.lower.to_string(),
            r.upper.to_string(),
            r.norm_tag.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `m` vectors in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFamily {
    dim: usize,
    vectors: Vec<Vec<C64>>,
}

/// One JSON entry: a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(f64),
    Complex([f64; 2]),
}

impl VectorFamily {
    pub fn new(vectors: Vec<Vec<C64>>) -> Result<Self> {
        let dim = match vectors.first() {
            Some(v) => v.len(),
            None => return Err(Error::pre("vector family is empty")),
        };
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::pre("vectors of different lengths"));
        }
        if vectors.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::pre("non-finite vector entry"));
        }
        Ok(VectorFamily { dim, vectors })
    }

    /// Columns of `m`.
    pub fn from_columns(m: &CMatrix) -> Result<Self> {
        Self::new((0..m.cols()).map(|c| m.column(c)).collect())
    }

    /// The standard basis of `C^m` scaled by `scale`.
    pub fn orthonormal(m: usize, scale: f64) -> Self {
        let vectors = (0..m)
            .map(|i| {
                let mut v = vec![ZERO; m];
                v[i] = C64::new(scale, 0.0);
                v
            })
            .collect();
        VectorFamily { dim: m, vectors }
    }

    /// JSON array of vectors, each an array of numbers or `[re, im]` pairs.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<Vec<JsonScalar>> = serde_json::from_str(text)?;
        Self::new(
            raw.into_iter()
                .map(|v| {
                    v.into_iter()
                        .map(|s| match s {
                            JsonScalar::Real(x) => C64::new(x, 0.0),
                            JsonScalar::Complex([re, im]) => C64::new(re, im),
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorFamily {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|c| c * s).collect())
                .collect(),
        }
    }

    /// `d x m` matrix with the vectors as columns.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_columns(self.dim, &self.vectors)
    }

    /// `max |G - I|` for the Gram matrix `G`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.len();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in a..m {
                let g = linalg::inner(&self.vectors[a], &self.vectors[b]);
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::pre(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// `min { r : sum_{k > r} sigma_k^2 < m delta^2 }`. A subspace of dimension
/// `r` with every residual below `delta` forces this, so the result is a lower
/// bound for `D`.
pub fn dim_lower_spectral(fam: &VectorFamily, delta: f64, conv: Convention) -> Result<usize> {
    check_delta(delta)?;
    let spectrum = linalg::singular_values(&fam.matrix())?;
    let budget = fam.len() as f64 * delta * delta;
    let rank = spectrum.values().len();
    // tails are accumulated from the small end to keep them accurate
    let mut tails = vec![0.0; rank + 1];
    for r in (0..rank).rev() {
        tails[r] = tails[r + 1] + spectrum.values()[r].powi(2);
    }
    Ok((0..=rank).find(|&r| conv.holds(tails[r], budget)).unwrap_or(rank))
}

/// `min { r : m - r < m delta^2 }`, the exact value for `m` orthonormal vectors.
pub fn dim_exact_orthonormal(m: usize, delta: f64, conv: Convention) -> Result<usize> {
    if m == 0 {
        return Err(Error::pre("orthonormal family must be nonempty"));
    }
    check_delta(delta)?;
    let budget = m as f64 * delta * delta;
    Ok((0..=m).find(|&r| conv.holds((m - r) as f64, budget)).unwrap_or(m))
}

/// A subspace of dimension `r` with orthonormal basis columns and the
/// directly computed worst residual.
#[derive(Debug, Clone)]
pub struct Witness {
    pub r: usize,
    pub basis: CMatrix,
    pub max_residual: f64,
    pub source: WitnessSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessSource {
    Zero,
    SingularSubspace,
    /// DFT mixtures of the polar orthonormalisation of the family.
    TightFrame,
}

fn residuals(fam: &VectorFamily, basis: &CMatrix) -> Vec<f64> {
    let r = basis.cols();
    let cols: Vec<Vec<C64>> = (0..r).map(|c| basis.column(c)).collect();
    fam.vectors
        .iter()
        .map(|v| {
            let mut res = v.clone();
            // two passes of Gram-Schmidt against the basis
            for _ in 0..2 {
                for q in &cols {
                    let c = linalg::inner(q, &res);
                    for (x, qi) in res.iter_mut().zip(q) {
                        *x -= c * qi;
                    }
                }
            }
            linalg::norm2(&res)
        })
        .collect()
}

fn certified(max_res: f64, delta: f64, conv: Convention) -> bool {
    match conv {
        Convention::Strict => max_res < delta * (1.0 - WITNESS_MARGIN),
        Convention::NonStrict => max_res <= delta * (1.0 - WITNESS_MARGIN),
    }
}

fn take_columns(m: &CMatrix, r: usize) -> CMatrix {
    CMatrix::from_fn(m.rows(), r, |i, j| m[(i, j)])
}

// Smallest r in lo..=hi passing `ok`, assuming monotone success.
fn first_passing(lo: usize, hi: usize, mut ok: impl FnMut(usize) -> bool) -> Option<usize> {
    if !ok(hi) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = (a + b) / 2;
        if ok(mid) {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    Some(a)
}

/// Smallest `r` for which a candidate subspace certifies `D <= r`. Candidates
/// are the top-`r` singular subspace and, when the family has full column
/// rank, the span of the first `r` DFT mixtures of its polar
/// orthonormalisation. For orthonormal input the latter equalises the residuals
/// at `sqrt((m - r)/m)`.
pub fn dim_upper_svd(fam: &VectorFamily, delta: f64, conv: Convention) -> Result<Witness> {
    check_delta(delta)?;
    let zero_res = fam.vectors.iter().map(|v| linalg::norm2(v)).fold(0.0, f64::max);
    if certified(zero_res, delta, conv) {
        return Ok(Witness {
            r: 0,
            basis: CMatrix::zeros(fam.dim, 0),
            max_residual: zero_res,
            source: WitnessSource::Zero,
        });
    }
    let a = fam.matrix();
    let svd = linalg::svd(&a)?;
    let s = &svd.s;
    let rank = s.iter().filter(|&&x| x > s[0] * 1e-13).count();
    let max_res = |basis: &CMatrix| residuals(fam, basis).into_iter().fold(0.0, f64::max);

    let mut best: Option<Witness> = None;
    let sing = |r: usize| take_columns(&svd.u, r);
    let hi = svd.u.cols();
    if let Some(r) = first_passing(1, hi, |r| certified(max_res(&sing(r)), delta, conv)) {
        let basis = sing(r);
        best = Some(Witness {
            r,
            max_residual: max_res(&basis),
            basis,
            source: WitnessSource::SingularSubspace,
        });
    }

    let m = fam.len();
    if rank == m && m <= fam.dim {
        // polar factor Q = U V^*, then columns Q F_r with F the unitary DFT
        let q = (&take_columns(&svd.u, m)) * &svd.v.adjoint();
        let f = CMatrix::from_fn(m, m, |i, j| {
            C64::from_polar(1.0 / (m as f64).sqrt(), 2.0 * std::f64::consts::PI * (i * j % m) as f64 / m as f64)
        });
        let qf = q.matmul(&f)?;
        let limit = best.as_ref().map_or(m, |w| w.r);
        let frame = |r: usize| take_columns(&qf, r);
        if let Some(r) = first_passing(1, limit, |r| certified(max_res(&frame(r)), delta, conv)) {
            if best.as_ref().map_or(true, |w| r < w.r) {
                let basis = frame(r);
                best = Some(Witness {
                    r,
                    max_residual: max_res(&basis),
                    basis,
                    source: WitnessSource::TightFrame,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Numerical(format!("no witness subspace certified at delta {delta}")))
}

/// Lower and upper bounds together.
pub fn dim_bracket(fam: &VectorFamily, delta: f64, conv: Convention, norm_tag: NormTag) -> Result<DimBracket> {
    let lower = dim_lower_spectral(fam, delta, conv)?;
    let upper = dim_upper_svd(fam, delta, conv)?.r;
    DimBracket::new(delta, lower, upper, norm_tag)
}

/// Sparse vector as `(coordinate, value)` pairs.
pub type SparseVector = Vec<(usize, C64)>;

/// `max |G - I|` over the Gram matrix of sparse vectors, visiting only pairs
/// that share a coordinate (inverted index).
pub fn sparse_orthonormality_defect(vectors: &[SparseVector]) -> f64 {
    let mut index: HashMap<usize, Vec<(usize, C64)>> = HashMap::new();
    for (i, v) in vectors.iter().enumerate() {
        for &(k, c) in v {
            index.entry(k).or_default().push((i, c));
        }
    }
    let mut worst = 0.0f64;
    let mut row: HashMap<usize, C64> = HashMap::new();
    for (a, v) in vectors.iter().enumerate() {
        row.clear();
        for &(k, ca) in v {
            for &(b, cb) in &index[&k] {
                if b >= a {
                    *row.entry(b).or_insert(ZERO) += ca.conj() * cb;
                }
            }
        }
        let diag = row.get(&a).copied().unwrap_or(ZERO);
        worst = worst.max((diag - 1.0).norm());
        for (&b, g) in &row {
            if b != a {
                worst = worst.max(g.norm());
            }
        }
    }
    worst
}

/// `D` of an orthonormal family after certifying orthonormality to `tol`.
pub fn dim_certified_orthonormal(vectors: &[SparseVector], delta: f64, conv: Convention, tol: f64) -> Result<usize> {
    let defect = sparse_orthonormality_defect(vectors);
    if defect > tol {
        return Err(Error::Numerical(format!("family is not orthonormal: Gram defect {defect:e}")));
    }
    dim_exact_orthonormal(vectors.len(), delta, conv)
}

/// Affine least-squares slopes of `log lower` and `log upper` against
/// `log 1/delta`.
pub fn mdim_regression(samples: &[DimBracket]) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::pre(format!("regression needs at least 3 samples, got {}", samples.len())));
    }
    if samples.windows(2).any(|w| w[1].delta >= w[0].delta) {
        return Err(Error::pre("samples must have strictly decreasing delta"));
    }
    if samples.iter().any(|s| s.lower == 0) {
        return Err(Error::pre("log of a zero dimension"));
    }
    let x: Vec<f64> = samples.iter().map(|s| -s.delta.ln()).collect();
    let lo: Vec<f64> = samples.iter().map(|s| (s.lower as f64).ln()).collect();
    let hi: Vec<f64> = samples.iter().map(|s| (s.upper as f64).ln()).collect();
    Ok((
        crate::metricspace::ls_slope(&x, &lo)?,
        crate::metricspace::ls_slope(&x, &hi)?,
    ))
}
