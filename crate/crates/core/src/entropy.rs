//! Growth of product sets and lattice orbits, entropy estimates and brackets,
//! and the dimension experiments for the shift and the torus.
//!
//! Lattice sets pack a point of `Z^p` into one `u64`, `64 / p` bits per
//! coordinate, and live in an `FxHashSet`.

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::approxdim::{self, Convention, DimBracket, NormTag, SparseVector, VectorFamily};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::nctorus::{fejer_abs_moment, int_det};
use crate::weyl::{self, WeylElement, WeylWindow};

/// Largest lattice rank accepted by [`LatticeSet`].
pub const MAX_LATTICE_RANK: usize = 4;
/// Largest matrix size accepted by the eigenvalue routines.
pub const MAX_EIGEN_RANK: usize = 8;

const MINKOWSKI_CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct LatticeSet {
    p: usize,
    bits: u32,
    keys: FxHashSet<u64>,
}

impl LatticeSet {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_LATTICE_RANK {
            return Err(Error::pre(format!(
                "lattice rank must be in 1..={MAX_LATTICE_RANK}, got {p}"
            )));
        }
        Ok(LatticeSet {
            p,
            bits: 64 / p as u32,
            keys: FxHashSet::default(),
        })
    }

    /// `K_m = {-m..m}^p`.
    pub fn cube(p: usize, m: i64) -> Result<Self> {
        if m < 0 {
            return Err(Error::pre("cube radius must be non-negative"));
        }
        let mut set = LatticeSet::new(p)?;
        let side = (2 * m + 1) as u64;
        let total = side.checked_pow(p as u32).ok_or_else(|| Error::pre("cube too large"))?;
        let mut x = vec![0i64; p];
        for mut idx in 0..total {
            for c in x.iter_mut() {
                *c = (idx % side) as i64 - m;
                idx /= side;
            }
            set.insert(&x)?;
        }
        Ok(set)
    }

    pub fn from_points(p: usize, points: &[Vec<i64>]) -> Result<Self> {
        let mut set = LatticeSet::new(p)?;
        for x in points {
            set.insert(x)?;
        }
        Ok(set)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn mask(&self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    fn half(&self) -> i128 {
        1i128 << (self.bits - 1)
    }

    fn pack(&self, x: &[i64]) -> Result<u64> {
        let half = self.half();
        let mut key = 0u64;
        for (c, &v) in x.iter().enumerate() {
            let v = v as i128;
            if v < -half || v >= half {
                return Err(Error::Numerical(format!(
                    "coordinate {v} does not fit the {}-bit lattice packing",
                    self.bits
                )));
            }
            key |= ((v + half) as u64 & self.mask()) << (c as u32 * self.bits);
        }
        Ok(key)
    }

    fn unpack(&self, key: u64, out: &mut [i64]) {
        let half = self.half();
        for (c, o) in out.iter_mut().enumerate() {
            let u = (key >> (c as u32 * self.bits)) & self.mask();
            *o = (u as i128 - half) as i64;
        }
    }

    pub fn insert(&mut self, x: &[i64]) -> Result<bool> {
        if x.len() != self.p {
            return Err(Error::pre(format!("point of length {} in a rank {} lattice", x.len(), self.p)));
        }
        let key = self.pack(x)?;
        Ok(self.keys.insert(key))
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.p && self.pack(x).map(|k| self.keys.contains(&k)).unwrap_or(false)
    }

    /// Points in lexicographic order.
    pub fn points(&self) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = self
            .keys
            .iter()
            .map(|&k| {
                let mut x = vec![0; self.p];
                self.unpack(k, &mut x);
                x
            })
            .collect();
        out.sort();
        out
    }

    /// `A + B`, refusing results larger than `caps.lattice_card`.
    pub fn minkowski_sum(&self, other: &LatticeSet, caps: &Caps) -> Result<LatticeSet> {
        if self.p != other.p {
            return Err(Error::pre("Minkowski sum of lattices of different rank"));
        }
        let limit = caps.lattice_card;
        let over = |n: usize| Error::cap("lattice set", n as u128, limit as u128);
        let a: Vec<u64> = self.keys.iter().copied().collect();
        let b = other.points();
        let p = self.p;
        let parts: Vec<FxHashSet<u64>> = a
            .par_chunks(MINKOWSKI_CHUNK)
            .map(|chunk| {
                let mut local = FxHashSet::default();
                let mut x = vec![0i64; p];
                let mut y = vec![0i64; p];
                for &k in chunk {
                    self.unpack(k, &mut x);
                    for pt in &b {
                        for c in 0..p {
                            y[c] = x[c]
                                .checked_add(pt[c])
                                .ok_or_else(|| Error::Numerical("lattice coordinate overflow".into()))?;
                        }
                        local.insert(self.pack(&y)?);
                    }
                    if local.len() as u64 > limit {
                        return Err(over(local.len()));
                    }
                }
                Ok(local)
            })
            .collect::<Result<_>>()?;
        let mut parts = parts;
        parts.sort_by_key(|s| std::cmp::Reverse(s.len()));
        let mut iter = parts.into_iter();
        let mut keys = iter.next().unwrap_or_default();
        for part in iter {
            keys.extend(part);
            if keys.len() as u64 > limit {
                return Err(over(keys.len()));
            }
        }
        Ok(LatticeSet { p, bits: self.bits, keys })
    }

    /// `{T x : x in A}` for an integer matrix `T` (row-major).
    pub fn linear_image(&self, t: &[i64]) -> Result<LatticeSet> {
        let p = self.p;
        if t.len() != p * p {
            return Err(Error::pre(format!("expected a {p}x{p} matrix")));
        }
        let keys: Vec<u64> = self.keys.iter().copied().collect();
        let images: Vec<u64> = keys
            .par_iter()
            .map(|&k| {
                let mut x = vec![0i64; p];
                self.unpack(k, &mut x);
                let y = int_matvec(p, t, &x)?;
                self.pack(&y)
            })
            .collect::<Result<_>>()?;
        Ok(LatticeSet {
            p,
            bits: self.bits,
            keys: images.into_iter().collect(),
        })
    }
}

fn int_matvec(p: usize, t: &[i64], x: &[i64]) -> Result<Vec<i64>> {
    (0..p)
        .map(|r| {
            let s: i128 = (0..p).map(|c| t[r * p + c] as i128 * x[c] as i128).sum();
            i64::try_from(s).map_err(|_| Error::Numerical("lattice coordinate overflow".into()))
        })
        .collect()
}

/// `T^k` for a row-major integer matrix, with overflow checks.
pub fn int_mat_pow(p: usize, t: &[i64], k: u32) -> Result<Vec<i64>> {
    if t.len() != p * p {
        return Err(Error::pre(format!("expected a {p}x{p} matrix")));
    }
    let mut out: Vec<i64> = (0..p * p).map(|i| (i / p == i % p) as i64).collect();
    for _ in 0..k {
        let mut next = vec![0i64; p * p];
        for r in 0..p {
            for c in 0..p {
                let s: i128 = (0..p).map(|j| out[r * p + j] as i128 * t[j * p + c] as i128).sum();
                next[r * p + c] =
                    i64::try_from(s).map_err(|_| Error::Numerical("matrix power overflows i64".into()))?;
            }
        }
        out = next;
    }
    Ok(out)
}

fn check_unimodular(p: usize, t: &[i64]) -> Result<()> {
    if p == 0 || p > MAX_LATTICE_RANK {
        return Err(Error::pre(format!("lattice rank must be in 1..={MAX_LATTICE_RANK}, got {p}")));
    }
    if t.len() != p * p {
        return Err(Error::pre(format!("expected a {p}x{p} matrix, got {} entries", t.len())));
    }
    let det = int_det(p, t);
    if det.abs() != 1 {
        return Err(Error::pre(format!("T must be unimodular, det = {det}")));
    }
    Ok(())
}

/// Cardinalities `c_1, ..., c_n` of a growing family of sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthSeries {
    pub counts: Vec<u64>,
}

impl GrowthSeries {
    /// `log(c_{n+1} / c_n)`.
    pub fn finite_differences(&self) -> Vec<f64> {
        self.counts
            .windows(2)
            .map(|w| (w[1] as f64).ln() - (w[0] as f64).ln())
            .collect()
    }
}

/// `c_n = |K_m + T K_m + ... + T^{n-1} K_m|` for `n = 1..=n_max`, via the
/// recursion `S_{j+1} = T S_j + K_m`.
pub fn lattice_orbit_card(p: usize, t: &[i64], m: i64, n_max: usize, caps: &Caps) -> Result<GrowthSeries> {
    check_unimodular(p, t)?;
    if m < 1 || n_max < 1 {
        return Err(Error::pre("lattice growth needs m >= 1 and n >= 1"));
    }
    let k = LatticeSet::cube(p, m)?;
    let mut s = k.clone();
    let mut counts = vec![s.len() as u64];
    for _ in 1..n_max {
        s = s.linear_image(t)?.minkowski_sum(&k, caps)?;
        counts.push(s.len() as u64);
    }
    Ok(GrowthSeries { counts })
}

/// `Omega + T Omega + ... + T^{n-1} Omega`, summed term by term.
///
/// This is the exponent set of the product set of the monomials with exponents
/// in `omega` under the toral automorphism of `T`.
pub fn monomial_product_support(t: &[i64], omega: &LatticeSet, n: usize, caps: &Caps) -> Result<LatticeSet> {
    check_unimodular(omega.p(), t)?;
    if n < 1 {
        return Err(Error::pre("product set needs n >= 1"));
    }
    let mut s = omega.clone();
    let mut term = omega.clone();
    for _ in 1..n {
        term = term.linear_image(t)?;
        s = s.minkowski_sum(&term, caps)?;
    }
    Ok(s)
}

/// [`lattice_orbit_card`] computed from the literal sum, one set per `n`.
pub fn lattice_orbit_card_literal(p: usize, t: &[i64], m: i64, n_max: usize, caps: &Caps) -> Result<GrowthSeries> {
    check_unimodular(p, t)?;
    if m < 1 || n_max < 1 {
        return Err(Error::pre("lattice growth needs m >= 1 and n >= 1"));
    }
    let k = LatticeSet::cube(p, m)?;
    let counts = (1..=n_max)
        .map(|n| monomial_product_support(t, &k, n, caps).map(|s| s.len() as u64))
        .collect::<Result<_>>()?;
    Ok(GrowthSeries { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// Least-squares slope of `log c_n` against `n` over the last `tail` terms.
    pub slope: f64,
    pub tail: usize,
    /// `log(c_{n+1} / c_n)` over the whole series.
    pub differences: Vec<f64>,
}

pub fn entropy_slope(series: &GrowthSeries, tail: usize) -> Result<EntropyEstimate> {
    let n = series.counts.len();
    if tail < 3 || tail > n {
        return Err(Error::pre(format!("tail must be in 3..={n}, got {tail}")));
    }
    if series.counts.iter().any(|&c| c == 0) {
        return Err(Error::pre("log of an empty set"));
    }
    let x: Vec<f64> = (n - tail + 1..=n).map(|j| j as f64).collect();
    let y: Vec<f64> = series.counts[n - tail..].iter().map(|&c| (c as f64).ln()).collect();
    Ok(EntropyEstimate {
        slope: crate::metricspace::ls_slope(&x, &y)?,
        tail,
        differences: series.finite_differences(),
    })
}

/// Characteristic polynomial `det(x I - T)` as coefficients `c_0, ..., c_p`
/// (`c_p = 1`), by Faddeev-LeVerrier in exact integer arithmetic.
pub fn char_poly(p: usize, t: &[i64]) -> Result<Vec<i128>> {
    if p == 0 || t.len() != p * p {
        return Err(Error::pre(format!("expected a non-empty {p}x{p} matrix")));
    }
    let ovf = || Error::Numerical("characteristic polynomial overflows i128".into());
    let mut c = vec![0i128; p + 1];
    c[p] = 1;
    let mut m = vec![0i128; p * p];
    for k in 1..=p {
        // M_k = T M_{k-1} + c_{p-k+1} I
        let mut next = vec![0i128; p * p];
        for r in 0..p {
            for col in 0..p {
                let mut s = if r == col { c[p - k + 1] } else { 0 };
                for j in 0..p {
                    s = s
                        .checked_add((t[r * p + j] as i128).checked_mul(m[j * p + col]).ok_or_else(ovf)?)
                        .ok_or_else(ovf)?;
                }
                next[r * p + col] = s;
            }
        }
        m = next;
        let mut tr = 0i128;
        for r in 0..p {
            for j in 0..p {
                tr = tr
                    .checked_add((t[r * p + j] as i128).checked_mul(m[j * p + r]).ok_or_else(ovf)?)
                    .ok_or_else(ovf)?;
            }
        }
        c[p - k] = -tr / k as i128;
    }
    Ok(c)
}

fn horner(c: &[f64], z: C64) -> (C64, C64) {
    let mut v = ZERO;
    let mut dv = ZERO;
    for &a in c.iter().rev() {
        dv = dv * z + v;
        v = v * z + a;
    }
    (v, dv)
}

// Durand-Kerner on a monic polynomial, then a few guarded Newton steps per root.
fn poly_roots(c: &[f64]) -> Vec<C64> {
    let deg = c.len() - 1;
    let radius = 1.0 + c[..deg].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..deg).map(|k| seed.powu(k as u32 + 1) * (0.5 * radius)).collect();
    for _ in 0..2000 {
        let mut step = 0.0f64;
        for i in 0..deg {
            let (v, _) = horner(c, z[i]);
            let mut den = C64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                z[i] += C64::new(1e-8, 1e-8);
                step = f64::INFINITY;
                continue;
            }
            let dz = v / den;
            z[i] -= dz;
            step = step.max(dz.norm() / z[i].norm().max(1.0));
        }
        if step < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..4 {
            let (v, dv) = horner(c, *zi);
            if dv.norm() == 0.0 {
                break;
            }
            let cand = *zi - v / dv;
            if horner(c, cand).0.norm() < v.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    z
}

/// Eigenvalues of an integer matrix with `p <= 8`.
///
/// `p = 1, 2` use closed forms (the quadratic in its cancellation-free form);
/// larger sizes use Durand-Kerner on the characteristic polynomial.
pub fn eigenvalues(p: usize, t: &[i64]) -> Result<Vec<C64>> {
    if p == 0 || p > MAX_EIGEN_RANK {
        return Err(Error::pre(format!("eigenvalues need 1 <= p <= {MAX_EIGEN_RANK}, got {p}")));
    }
    let c = char_poly(p, t)?;
    match p {
        1 => Ok(vec![C64::new(-c[0] as f64, 0.0)]),
        2 => {
            let (b, cc) = (c[1], c[0]);
            let disc = b * b - 4 * cc;
            let (bf, cf) = (b as f64, cc as f64);
            if disc >= 0 {
                let sq = (disc as f64).sqrt();
                let q = -0.5 * (bf + if bf >= 0.0 { sq } else { -sq });
                if q == 0.0 {
                    return Ok(vec![C64::new(0.0, 0.0); 2]);
                }
                Ok(vec![C64::new(q, 0.0), C64::new(cf / q, 0.0)])
            } else {
                let im = 0.5 * ((-disc) as f64).sqrt();
                Ok(vec![C64::new(-0.5 * bf, im), C64::new(-0.5 * bf, -im)])
            }
        }
        _ => {
            let cf: Vec<f64> = c.iter().map(|&x| x as f64).collect();
            Ok(poly_roots(&cf))
        }
    }
}

/// `sum log max(|lambda|, 1)` over the eigenvalues of `T`.
pub fn eigen_entropy(p: usize, t: &[i64]) -> Result<f64> {
    Ok(eigenvalues(p, t)?.iter().map(|l| l.norm().ln().max(0.0)).sum())
}

/// One invariant block of the real eigen/Jordan basis used by [`box_bound`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundBlock {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub dim: usize,
    pub defective: bool,
    /// `sup_{j<n} |A_b^j| / (zeta max(|lambda|, 1))^j`.
    pub q: f64,
    /// Largest block-norm of `B^{-1} v` over the vertices `v` of `[-1, 1]^p`.
    pub r: f64,
    pub log_extent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxBound {
    pub n: usize,
    pub log_bound: f64,
    pub blocks: Vec<BoundBlock>,
}

impl BoxBound {
    pub fn bound(&self) -> f64 {
        self.log_bound.exp()
    }
}

fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_fn(rows, cols, |r, c| C64::new(data[r * cols + c], 0.0))
}

fn real_matmul(p: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p * p];
    for r in 0..p {
        for j in 0..p {
            let x = a[r * p + j];
            for c in 0..p {
                out[r * p + c] += x * b[j * p + c];
            }
        }
    }
    out
}

// Gauss-Jordan with partial pivoting; returns (inverse, det).
fn real_inverse(p: usize, m: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut a = m.to_vec();
    let mut inv: Vec<f64> = (0..p * p).map(|i| (i / p == i % p) as u8 as f64).collect();
    let mut det = 1.0;
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&x, &y| a[x * p + col].abs().total_cmp(&a[y * p + col].abs()))
            .unwrap();
        if a[piv * p + col].abs() < 1e-12 {
            return Err(Error::Numerical("eigenbasis is numerically singular".into()));
        }
        if piv != col {
            for c in 0..p {
                a.swap(piv * p + c, col * p + c);
                inv.swap(piv * p + c, col * p + c);
            }
            det = -det;
        }
        let d = a[col * p + col];
        det *= d;
        for c in 0..p {
            a[col * p + c] /= d;
            inv[col * p + c] /= d;
        }
        for r in 0..p {
            if r != col {
                let f = a[r * p + col];
                if f != 0.0 {
                    for c in 0..p {
                        a[r * p + c] -= f * a[col * p + c];
                        inv[r * p + c] -= f * inv[col * p + c];
                    }
                }
            }
        }
    }
    Ok((inv, det))
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

// Right singular vectors of the `count` smallest singular values.
fn null_vectors(m: &CMatrix, count: usize) -> Result<(Vec<Vec<C64>>, Vec<f64>)> {
    let s = linalg::svd(m)?;
    let mut order: Vec<usize> = (0..s.s.len()).collect();
    order.sort_by(|&a, &b| s.s[a].total_cmp(&s.s[b]));
    let vecs = order[..count].iter().map(|&i| s.v.column(i)).collect();
    let mut sorted = s.s.clone();
    sorted.sort_by(f64::total_cmp);
    Ok((vecs, sorted))
}

fn gram_schmidt_push(basis: &mut Vec<Vec<f64>>, v: Vec<f64>) -> bool {
    let mut w = v;
    for b in basis.iter() {
        let d: f64 = b.iter().zip(&w).map(|(x, y)| x * y).sum();
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi -= d * bi;
        }
    }
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-8 {
        return false;
    }
    basis.push(w.into_iter().map(|x| x / n).collect());
    true
}

/// Rigorous upper bound for `c_n = |K_m + T K_m + ... + T^{n-1} K_m|`.
///
/// In a real eigen/Jordan basis `B`, block `b` of any point of the sum has norm
/// at most `e_b = Q_b r_b m sum_{j<n} (j+1) (zeta_b max(|lambda_b|, 1))^j`,
/// where `zeta_b = 1` for semisimple blocks and `1 + delta_pad` for defective
/// ones. Lattice points are counted by the volume of the sum thickened by a
/// unit cube, which fits the box with half-widths `e_b + r_b / 2`; the result
/// is `2^p |det B| prod_b (2 (e_b + r_b / 2))^{dim b}`.
pub fn box_bound(p: usize, t: &[i64], m: i64, n: usize, delta_pad: f64) -> Result<BoxBound> {
    check_unimodular(p, t)?;
    if m < 1 || n < 1 {
        return Err(Error::pre("box bound needs m >= 1 and n >= 1"));
    }
    let tf: Vec<f64> = t.iter().map(|&x| x as f64).collect();
    let eig = eigenvalues(p, t)?;

    // cluster numerically equal eigenvalues
    let mut clusters: Vec<(Vec<C64>, C64)> = Vec::new();
    for l in eig {
        let tol = 1e-6 * l.norm().max(1.0);
        match clusters.iter_mut().find(|(_, rep)| (*rep - l).norm() < tol) {
            Some((members, rep)) => {
                members.push(l);
                *rep = members.iter().sum::<C64>() / members.len() as f64;
            }
            None => clusters.push((vec![l], l)),
        }
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut layout: Vec<(C64, usize, usize, bool)> = Vec::new(); // (lambda, start, dim, defective)
    for (members, rep) in &clusters {
        let mu = members.len();
        let real = rep.im.abs() < 1e-6 * rep.norm().max(1.0);
        if !real && rep.im < 0.0 {
            continue;
        }
        let lambda = if real { C64::new(rep.re, 0.0) } else { *rep };
        let shifted = CMatrix::from_fn(p, p, |r, c| {
            C64::new(tf[r * p + c], 0.0) - if r == c { lambda } else { ZERO }
        });
        let scale = linalg::operator_norm(&shifted)?.max(1.0);
        let (_, s1) = null_vectors(&shifted, 1)?;
        let geometric = s1.iter().filter(|&&s| s < 1e-7 * scale).count();
        let defective = geometric < mu;
        let power = shifted.pow(mu as u32)?;
        let (vecs, _) = null_vectors(&power, mu)?;
        let start = columns.len();
        let mut block: Vec<Vec<f64>> = Vec::new();
        if real {
            for v in &vecs {
                if !gram_schmidt_push(&mut block, v.iter().map(|z| z.re).collect()) {
                    gram_schmidt_push(&mut block, v.iter().map(|z| z.im).collect());
                }
            }
            if block.len() != mu {
                return Err(Error::Numerical("could not build a real eigenbasis".into()));
            }
        } else {
            for v in &vecs {
                block.push(v.iter().map(|z| z.re).collect());
                block.push(v.iter().map(|z| z.im).collect());
            }
        }
        let dim = block.len();
        columns.extend(block);
        layout.push((lambda, start, dim, defective));
    }
    if columns.len() != p {
        return Err(Error::Numerical(format!(
            "eigenbasis has {} vectors for a {p}x{p} matrix",
            columns.len()
        )));
    }
    let b: Vec<f64> = (0..p * p).map(|i| columns[i % p][i / p]).collect();
    let (binv, det_b) = real_inverse(p, &b)?;
    let a = real_matmul(p, &binv, &real_matmul(p, &tf, &b));

    let vertices: Vec<Vec<f64>> = (0..1u32 << p)
        .map(|mask| {
            let v: Vec<f64> = (0..p).map(|c| if mask >> c & 1 == 1 { 1.0 } else { -1.0 }).collect();
            (0..p).map(|r| (0..p).map(|c| binv[r * p + c] * v[c]).sum()).collect()
        })
        .collect();

    let pad = 1.0 + 1e-9;
    let mut blocks = Vec::new();
    let mut log_bound = p as f64 * 2f64.ln() + det_b.abs().ln();
    for (lambda, start, dim, defective) in layout {
        if defective && !(delta_pad > 0.0) {
            return Err(Error::pre("defective spectrum needs delta_pad > 0"));
        }
        let zeta = if defective { 1.0 + delta_pad } else { 1.0 };
        let growth = zeta * lambda.norm().max(1.0);
        let ab: Vec<f64> = (0..dim * dim)
            .map(|i| a[(start + i / dim) * p + start + i % dim] / growth)
            .collect();
        let mut power: Vec<f64> = (0..dim * dim).map(|i| (i / dim == i % dim) as u8 as f64).collect();
        let mut q = 1.0f64;
        for _ in 1..n {
            power = real_matmul(dim, &power, &ab);
            q = q.max(linalg::operator_norm(&real_matrix(dim, dim, &power))?);
        }
        let q = q * pad;
        let r = vertices
            .iter()
            .map(|w| w[start..start + dim].iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max)
            * pad;
        let log_sum = (0..n).fold(f64::NEG_INFINITY, |acc, j| {
            log_add(acc, ((j + 1) as f64).ln() + j as f64 * growth.ln())
        });
        let log_extent = (q * r * m as f64).ln() + log_sum;
        let log_half = log_add(log_extent, (r / 2.0).ln());
        log_bound += dim as f64 * (2f64.ln() + log_half);
        blocks.push(BoundBlock {
            eigenvalue_re: lambda.re,
            eigenvalue_im: lambda.im,
            dim,
            defective,
            q,
            r,
            log_extent,
        });
    }
    Ok(BoxBound { n, log_bound, blocks })
}

/// `exp` of [`box_bound`]'s log bound.
pub fn box_bound_card(p: usize, t: &[i64], m: i64, n: usize, delta_pad: f64) -> Result<f64> {
    Ok(box_bound(p, t, m, n, delta_pad)?.bound())
}

/// All ordered products `a_0 alpha(a_1) alpha^2(a_2) ... alpha^{n-1}(a_{n-1})`
/// with `a_i` in `omega`, in lexicographic order of the tuples.
pub fn product_set<T, A, M>(omega: &[T], n: usize, alpha: A, mul: M, caps: &Caps) -> Result<Vec<T>>
where
    T: Clone,
    A: Fn(&T) -> Result<T>,
    M: Fn(&T, &T) -> Result<T>,
{
    if n < 1 || omega.is_empty() {
        return Err(Error::pre("product set needs n >= 1 and a non-empty family"));
    }
    let total = (omega.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > caps.product_set as u128 {
        return Err(Error::cap("product set", total, caps.product_set as u128));
    }
    let mut layer: Vec<T> = omega.to_vec();
    let mut out: Vec<T> = omega.to_vec();
    for _ in 1..n {
        layer = layer.iter().map(&alpha).collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(out.len() * layer.len());
        for x in &out {
            for y in &layer {
                next.push(mul(x, y)?);
            }
        }
        out = next;
    }
    Ok(out)
}

/// The site-0 Weyl monomials `u^i v^j`, `0 <= i, j < p`.
pub fn site_monomials(p: usize) -> Result<Vec<WeylElement>> {
    let w = WeylWindow::new(p, 0, 0)?;
    weyl::all_exponents(w).map(|e| weyl::weyl_monomial(w, &e)).collect()
}

/// `D_tau` of the shift product set of the site-0 monomials, from the GNS
/// vectors of the actual products on `[0, n-1]`.
pub fn shift_product_dim(p: usize, n: usize, delta: f64, conv: Convention, caps: &Caps) -> Result<DimBracket> {
    let omega = site_monomials(p)?;
    let products = product_set(&omega, n, |a| Ok(a.shift(1)), |a, b| a.mul(b), caps)?;
    let family = VectorFamily::new(products.iter().map(|a| a.coefficients().as_slice().to_vec()).collect())?;
    approxdim::dim_bracket(&family, delta, conv, NormTag::Gns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftEntropyBracket {
    pub p: usize,
    pub n: usize,
    pub delta: f64,
    /// `D_tau` of the `p^{2n}` orthonormal products.
    pub dim: u64,
    pub lower: f64,
    pub upper: f64,
}

/// Bracket for `(1/n) log D` of the shift on the UHF algebra.
///
/// The lower end is `(1/n) log D_tau` of the orthonormal product set of the
/// site-0 monomials; the upper end is `(1/n) log p^{2(2 ceil(sqrt n) + n)}`.
pub fn shift_entropy_bracket(p: usize, n: usize, delta: f64, conv: Convention) -> Result<ShiftEntropyBracket> {
    if p < 2 || n < 1 {
        return Err(Error::pre("shift entropy needs p >= 2 and n >= 1"));
    }
    let m = (p as u64)
        .checked_pow(2 * n as u32)
        .ok_or_else(|| Error::cap("product set", u128::MAX, u64::MAX as u128))?;
    let dim = approxdim::dim_exact_orthonormal(m as usize, delta, conv)? as u64;
    let lower = (dim.max(1) as f64).ln() / n as f64;
    let side = (n as f64).sqrt().ceil();
    let upper = 2.0 * (2.0 * side + n as f64) * (p as f64).ln() / n as f64;
    Ok(ShiftEntropyBracket {
        p,
        n,
        delta,
        dim,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionRow {
    pub n: u64,
    pub delta_lower: f64,
    pub dim_lower: u64,
    pub delta_upper: f64,
    pub dim_upper: u64,
    /// Gram defect of the lower family when it was certified from GNS vectors.
    pub gram_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionExperiment {
    pub rows: Vec<DimensionRow>,
    /// Affine slope of `log D` against `log 1/delta` along the lower samples.
    pub slope_lower: f64,
    /// The same along the upper samples.
    pub slope_upper: f64,
    /// Value the slopes estimate.
    pub target: f64,
}

impl DimensionExperiment {
    /// Whether `target` lies in `[min slope, max slope]` up to `tol`.
    pub fn brackets_target(&self, tol: f64) -> bool {
        let lo = self.slope_lower.min(self.slope_upper);
        let hi = self.slope_lower.max(self.slope_upper);
        self.target >= lo - tol && self.target <= hi + tol
    }
}

fn slopes(rows: &[DimensionRow]) -> Result<(f64, f64)> {
    let xl: Vec<f64> = rows.iter().map(|r| -r.delta_lower.ln()).collect();
    let yl: Vec<f64> = rows.iter().map(|r| (r.dim_lower.max(1) as f64).ln()).collect();
    let xu: Vec<f64> = rows.iter().map(|r| -r.delta_upper.ln()).collect();
    let yu: Vec<f64> = rows.iter().map(|r| (r.dim_upper as f64).ln()).collect();
    Ok((
        crate::metricspace::ls_slope(&xl, &yl)?,
        crate::metricspace::ls_slope(&xu, &yu)?,
    ))
}

/// Sparse GNS vectors of every Weyl monomial on `[-n, n]`.
pub fn weyl_monomial_gns(p: usize, n: i64, caps: &Caps) -> Result<Vec<SparseVector>> {
    let w = WeylWindow::centered(p, n)?;
    let count = (w.dim() as u128).pow(2);
    if count > caps.product_set as u128 {
        return Err(Error::cap("monomial family", count, caps.product_set as u128));
    }
    weyl::all_exponents(w)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| weyl::monomial_gns_sparse(w, e, 1e-13))
        .collect()
}

/// Lip-norm bound `2 p lambda^{-n}` for every Weyl monomial on `[-n, n]`.
pub fn weyl_monomial_lip_bound(p: usize, lambda: f64, n: u64) -> f64 {
    2.0 * p as f64 * lambda.powi(-(n as i32))
}

/// `2 lambda^{n+1} / (1 - lambda)`: the `E_n` residual per unit Lip-norm.
pub fn uhf_tail(lambda: f64, n: u64) -> f64 {
    2.0 * lambda.powi(n as i32 + 1) / (1.0 - lambda)
}

/// Dimension brackets for the Lip unit ball of the UHF algebra `M_p^{(x) Z}`
/// with length weights `lambda^{|k|}`.
///
/// Lower samples: the `p^{2(2n+1)}` monomials on `[-n, n]`, scaled into the Lip
/// unit ball by `1 / (2 p lambda^{-n})`, are orthonormal in GNS, so
/// `D >= D_tau(orthonormal, 1/2)` at `delta = lambda^n / (4p)`. Upper samples:
/// `E_n` lands in a `p^{2(2n+1)}`-dimensional space within `uhf_tail(n)`.
/// Orthonormality is certified from the actual GNS vectors for `n <= certify`.
pub fn uhf_dimension(
    p: usize,
    lambda: f64,
    ns: &[u64],
    certify: u64,
    conv: Convention,
    caps: &Caps,
) -> Result<DimensionExperiment> {
    if p < 2 || !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::pre("UHF dimension needs p >= 2 and 0 < lambda < 1"));
    }
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] < 1 {
        return Err(Error::pre("n values must be increasing, positive and at least two"));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let m = (p as u64)
            .checked_pow(2 * (2 * n as u32 + 1))
            .ok_or_else(|| Error::cap("monomial family", u128::MAX, u64::MAX as u128))?;
        let delta_lower = 0.5 / weyl_monomial_lip_bound(p, lambda, n);
        let (dim_lower, gram_defect) = if n <= certify {
            let vecs = weyl_monomial_gns(p, n as i64, caps)?;
            let defect = approxdim::sparse_orthonormality_defect(&vecs);
            (approxdim::dim_certified_orthonormal(&vecs, 0.5, conv, 1e-10)?, Some(defect))
        } else {
            (approxdim::dim_exact_orthonormal(m as usize, 0.5, conv)?, None)
        };
        rows.push(DimensionRow {
            n,
            delta_lower,
            dim_lower: dim_lower as u64,
            delta_upper: uhf_tail(lambda, n),
            dim_upper: m,
            gram_defect,
        });
    }
    let (slope_lower, slope_upper) = slopes(&rows)?;
    Ok(DimensionExperiment {
        rows,
        slope_lower,
        slope_upper,
        target: 4.0 * (p as f64).ln() / (1.0 / lambda).ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualCheck {
    pub n: i64,
    pub lo: i64,
    pub hi: i64,
    pub lip: f64,
    pub residual: f64,
    pub bound: f64,
}

impl ResidualCheck {
    pub fn holds(&self) -> bool {
        self.residual <= self.bound * (1.0 + 1e-9) + 1e-12
    }
}

/// `|a - E_n a|` against `L(a) uhf_tail(n)` for random `a` on windows
/// straddling `n`.
pub fn uhf_residual_checks<R: rand::Rng + ?Sized>(
    p: usize,
    lambda: f64,
    n: i64,
    windows: &[(i64, i64)],
    rng: &mut R,
    caps: &Caps,
) -> Result<Vec<ResidualCheck>> {
    windows
        .iter()
        .map(|&(lo, hi)| {
            let w = WeylWindow::with_caps(p, lo, hi, caps)?;
            let a = WeylElement::random(w, rng);
            let lip = weyl::weyl_lip_norm_with_caps(&a, lambda, caps)?;
            let residual = a.sub(&weyl::conditional_expectation(&a, n)?)?.norm()?;
            Ok(ResidualCheck {
                n,
                lo,
                hi,
                lip,
                residual,
                bound: lip * uhf_tail(lambda, n as u64),
            })
        })
        .collect()
}

/// Dimension brackets for the Lip unit ball of the rotation algebra on `T^p`.
///
/// Lower: monomials with `|k_i| <= n` have Lip-norm at most `sqrt(p) n`, so
/// `D >= D_tau((2n+1)^p orthonormal, 1/2)` at `delta = 1 / (2 sqrt(p) n)`.
/// Upper: the Cesaro mean of order `n` is within `2 pi p M_n` of the identity on
/// the unit ball (`M_n` the first absolute moment of the Fejer kernel) and has
/// rank `(2n+1)^p`.
pub fn torus_dimension(p: usize, ns: &[u64], conv: Convention) -> Result<DimensionExperiment> {
    if p < 1 || p > MAX_EIGEN_RANK {
        return Err(Error::pre(format!("torus rank must be in 1..={MAX_EIGEN_RANK}")));
    }
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] < 1 {
        return Err(Error::pre("n values must be increasing, positive and at least two"));
    }
    let rows = ns
        .iter()
        .map(|&n| {
            let m = (2 * n + 1)
                .checked_pow(p as u32)
                .ok_or_else(|| Error::cap("monomial family", u128::MAX, u64::MAX as u128))?;
            Ok(DimensionRow {
                n,
                delta_lower: 1.0 / (2.0 * (p as f64).sqrt() * n as f64),
                dim_lower: approxdim::dim_exact_orthonormal(m as usize, 0.5, conv)? as u64,
                delta_upper: 2.0 * std::f64::consts::PI * p as f64 * fejer_abs_moment(n),
                dim_upper: m,
                gram_defect: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (slope_lower, slope_upper) = slopes(&rows)?;
    Ok(DimensionExperiment {
        rows,
        slope_lower,
        slope_upper,
        target: p as f64,
    })
}
