//! Dense complex matrices: products, Kronecker products, singular values
//! and the operator norm.
//!
//! Matrices are small (desk scale) and stored row-major. Singular values come
//! from a one-sided Jacobi iteration, which is accurate to working precision
//! for every singular value, not only the large ones.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::caps::Caps;
use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Above this size `operator_norm` switches from the full spectrum to power
/// iteration on `m* m`.
pub const DENSE_NORM_LIMIT: usize = 256;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl CMatrix {
    /// Build from row-major entries. Rejects length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::pre(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::pre("matrix entries must be finite"));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &z) in diag.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Build from real row slices; convenient in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::pre("ragged rows"));
            }
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(rows.len(), cols, data)
    }

    /// Matrix with independent entries whose real and imaginary parts are uniform on [-1, 1].
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
        })
    }

    /// Random unitary from the QR (Gram-Schmidt) factor of a random matrix.
    pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let a = Self::random(n, n, rng);
            let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
            let mut ok = true;
            for j in 0..n {
                let mut v = a.column(j);
                for q in &cols {
                    let proj = inner(q, &v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= proj * qi;
                    }
                }
                let nrm = norm2(&v);
                if nrm < 1e-8 {
                    ok = false;
                    break;
                }
                v.iter_mut().for_each(|z| *z /= nrm);
                cols.push(v);
            }
            if ok {
                return Self::from_columns(n, &cols);
            }
        }
    }

    pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Trace divided by the dimension (the unique tracial state on a full matrix algebra).
    pub fn normalized_trace(&self) -> C64 {
        self.trace() / self.rows as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::pre(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Integer power of a square matrix.
    pub fn pow(&self, mut e: u32) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::pre("pow needs a square matrix"));
        }
        let mut base = self.clone();
        let mut acc = CMatrix::identity(self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.matmul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base)?;
            }
        }
        Ok(acc)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    /// Panics on a dimension mismatch; use [`CMatrix::matmul`] for a fallible product.
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix dimension mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `<a, b>` linear in the second argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product under the global dimension cap.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_caps(a, b, &Caps::global())
}

pub fn kron_with_caps(a: &CMatrix, b: &CMatrix, caps: &Caps) -> Result<CMatrix> {
    let rows = a.rows as u128 * b.rows as u128;
    let cols = a.cols as u128 * b.cols as u128;
    let limit = caps.matrix_dim as u128;
    if rows > limit || cols > limit {
        return Err(Error::cap("kron result dimension", rows.max(cols), limit));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut out = CMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                let base = (ar * b.rows + br) * cols + ac * b.cols;
                for bc in 0..b.cols {
                    out.data[base + bc] = x * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Nonincreasing list of singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum(Vec<f64>);

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    /// `sum_{k >= r} s_k^2`, the squared Frobenius error of the best rank-`r` fit.
    pub fn tail_energy(&self, r: usize) -> f64 {
        self.0.iter().skip(r).map(|s| s * s).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Thin singular value decomposition `m = u diag(s) v*`.
///
/// `u` is `rows x k` and `v` is `cols x k` with `k = min(rows, cols)`; columns
/// of `u` belonging to zero singular values are left as zero vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

pub fn svd(m: &CMatrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::pre("singular values of a non-finite matrix"));
    }
    if m.rows < m.cols {
        let t = svd_tall(&m.adjoint())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    svd_tall(m)
}

// One-sided Jacobi on the columns of a matrix with rows >= cols.
fn svd_tall(m: &CMatrix) -> Result<Svd> {
    let (rows, n) = (m.rows, m.cols);
    let mut a: Vec<Vec<C64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();
    let eps = 1e-15;
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = inner(&a[p], &a[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let conj_phase = phase.conj();
                rotate(&mut a, p, q, c, s, conj_phase);
                rotate(&mut v, p, q, c, s, conj_phase);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<(f64, usize)> = a.iter().map(|col| norm2(col)).zip(0..n).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let scale = order.first().map_or(0.0, |o| o.0);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for &(sigma, j) in &order {
        s.push(sigma);
        if sigma > scale * 1e-300 && sigma > 0.0 {
            u_cols.push(a[j].iter().map(|z| z / sigma).collect());
        } else {
            u_cols.push(vec![ZERO; rows]);
        }
        v_cols.push(v[j].clone());
    }
    Ok(Svd {
        u: CMatrix::from_columns(rows, &u_cols),
        s,
        v: CMatrix::from_columns(n, &v_cols),
    })
}

// a_p <- c a_p - s ph a_q ; a_q <- s a_p + c ph a_q
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, ph: C64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yp = *y * ph;
        let xp = *x;
        *x = xp * c - yp * s;
        *y = xp * s + yp * c;
    }
}

pub fn singular_values(m: &CMatrix) -> Result<SingularSpectrum> {
    let mut s = svd(m)?.s;
    s.iter_mut().for_each(|x| *x = x.max(0.0));
    Ok(SingularSpectrum(s))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::pre("operator norm of a non-finite matrix"));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    if m.rows.max(m.cols) <= DENSE_NORM_LIMIT {
        Ok(singular_values(m)?.largest())
    } else {
        operator_norm_power(m, 1e-14, 100_000)
    }
}

/// Operator norm by power iteration on `m* m`, stopping when the estimate
/// changes by less than `rel_tol` relatively.
pub fn operator_norm_power(m: &CMatrix, rel_tol: f64, max_iter: usize) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::pre("operator norm of a non-finite matrix"));
    }
    let n = m.cols;
    if n == 0 || m.rows == 0 {
        return Ok(0.0);
    }
    // Deterministic start with no special alignment to any basis vector.
    let mut x: Vec<C64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
            C64::new(1.0 + t.fract(), (2.0 * t).fract() - 0.5)
        })
        .collect();
    let mut nx = norm2(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let adj = m.adjoint();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let y = matvec(m, &x);
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let z = matvec(&adj, &y);
        nx = norm2(&z);
        let next = ny;
        x = z.into_iter().map(|c| c / nx).collect();
        if (next - estimate).abs() <= rel_tol * next {
            return Ok(next.max(estimate));
        }
        estimate = next;
    }
    Ok(estimate)
}

pub fn matvec(m: &CMatrix, x: &[C64]) -> Vec<C64> {
    (0..m.rows)
        .map(|r| {
            m.data[r * m.cols..(r + 1) * m.cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}
