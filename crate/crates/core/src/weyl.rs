//! Finite windows of the infinite tensor product of `p x p` matrix algebras.
//!
//! Site `k` of a window carries a copy of `M_p` generated by the clock `u` and
//! shift `v` with `vu = rho uv`, `rho = exp(2 pi i / p)`. Matrices on a window
//! `[lo, hi]` are Kronecker products with site `lo` as the most significant
//! factor. Every element has a Weyl expansion
//!
//! ```text
//! a = sum_{i, j} c_{i,j} (u^{i_lo} v^{j_lo} (x) ... (x) u^{i_hi} v^{j_hi})
//! ```
//!
//! and the product group `(Z_p x Z_p)^window` acts by multiplying `c_{i,j}` by
//! `prod_k rho^(r_k i_k + s_k j_k)`. The coefficient basis drives the
//! conditional expectations and the GNS vectors.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};

/// Sites `lo..=hi` each carrying `M_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeylWindow {
    p: usize,
    lo: i64,
    hi: i64,
}

impl WeylWindow {
    pub fn new(p: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::with_caps(p, lo, hi, &Caps::global())
    }

    pub fn with_caps(p: usize, lo: i64, hi: i64, caps: &Caps) -> Result<Self> {
        if p < 2 {
            return Err(Error::pre(format!("p must be at least 2, got {p}")));
        }
        if lo > hi {
            return Err(Error::pre(format!("empty window [{lo}, {hi}]")));
        }
        let len = (hi - lo + 1) as u32;
        let dim = (p as u128).checked_pow(len).unwrap_or(u128::MAX);
        if dim > caps.matrix_dim as u128 {
            return Err(Error::cap("Weyl window matrix dimension", dim, caps.matrix_dim as u128));
        }
        Ok(WeylWindow { p, lo, hi })
    }

    /// Symmetric window `[-n, n]`.
    pub fn centered(p: usize, n: i64) -> Result<Self> {
        Self::new(p, -n, n)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Matrix dimension `p^len`.
    pub fn dim(&self) -> usize {
        self.p.pow(self.len() as u32)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn contains(&self, other: &WeylWindow) -> bool {
        self.p == other.p && self.lo <= other.lo && other.hi <= self.hi
    }

    /// Smallest window containing both.
    pub fn hull(&self, other: &WeylWindow) -> Result<WeylWindow> {
        if self.p != other.p {
            return Err(Error::pre("windows over different p"));
        }
        WeylWindow::new(self.p, self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn shifted(&self, by: i64) -> WeylWindow {
        WeylWindow {
            p: self.p,
            lo: self.lo + by,
            hi: self.hi + by,
        }
    }

    /// Digits of a basis index, site `lo` first.
    fn digits(&self, mut idx: usize, out: &mut [usize]) {
        for d in out.iter_mut().rev() {
            *d = idx % self.p;
            idx /= self.p;
        }
    }

    fn from_digits(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.p + d)
    }

    // Componentwise (r + j) mod p on basis indices.
    fn add_mod(&self, mut r: usize, mut j: usize) -> usize {
        let p = self.p;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.len() {
            out += ((r % p + j % p) % p) * place;
            r /= p;
            j /= p;
            place *= p;
        }
        out
    }

    // sum_k x_k y_k mod p on basis indices.
    fn dot_mod(&self, mut x: usize, mut y: usize) -> usize {
        let p = self.p;
        let mut acc = 0;
        for _ in 0..self.len() {
            acc += (x % p) * (y % p);
            x /= p;
            y /= p;
        }
        acc % p
    }

    fn root(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI / self.p as f64)
    }

    fn root_powers(&self) -> Vec<C64> {
        (0..self.p)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / self.p as f64))
            .collect()
    }
}

/// The clock `u = diag(1, rho, ..., rho^(p-1))` and the cyclic shift `v` with
/// ones on the superdiagonal and in the bottom left corner.
pub fn clock_shift(p: usize) -> Result<(CMatrix, CMatrix)> {
    if p < 2 {
        return Err(Error::pre(format!("p must be at least 2, got {p}")));
    }
    let u = CMatrix::from_diag(
        &(0..p)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64))
            .collect::<Vec<_>>(),
    );
    let v = CMatrix::from_fn(p, p, |r, c| if c == (r + 1) % p { ONE } else { ZERO });
    Ok((u, v))
}

/// Element of `(Z_p x Z_p)^window`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    window: WeylWindow,
    pairs: Vec<(usize, usize)>,
}

impl GroupElement {
    pub fn new(window: WeylWindow, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.len() != window.len() {
            return Err(Error::pre(format!(
                "group element has {} pairs for a window of {} sites",
                pairs.len(),
                window.len()
            )));
        }
        let p = window.p;
        let pairs = pairs.into_iter().map(|(r, s)| (r % p, s % p)).collect();
        Ok(GroupElement { window, pairs })
    }

    pub fn identity(window: WeylWindow) -> Self {
        GroupElement {
            window,
            pairs: vec![(0, 0); window.len()],
        }
    }

    /// Element that is `(r, s)` at `site` and trivial elsewhere.
    pub fn at_site(window: WeylWindow, site: i64, r: usize, s: usize) -> Result<Self> {
        if site < window.lo || site > window.hi {
            return Err(Error::pre(format!("site {site} outside the window")));
        }
        let mut g = Self::identity(window);
        g.pairs[(site - window.lo) as usize] = (r % window.p, s % window.p);
        Ok(g)
    }

    /// Decode the `index`-th element in the enumeration order used by the Lip-norm sup.
    fn from_index(window: WeylWindow, mut index: u64) -> Self {
        let p = window.p as u64;
        let mut pairs = vec![(0, 0); window.len()];
        for pair in pairs.iter_mut().rev() {
            let s = (index % p) as usize;
            index /= p;
            let r = (index % p) as usize;
            index /= p;
            *pair = (r, s);
        }
        GroupElement { window, pairs }
    }

    pub fn window(&self) -> WeylWindow {
        self.window
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|&pair| pair == (0, 0))
    }

    fn r_index(&self) -> usize {
        let digits: Vec<usize> = self.pairs.iter().map(|&(r, _)| r).collect();
        self.window.from_digits(&digits)
    }

    fn s_index(&self) -> usize {
        let digits: Vec<usize> = self.pairs.iter().map(|&(_, s)| s).collect();
        self.window.from_digits(&digits)
    }
}

/// Distance from `(r/p, s/p)` to the origin in `R^2 / Z^2`.
pub fn site_length(p: usize, r: usize, s: usize) -> f64 {
    let (r, s) = (r % p, s % p);
    let dr = r.min(p - r) as f64;
    let ds = s.min(p - s) as f64;
    dr.hypot(ds) / p as f64
}

/// `l_lambda(g) = sum_k lambda^|k| l(g_k)`.
pub fn group_length(g: &GroupElement, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(g.window
        .sites()
        .zip(&g.pairs)
        .map(|(k, &(r, s))| lambda.powi(k.unsigned_abs() as i32) * site_length(g.window.p, r, s))
        .sum())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::pre(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok(())
}

/// Weyl coefficients `c_{i,j}` of an element, stored densely.
///
/// Entry `(i, j)` lives at `i * dim + j` where `i` and `j` are the basis
/// indices whose digits are the per-site exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylCoefficients {
    window: WeylWindow,
    values: Vec<C64>,
}

/// Per-site exponent pairs `(i_k, j_k)`, site `lo` first.
pub type WeylExponent = Vec<(usize, usize)>;

impl WeylCoefficients {
    pub fn window(&self) -> WeylWindow {
        self.window
    }

    /// Flat coefficient vector, which is also the GNS vector for the trace.
    pub fn as_slice(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, exponent: &[(usize, usize)]) -> Result<C64> {
        let (i, j) = self.split(exponent)?;
        Ok(self.values[i * self.window.dim() + j])
    }

    fn split(&self, exponent: &[(usize, usize)]) -> Result<(usize, usize)> {
        if exponent.len() != self.window.len() {
            return Err(Error::pre("exponent length does not match the window"));
        }
        let p = self.window.p;
        let i: Vec<usize> = exponent.iter().map(|&(i, _)| i % p).collect();
        let j: Vec<usize> = exponent.iter().map(|&(_, j)| j % p).collect();
        Ok((self.window.from_digits(&i), self.window.from_digits(&j)))
    }

    fn exponent_of(&self, flat: usize) -> WeylExponent {
        let d = self.window.dim();
        let len = self.window.len();
        let mut i = vec![0; len];
        let mut j = vec![0; len];
        self.window.digits(flat / d, &mut i);
        self.window.digits(flat % d, &mut j);
        i.into_iter().zip(j).collect()
    }

    /// Coefficients with modulus above `tol`, in flat index order.
    pub fn nonzero(&self, tol: f64) -> Vec<(WeylExponent, C64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(k, &c)| (self.exponent_of(k), c))
            .collect()
    }

    /// `sum |c|^2`, equal to `tau(a* a)` by orthonormality.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Rebuild the matrix `sum c_{i,j} m_{i,j}`.
    pub fn reconstruct(&self) -> WeylElement {
        let w = self.window;
        let d = w.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut column = vec![ZERO; d];
        for j in 0..d {
            for (i, slot) in column.iter_mut().enumerate() {
                *slot = self.values[i * d + j];
            }
            if column.iter().all(|&c| c == ZERO) {
                continue;
            }
            // a[r, r + j] = sum_i c_{i,j} rho^(i.r)
            let diag = multi_dft(&w, &column, 1.0);
            for (r, z) in diag.into_iter().enumerate() {
                m[(r, w.add_mod(r, j))] = z;
            }
        }
        WeylElement::from_parts(w, m)
    }
}

// x_hat[i] = sum_r x[r] rho^(sign * i.r) on (Z_p)^len, axis by axis.
fn multi_dft(w: &WeylWindow, x: &[C64], sign: f64) -> Vec<C64> {
    let p = w.p;
    let powers = w.root_powers();
    let mut data = x.to_vec();
    let mut buf = vec![ZERO; p];
    let d = data.len();
    let mut stride = 1;
    for _ in 0..w.len() {
        let block = stride * p;
        for start in (0..d).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, b) in buf.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for r in 0..p {
                        let e = (k * r) % p;
                        let ph = if sign > 0.0 { powers[e] } else { powers[e].conj() };
                        acc += data[base + r * stride] * ph;
                    }
                    *b = acc;
                }
                for (k, b) in buf.iter().enumerate() {
                    data[base + k * stride] = *b;
                }
            }
        }
        stride = block;
    }
    data
}

/// Square matrix on a window.
#[derive(Debug, Clone)]
pub struct WeylElement {
    window: WeylWindow,
    matrix: CMatrix,
    coeffs: OnceLock<WeylCoefficients>,
}

impl PartialEq for WeylElement {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.matrix == other.matrix
    }
}

impl WeylElement {
    pub fn new(window: WeylWindow, matrix: CMatrix) -> Result<Self> {
        let d = window.dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::pre(format!(
                "window needs a {d}x{d} matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self::from_parts(window, matrix))
    }

    fn from_parts(window: WeylWindow, matrix: CMatrix) -> Self {
        WeylElement {
            window,
            matrix,
            coeffs: OnceLock::new(),
        }
    }

    pub fn identity(window: WeylWindow) -> Self {
        Self::from_parts(window, CMatrix::identity(window.dim()))
    }

    pub fn random<R: Rng + ?Sized>(window: WeylWindow, rng: &mut R) -> Self {
        let d = window.dim();
        Self::from_parts(window, CMatrix::random(d, d, rng))
    }

    pub fn window(&self) -> WeylWindow {
        self.window
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn norm(&self) -> Result<f64> {
        linalg::operator_norm(&self.matrix)
    }

    pub fn adjoint(&self) -> WeylElement {
        Self::from_parts(self.window, self.matrix.adjoint())
    }

    pub fn scale(&self, s: C64) -> WeylElement {
        Self::from_parts(self.window, self.matrix.scale(s))
    }

    pub fn coefficients(&self) -> &WeylCoefficients {
        self.coeffs.get_or_init(|| expand_matrix(self.window, &self.matrix))
    }

    /// Same operator viewed on a larger window (identity on the new sites).
    pub fn extend_to(&self, target: WeylWindow) -> Result<WeylElement> {
        if !target.contains(&self.window) {
            return Err(Error::pre("target window does not contain the element's window"));
        }
        if target == self.window {
            return Ok(self.clone());
        }
        let p = self.window.p;
        let left = p.pow((self.window.lo - target.lo) as u32);
        let right = p.pow((target.hi - self.window.hi) as u32);
        let m = linalg::kron(&CMatrix::identity(left), &self.matrix)?;
        let m = linalg::kron(&m, &CMatrix::identity(right))?;
        Ok(Self::from_parts(target, m))
    }

    /// Product in the infinite tensor product, realized on the hull of both windows.
    pub fn mul(&self, other: &WeylElement) -> Result<WeylElement> {
        let w = self.window.hull(&other.window)?;
        let a = self.extend_to(w)?;
        let b = other.extend_to(w)?;
        Ok(Self::from_parts(w, a.matrix.matmul(&b.matrix)?))
    }

    pub fn sub(&self, other: &WeylElement) -> Result<WeylElement> {
        let w = self.window.hull(&other.window)?;
        let a = self.extend_to(w)?;
        let b = other.extend_to(w)?;
        Ok(Self::from_parts(w, &a.matrix - &b.matrix))
    }

    /// The tensor shift: site `k` moves to site `k + by`.
    pub fn shift(&self, by: i64) -> WeylElement {
        Self::from_parts(self.window.shifted(by), self.matrix.clone())
    }

    /// `tau(b* a)` with `tau` the normalized trace; windows are aligned first.
    pub fn trace_pairing(&self, b: &WeylElement) -> Result<C64> {
        let w = self.window.hull(&b.window)?;
        let a = self.extend_to(w)?;
        let b = b.extend_to(w)?;
        let s: C64 = a
            .matrix
            .as_slice()
            .iter()
            .zip(b.matrix.as_slice())
            .map(|(x, y)| y.conj() * x)
            .sum();
        Ok(s / w.dim() as f64)
    }

    pub fn to_json(&self) -> WeylElementJson {
        WeylElementJson {
            p: self.window.p,
            lo: self.window.lo,
            hi: self.window.hi,
            coefficients: self
                .coefficients()
                .nonzero(1e-15)
                .into_iter()
                .map(|(e, c)| (e.into_iter().map(|(i, j)| [i, j]).collect(), c.re, c.im))
                .collect(),
        }
    }

    pub fn from_json(json: &WeylElementJson) -> Result<WeylElement> {
        let window = WeylWindow::new(json.p, json.lo, json.hi)?;
        let d = window.dim();
        let mut values = vec![ZERO; d * d];
        let mut coeffs = WeylCoefficients {
            window,
            values: Vec::new(),
        };
        for (exp, re, im) in &json.coefficients {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::pre("non-finite coefficient"));
            }
            if exp.iter().any(|&[i, j]| i >= json.p || j >= json.p) {
                return Err(Error::pre("exponents must be reduced mod p"));
            }
            let pairs: Vec<(usize, usize)> = exp.iter().map(|&[i, j]| (i, j)).collect();
            let (i, j) = coeffs.split(&pairs)?;
            values[i * d + j] += C64::new(*re, *im);
        }
        coeffs.values = values;
        Ok(coeffs.reconstruct())
    }
}

/// Serialized element: window plus nonzero Weyl coefficients `(exponent, re, im)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylElementJson {
    pub p: usize,
    pub lo: i64,
    pub hi: i64,
    pub coefficients: Vec<(Vec<[usize; 2]>, f64, f64)>,
}

/// `u^{i_lo} v^{j_lo} (x) ... (x) u^{i_hi} v^{j_hi}`.
pub fn weyl_monomial(window: WeylWindow, exponents: &[(usize, usize)]) -> Result<WeylElement> {
    if exponents.len() != window.len() {
        return Err(Error::pre(format!(
            "{} exponent pairs for a window of {} sites",
            exponents.len(),
            window.len()
        )));
    }
    let p = window.p;
    let i: Vec<usize> = exponents.iter().map(|&(i, _)| i % p).collect();
    let j: Vec<usize> = exponents.iter().map(|&(_, j)| j % p).collect();
    let (i, j) = (window.from_digits(&i), window.from_digits(&j));
    let powers = window.root_powers();
    let d = window.dim();
    let mut m = CMatrix::zeros(d, d);
    for r in 0..d {
        m[(r, window.add_mod(r, j))] = powers[window.dot_mod(i, r)];
    }
    Ok(WeylElement::from_parts(window, m))
}

/// GNS vector of a monomial as `(flat index, coefficient)` pairs above `tol`.
///
/// Builds the single nonzero cyclic diagonal of the monomial and expands it,
/// which avoids the dense `d x d` matrix.
pub fn monomial_gns_sparse(window: WeylWindow, exponents: &[(usize, usize)], tol: f64) -> Result<Vec<(usize, C64)>> {
    if exponents.len() != window.len() {
        return Err(Error::pre(format!(
            "{} exponent pairs for a window of {} sites",
            exponents.len(),
            window.len()
        )));
    }
    let p = window.p;
    let i: Vec<usize> = exponents.iter().map(|&(i, _)| i % p).collect();
    let j: Vec<usize> = exponents.iter().map(|&(_, j)| j % p).collect();
    let (i, j) = (window.from_digits(&i), window.from_digits(&j));
    let powers = window.root_powers();
    let d = window.dim();
    let diag: Vec<C64> = (0..d).map(|r| powers[window.dot_mod(i, r)]).collect();
    let hat = multi_dft(&window, &diag, -1.0);
    let scale = 1.0 / d as f64;
    Ok(hat
        .into_iter()
        .enumerate()
        .map(|(ii, z)| (ii * d + j, z * scale))
        .filter(|(_, z)| z.norm() > tol)
        .collect())
}

/// All exponent vectors of a window, in flat coefficient order.
pub fn all_exponents(window: WeylWindow) -> impl Iterator<Item = WeylExponent> {
    let d = window.dim();
    let len = window.len();
    (0..d * d).map(move |flat| {
        let mut i = vec![0; len];
        let mut j = vec![0; len];
        window.digits(flat / d, &mut i);
        window.digits(flat % d, &mut j);
        i.into_iter().zip(j).collect()
    })
}

/// Weyl coefficients `c_m = tau(m* a)`.
pub fn weyl_expand(a: &WeylElement) -> WeylCoefficients {
    a.coefficients().clone()
}

fn expand_matrix(w: WeylWindow, m: &CMatrix) -> WeylCoefficients {
    let d = w.dim();
    let mut values = vec![ZERO; d * d];
    let mut diag = vec![ZERO; d];
    let scale = 1.0 / d as f64;
    for j in 0..d {
        let mut any = false;
        for (r, slot) in diag.iter_mut().enumerate() {
            *slot = m[(r, w.add_mod(r, j))];
            any |= *slot != ZERO;
        }
        if !any {
            continue;
        }
        let hat = multi_dft(&w, &diag, -1.0);
        for (i, z) in hat.into_iter().enumerate() {
            values[i * d + j] = z * scale;
        }
    }
    WeylCoefficients { window: w, values }
}

/// `E_n`: drop every Weyl coefficient that is nontrivial at a site outside `[-n, n]`.
pub fn conditional_expectation(a: &WeylElement, n: i64) -> Result<WeylElement> {
    let w = a.window;
    if n < 0 {
        return Err(Error::pre("conditional expectation needs n >= 0"));
    }
    if w.hi < -n || w.lo > n {
        return Err(Error::pre(format!(
            "[-{n}, {n}] does not meet the window [{}, {}]",
            w.lo, w.hi
        )));
    }
    if w.lo >= -n && w.hi <= n {
        return Ok(a.clone());
    }
    let d = w.dim();
    let mut outside = vec![0usize; w.len()];
    // mask[idx] is true when the basis index has a nonzero digit outside [-n, n]
    let outside_sites: Vec<bool> = w.sites().map(|k| k < -n || k > n).collect();
    let mask: Vec<bool> = (0..d)
        .map(|idx| {
            w.digits(idx, &mut outside);
            outside
                .iter()
                .zip(&outside_sites)
                .any(|(&digit, &out)| out && digit != 0)
        })
        .collect();
    let mut coeffs = a.coefficients().clone();
    for i in 0..d {
        for j in 0..d {
            if mask[i] || mask[j] {
                coeffs.values[i * d + j] = ZERO;
            }
        }
    }
    Ok(coeffs.reconstruct())
}

/// `gamma_g(a)`: multiplies `c_{i,j}` by `prod_k rho^(r_k i_k + s_k j_k)`.
///
/// Computed entrywise as `gamma_g(a)[x, y] = rho^(s.(y - x)) a[x + r, y + r]`.
pub fn weyl_action(g: &GroupElement, a: &WeylElement) -> Result<WeylElement> {
    let w = a.window;
    if g.window != w {
        return Err(Error::pre("group element and element live on different windows"));
    }
    Ok(WeylElement::from_parts(w, act_matrix(&w, g.r_index(), g.s_index(), &a.matrix)))
}

fn act_matrix(w: &WeylWindow, r_idx: usize, s_idx: usize, m: &CMatrix) -> CMatrix {
    let d = w.dim();
    let powers = w.root_powers();
    let shifted: Vec<usize> = (0..d).map(|x| w.add_mod(x, r_idx)).collect();
    // y - x = y + (p - 1) x digitwise
    let neg: Vec<usize> = (0..d)
        .map(|x| {
            let mut digits = vec![0; w.len()];
            w.digits(x, &mut digits);
            digits.iter_mut().for_each(|dg| *dg = (w.p - *dg) % w.p);
            w.from_digits(&digits)
        })
        .collect();
    CMatrix::from_fn(d, d, |x, y| {
        let diff = w.add_mod(y, neg[x]);
        powers[w.dot_mod(s_idx, diff)] * m[(shifted[x], shifted[y])]
    })
}

/// `L(a) = sup_{g != e} ||gamma_g(a) - a|| / l_lambda(g)` by exhaustive enumeration.
pub fn weyl_lip_norm(a: &WeylElement, lambda: f64) -> Result<f64> {
    weyl_lip_norm_with_caps(a, lambda, &Caps::global())
}

pub fn weyl_lip_norm_with_caps(a: &WeylElement, lambda: f64, caps: &Caps) -> Result<f64> {
    check_lambda(lambda)?;
    let w = a.window;
    let order = (w.p as u128).pow(2 * w.len() as u32);
    if order > caps.group_enum as u128 {
        return Err(Error::cap("Weyl group enumeration", order, caps.group_enum as u128));
    }
    let results: Vec<Result<f64>> = (1..order as u64)
        .into_par_iter()
        .map(|idx| {
            let g = GroupElement::from_index(w, idx);
            let moved = act_matrix(&w, g.r_index(), g.s_index(), &a.matrix);
            let diff = &moved - &a.matrix;
            let num = linalg::operator_norm(&diff)?;
            Ok(num / group_length(&g, lambda)?)
        })
        .collect();
    let mut best = 0.0f64;
    for r in results {
        best = best.max(r?);
    }
    Ok(best)
}

/// `rho = exp(2 pi i / p)` for the window's `p`.
pub fn root_of_unity(w: &WeylWindow) -> C64 {
    w.root()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn win(p: usize, lo: i64, hi: i64) -> WeylWindow {
        WeylWindow::new(p, lo, hi).unwrap()
    }

    #[test]
    fn sparse_gns_matches_dense() {
        let w = win(3, 0, 1);
        for e in all_exponents(w) {
            let dense = weyl_monomial(w, &e).unwrap();
            let sparse = monomial_gns_sparse(w, &e, 1e-12).unwrap();
            assert_eq!(sparse.len(), 1);
            let (flat, c) = sparse[0];
            assert!((c - ONE).norm() < 1e-12);
            assert!((dense.coefficients().as_slice()[flat] - ONE).norm() < 1e-12);
        }
        assert_eq!(all_exponents(w).count(), 81);
    }

    #[test]
    fn clock_shift_p2() {
        let (u, v) = clock_shift(2).unwrap();
        let z = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        assert!(u.max_abs_diff(&z) < 1e-15);
        assert_eq!(v, CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap());
        let vu = &v * &u;
        let uv = &u * &v;
        assert!(vu.max_abs_diff(&uv.scale(C64::new(-1.0, 0.0))) < 1e-15);
    }

    #[test]
    fn clock_shift_orders_and_commutation() {
        for p in 2..=7 {
            let (u, v) = clock_shift(p).unwrap();
            let id = CMatrix::identity(p);
            assert!(u.pow(p as u32).unwrap().max_abs_diff(&id) < 1e-12);
            assert!(v.pow(p as u32).unwrap().max_abs_diff(&id) < 1e-12);
            let rho = C64::from_polar(1.0, 2.0 * PI / p as f64);
            let err = linalg::operator_norm(&(&(&v * &u) - &(&u * &v).scale(rho))).unwrap();
            assert!(err < 1e-12);
        }
        assert!(clock_shift(1).is_err());
    }

    #[test]
    fn monomial_matches_kron() {
        let w = win(2, 0, 1);
        let m = weyl_monomial(w, &[(1, 0), (0, 1)]).unwrap();
        let (u, v) = clock_shift(2).unwrap();
        assert_eq!(m.matrix(), &linalg::kron(&u, &v).unwrap());
        let id = weyl_monomial(w, &[(0, 0), (0, 0)]).unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(4));
        assert!(weyl_monomial(w, &[(0, 0)]).is_err());

        let w3 = win(3, -1, 0);
        let m = weyl_monomial(w3, &[(2, 1), (1, 2)]).unwrap();
        let (u, v) = clock_shift(3).unwrap();
        let site = |i: u32, j: u32| &u.pow(i).unwrap() * &v.pow(j).unwrap();
        let expected = linalg::kron(&site(2, 1), &site(1, 2)).unwrap();
        assert!(m.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn nontrivial_monomials_are_traceless() {
        let w = win(3, 0, 1);
        for i0 in 0..3 {
            for j0 in 0..3 {
                for i1 in 0..3 {
                    for j1 in 0..3 {
                        let m = weyl_monomial(w, &[(i0, j0), (i1, j1)]).unwrap();
                        let t = m.matrix().normalized_trace();
                        if (i0, j0, i1, j1) == (0, 0, 0, 0) {
                            assert!((t - ONE).norm() < 1e-14);
                        } else {
                            assert!(t.norm() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn expand_identity_and_monomial() {
        let w = win(2, 0, 1);
        let c = weyl_expand(&WeylElement::identity(w));
        let nz = c.nonzero(1e-14);
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, vec![(0, 0), (0, 0)]);
        assert!((nz[0].1 - ONE).norm() < 1e-15);

        let m = weyl_monomial(w, &[(1, 0), (0, 1)]).unwrap();
        let nz = weyl_expand(&m).nonzero(1e-14);
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, vec![(1, 0), (0, 1)]);
        assert!((nz[0].1 - ONE).norm() < 1e-15);
    }

    #[test]
    fn expand_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in [win(2, 0, 1), win(3, -1, 0), win(2, -1, 1), win(5, 0, 0)] {
            let a = WeylElement::random(w, &mut rng);
            let c = weyl_expand(&a);
            let back = c.reconstruct();
            assert!(back.matrix().max_abs_diff(a.matrix()) < 1e-10);
            let tau = a.trace_pairing(&a).unwrap().re;
            assert!((c.energy() - tau).abs() < 1e-9 * tau);
        }
    }

    #[test]
    fn expansion_matches_trace_pairing_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = win(3, 0, 1);
        let a = WeylElement::random(w, &mut rng);
        let c = weyl_expand(&a);
        for (i0, j0, i1, j1) in [(0, 0, 0, 0), (1, 2, 0, 1), (2, 2, 2, 2), (0, 1, 1, 0)] {
            let m = weyl_monomial(w, &[(i0, j0), (i1, j1)]).unwrap();
            let direct = a.trace_pairing(&m).unwrap();
            let stored = c.get(&[(i0, j0), (i1, j1)]).unwrap();
            assert!((direct - stored).norm() < 1e-13);
        }
    }

    #[test]
    fn expectation_fixes_supported_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = WeylElement::random(win(2, -1, 1), &mut rng);
        let e = conditional_expectation(&a, 1).unwrap();
        assert_eq!(e, a);
        assert!(conditional_expectation(&a, -1).is_err());
        let far = WeylElement::random(win(2, 5, 5), &mut rng);
        assert!(conditional_expectation(&far, 1).is_err());
    }

    #[test]
    fn expectation_kills_outside_support() {
        let w = win(2, 0, 1);
        let a = weyl_monomial(w, &[(1, 0), (1, 0)]).unwrap();
        let e = conditional_expectation(&a, 0).unwrap();
        assert!(e.matrix().frobenius_norm() < 1e-14);
    }

    #[test]
    fn expectation_equals_group_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let w = win(2, 0, 1);
        let a = WeylElement::random(w, &mut rng);
        let mut avg = CMatrix::zeros(4, 4);
        for r in 0..2 {
            for s in 0..2 {
                let g = GroupElement::at_site(w, 1, r, s).unwrap();
                avg = &avg + weyl_action(&g, &a).unwrap().matrix();
            }
        }
        let avg = avg.scale(C64::new(0.25, 0.0));
        let e = conditional_expectation(&a, 0).unwrap();
        assert!(e.matrix().max_abs_diff(&avg) < 1e-10);
        let ee = conditional_expectation(&e, 0).unwrap();
        assert!(ee.matrix().max_abs_diff(e.matrix()) < 1e-12);
        assert!(e.norm().unwrap() <= a.norm().unwrap() + 1e-12);
    }

    #[test]
    fn lengths() {
        let w = win(2, 0, 2);
        assert_eq!(group_length(&GroupElement::identity(w), 0.5).unwrap(), 0.0);
        let g = GroupElement::at_site(w, 0, 1, 0).unwrap();
        assert!((group_length(&g, 0.3).unwrap() - 0.5).abs() < 1e-15);
        let g = GroupElement::at_site(w, 2, 1, 1).unwrap();
        let expected = 0.25 * (2f64.sqrt() / 2.0);
        assert!((group_length(&g, 0.5).unwrap() - expected).abs() < 1e-15);
        assert!(group_length(&g, 1.0).is_err());
    }

    #[test]
    fn action_on_generators() {
        let w = win(2, 0, 0);
        let u = weyl_monomial(w, &[(1, 0)]).unwrap();
        let g = GroupElement::at_site(w, 0, 1, 0).unwrap();
        let moved = weyl_action(&g, &u).unwrap();
        assert!(moved.matrix().max_abs_diff(&u.matrix().scale(C64::new(-1.0, 0.0))) < 1e-15);
        let id = GroupElement::identity(w);
        assert_eq!(weyl_action(&id, &u).unwrap(), u);
    }

    #[test]
    fn action_matches_coefficient_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let w = win(3, -1, 0);
        let a = WeylElement::random(w, &mut rng);
        let g = GroupElement::new(w, vec![(2, 1), (1, 1)]).unwrap();
        let fast = weyl_action(&g, &a).unwrap();
        let c = weyl_expand(&a);
        let mut coeffs = c.clone();
        let rho = root_of_unity(&w);
        for (flat, val) in coeffs.values.iter_mut().enumerate() {
            let e = c.exponent_of(flat);
            let power: usize = e
                .iter()
                .zip(g.pairs())
                .map(|(&(i, j), &(r, s))| r * i + s * j)
                .sum();
            *val *= rho.powu(power as u32);
        }
        assert!(coeffs.reconstruct().matrix().max_abs_diff(fast.matrix()) < 1e-12);
        let na = a.norm().unwrap();
        assert!((fast.norm().unwrap() - na).abs() < 1e-10 * na);
    }

    #[test]
    fn lip_norm_examples() {
        let w = win(2, 0, 0);
        let id = WeylElement::identity(w).scale(C64::new(2.0, -1.0));
        assert_eq!(weyl_lip_norm(&id, 0.5).unwrap(), 0.0);
        let u = weyl_monomial(w, &[(1, 0)]).unwrap();
        for lambda in [0.2, 0.5, 0.9] {
            assert!((weyl_lip_norm(&u, lambda).unwrap() - 4.0).abs() < 1e-12);
        }
        for n in 1..=3 {
            let w = win(2, 0, n);
            let mut e = vec![(0, 0); n as usize + 1];
            e[n as usize] = (1, 0);
            let u = weyl_monomial(w, &e).unwrap();
            let lambda: f64 = 0.5;
            let expected = 4.0 * lambda.powi(-(n as i32));
            assert!((weyl_lip_norm(&u, lambda).unwrap() - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn lip_norm_cap() {
        let caps = Caps {
            group_enum: 15,
            ..Caps::default()
        };
        let a = WeylElement::identity(win(2, 0, 1));
        assert!(matches!(
            weyl_lip_norm_with_caps(&a, 0.5, &caps),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn shift_and_product() {
        let w = win(2, 0, 0);
        let u = weyl_monomial(w, &[(1, 0)]).unwrap();
        let v = weyl_monomial(w, &[(0, 1)]).unwrap();
        let prod = u.mul(&v.shift(1)).unwrap();
        let expected = weyl_monomial(win(2, 0, 1), &[(1, 0), (0, 1)]).unwrap();
        assert_eq!(prod, expected);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = WeylElement::random(win(3, -1, 0), &mut rng);
        let text = serde_json::to_string(&a.to_json()).unwrap();
        let back = WeylElement::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!(back.matrix().max_abs_diff(a.matrix()) < 1e-12);
    }

    #[test]
    fn window_cap() {
        let caps = Caps {
            matrix_dim: 8,
            ..Caps::default()
        };
        assert!(WeylWindow::with_caps(2, 0, 2, &caps).is_ok());
        assert!(matches!(
            WeylWindow::with_caps(2, 0, 3, &caps),
            Err(Error::ResourceCap { .. })
        ));
    }
}
