//! Finite metric spaces, nets and box dimension.
//!
//! A set is `delta`-separated when distinct points are at distance `> delta`
//! and `delta`-spanning when every point is within `<= delta` of it. Covers use
//! closed `delta`-balls centred at points of the space.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Exhaustive search is used up to this many points.
pub const EXACT_LIMIT: usize = 20;

const TRIANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    ExplicitMatrix,
}

impl FiniteMetricSpace {
    /// Euclidean distances between rows of `points`.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::pre("empty point cloud"));
        }
        let d = points[0].len();
        if points.iter().any(|x| x.len() != d) {
            return Err(Error::pre("points of different dimension"));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::pre("non-finite coordinate"));
        }
        let n = points.len();
        let dist: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if dist[i * n + j] == 0.0 {
                    return Err(Error::pre(format!("points {i} and {j} coincide")));
                }
            }
        }
        Ok(FiniteMetricSpace { n, dist })
    }

    /// Row-major distance matrix, checked for symmetry, zero diagonal,
    /// positivity off the diagonal and the triangle inequality.
    pub fn from_matrix(n: usize, dist: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::pre("empty metric space"));
        }
        if dist.len() != n * n {
            return Err(Error::pre(format!("distance matrix has {} entries, expected {}", dist.len(), n * n)));
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::pre(format!("d({i}, {i}) is not zero")));
            }
            for j in i + 1..n {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if !a.is_finite() || a <= 0.0 {
                    return Err(Error::pre(format!("d({i}, {j}) = {a} is not positive")));
                }
                if a != b {
                    return Err(Error::pre(format!("distance matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let bad = (0..n).into_par_iter().find_any(|&i| {
            (0..n).any(|j| (0..n).any(|k| dist[i * n + k] > dist[i * n + j] + dist[j * n + k] + TRIANGLE_SLACK))
        });
        if let Some(i) = bad {
            return Err(Error::pre(format!("triangle inequality fails through point {i}")));
        }
        Ok(FiniteMetricSpace { n, dist })
    }

    /// One point per row; `#` lines and a non-numeric header row are skipped.
    pub fn points_from_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::pre(format!("row {}: {e}", i + 1))),
            }
        }
        Ok(rows)
    }

    pub fn from_csv<R: Read>(reader: R, metric: Metric) -> Result<Self> {
        let rows = Self::points_from_csv(reader)?;
        match metric {
            Metric::Euclidean => Self::from_points(&rows),
            Metric::ExplicitMatrix => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::pre("explicit distance matrix is not square"));
                }
                Self::from_matrix(n, rows.concat())
            }
        }
    }

    pub fn from_csv_path(path: &Path, metric: Metric) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, metric)
    }

    /// Regular grid `{0, 1/(side-1), ..., 1}^dim`.
    pub fn unit_grid(side: usize, dim: usize) -> Result<Self> {
        if side < 2 || dim == 0 {
            return Self::from_points(&[vec![0.0; dim.max(1)]]);
        }
        let total = side.pow(dim as u32);
        let points: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; dim];
                for c in x.iter_mut().rev() {
                    *c = (idx % side) as f64 / (side - 1) as f64;
                    idx /= side;
                }
                x
            })
            .collect();
        Self::from_points(&points)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Farthest-point traversal from point 0, lowest index on ties, stopping
    /// once every point is within `delta`. The result is a maximal
    /// `delta`-separated set, hence also `delta`-spanning.
    pub fn greedy_separated(&self, delta: f64) -> Vec<usize> {
        let n = self.n;
        let mut chosen = vec![0usize];
        let mut near: Vec<f64> = (0..n).map(|j| self.d(0, j)).collect();
        loop {
            let (best, far) = near
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            if far <= delta {
                return chosen;
            }
            chosen.push(best);
            for (j, v) in near.iter_mut().enumerate() {
                *v = v.min(self.d(best, j));
            }
        }
    }

    // closed delta-neighbourhoods as bitsets
    fn neighbourhoods(&self, delta: f64) -> Vec<Vec<u64>> {
        let words = self.n.div_ceil(64);
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut b = vec![0u64; words];
                for j in 0..self.n {
                    if self.d(i, j) <= delta {
                        b[j / 64] |= 1 << (j % 64);
                    }
                }
                b
            })
            .collect()
    }

    /// Lazy greedy set cover by closed balls.
    pub fn greedy_cover(&self, delta: f64) -> Vec<usize> {
        let nb = self.neighbourhoods(delta);
        let words = nb.first().map_or(0, Vec::len);
        let mut uncovered = vec![u64::MAX; words];
        if self.n % 64 != 0 {
            uncovered[words - 1] = (1u64 << (self.n % 64)) - 1;
        }
        let gain = |b: &Vec<u64>, u: &Vec<u64>| b.iter().zip(u).map(|(x, y)| (x & y).count_ones()).sum::<u32>();
        let mut heap: BinaryHeap<(u32, Reverse<usize>)> =
            (0..self.n).map(|i| (gain(&nb[i], &uncovered), Reverse(i))).collect();
        let mut left = self.n as u32;
        let mut chosen = Vec::new();
        while left > 0 {
            let (g, Reverse(i)) = heap.pop().expect("cover heap ran dry");
            let fresh = gain(&nb[i], &uncovered);
            if fresh == g {
                chosen.push(i);
                for (u, b) in uncovered.iter_mut().zip(&nb[i]) {
                    *u &= !b;
                }
                left -= fresh;
            } else {
                heap.push((fresh, Reverse(i)));
            }
        }
        chosen
    }

    /// Largest `delta`-separated set by branch and bound; `n <= 20`.
    pub fn exact_separated(&self, delta: f64) -> Option<usize> {
        if self.n > EXACT_LIMIT {
            return None;
        }
        let conflict: Vec<u32> = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| j != i && self.d(i, j) <= delta)
                    .fold(0u32, |m, j| m | 1 << j)
            })
            .collect();
        fn best(cand: u32, size: usize, conflict: &[u32], record: &mut usize) {
            if cand == 0 {
                *record = (*record).max(size);
                return;
            }
            if size + cand.count_ones() as usize <= *record {
                return;
            }
            let v = cand.trailing_zeros() as usize;
            best(cand & !(1 << v) & !conflict[v], size + 1, conflict, record);
            best(cand & !(1 << v), size, conflict, record);
        }
        let mut record = 0;
        let all = if self.n == 32 { u32::MAX } else { (1u32 << self.n) - 1 };
        best(all, 0, &conflict, &mut record);
        Some(record)
    }

    /// Smallest `delta`-spanning set by enumeration in order of size; `n <= 20`.
    pub fn exact_spanning(&self, delta: f64) -> Option<usize> {
        if self.n > EXACT_LIMIT {
            return None;
        }
        let n = self.n;
        let full = (1u32 << n) - 1;
        let ball: Vec<u32> = (0..n)
            .map(|i| (0..n).filter(|&j| self.d(i, j) <= delta).fold(0u32, |m, j| m | 1 << j))
            .collect();
        for k in 1..=n {
            // Gosper's hack over k-subsets
            let mut s: u32 = (1u32 << k) - 1;
            while s <= full {
                let mut cover = 0u32;
                let mut bits = s;
                while bits != 0 {
                    let v = bits.trailing_zeros() as usize;
                    cover |= ball[v];
                    bits &= bits - 1;
                }
                if cover == full {
                    return Some(k);
                }
                let c = s & s.wrapping_neg();
                let r = s + c;
                if r == 0 || r > full {
                    break;
                }
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        Some(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetStatistics {
    pub delta: f64,
    /// Greedy maximal separated set; exact when `sep_exact` is set.
    pub sep: usize,
    /// Greedy spanning set, an upper bound.
    pub spn: usize,
    /// Greedy cover by closed balls, an upper bound.
    pub cover: usize,
    pub sep_exact: Option<usize>,
    pub spn_exact: Option<usize>,
}

pub fn net_statistics(space: &FiniteMetricSpace, delta: f64) -> Result<NetStatistics> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::pre(format!("delta must be positive, got {delta}")));
    }
    let greedy = space.greedy_separated(delta);
    let sep_exact = space.exact_separated(delta);
    let spn_exact = space.exact_spanning(delta);
    Ok(NetStatistics {
        delta,
        sep: sep_exact.unwrap_or(greedy.len()).max(greedy.len()),
        spn: greedy.len(),
        cover: space.greedy_cover(delta).len(),
        sep_exact,
        spn_exact,
    })
}

/// Geometric grid from `a` to `b` with `steps` points, both ends included.
pub fn geometric_grid(a: f64, b: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::pre(format!("grid ends must be positive, got {a} and {b}")));
    }
    match steps {
        0 => Err(Error::pre("grid needs at least one step")),
        1 => Ok(vec![a]),
        _ => {
            let r = (b / a).ln() / (steps - 1) as f64;
            Ok((0..steps).map(|i| a * (r * i as f64).exp()).collect())
        }
    }
}

/// Parse `"a:b:steps"`.
pub fn parse_delta_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::pre(format!("delta grid must look like a:b:steps, got {spec:?}")));
    }
    let bad = |what: &str| Error::pre(format!("bad {what} in delta grid {spec:?}"));
    let a: f64 = parts[0].trim().parse().map_err(|_| bad("start"))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad("end"))?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad("step count"))?;
    geometric_grid(a, b, steps)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::pre("slope needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::pre("slope undefined for a constant abscissa"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Least-squares slope of the line through the origin, `sum xy / sum x^2`.
pub fn ls_slope_origin(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::pre("slope needs paired points"));
    }
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    if sxx == 0.0 {
        return Err(Error::pre("slope undefined at log 1/delta = 0"));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// Fits of `log count` against `log 1/delta`. The headline numbers are fits
/// through the origin, matching the ratio `log sep / log 1/delta` whose limsup
/// defines the dimension; `affine_slope` is the ordinary fit of `sep` with an
/// intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub slope: f64,
    pub spn_slope: f64,
    pub cover_slope: f64,
    pub affine_slope: f64,
    pub rows: Vec<NetStatistics>,
}

pub fn box_dimension(space: &FiniteMetricSpace, deltas: &[f64]) -> Result<BoxDimension> {
    if deltas.len() < 3 {
        return Err(Error::pre(format!("box dimension needs at least 3 grid points, got {}", deltas.len())));
    }
    if deltas.iter().any(|&d| d >= 1.0) {
        return Err(Error::pre("box dimension needs every delta below 1"));
    }
    let rows: Vec<NetStatistics> = deltas
        .par_iter()
        .map(|&d| net_statistics(space, d))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let logs = |f: &dyn Fn(&NetStatistics) -> usize| -> Vec<f64> { rows.iter().map(|r| (f(r) as f64).ln()).collect() };
    let sep = logs(&|r| r.sep);
    Ok(BoxDimension {
        slope: ls_slope_origin(&x, &sep)?,
        spn_slope: ls_slope_origin(&x, &logs(&|r| r.spn))?,
        cover_slope: ls_slope_origin(&x, &logs(&|r| r.cover))?,
        affine_slope: ls_slope(&x, &sep)?,
        rows,
    })
}

/// `sup |f(x) - f(y)| / d(x, y)` over distinct pairs.
pub fn lipschitz_seminorm(f: &[C64], space: &FiniteMetricSpace) -> Result<f64> {
    if f.len() != space.n {
        return Err(Error::pre(format!("{} values for {} points", f.len(), space.n)));
    }
    Ok((0..space.n)
        .into_par_iter()
        .map(|i| {
            (i + 1..space.n)
                .map(|j| (f[i] - f[j]).norm() / space.d(i, j))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

pub fn lipschitz_seminorm_real(f: &[f64], space: &FiniteMetricSpace) -> Result<f64> {
    let c: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
    lipschitz_seminorm(&c, space)
}

/// Partition-of-unity unitaries on a maximal separated set.
#[derive(Debug, Clone)]
pub struct KolmBundle {
    pub delta: f64,
    /// Indices of the separated set, in construction order.
    pub e: Vec<usize>,
    /// `f_j(x) = max(0, 1 - d(x, x_j) / delta)` over all points.
    pub f: Vec<Vec<f64>>,
    /// `g_k = max_j frac(j k / r) f_j`.
    pub g: Vec<Vec<f64>>,
    /// `u_k = exp(2 pi i g_k)`.
    pub u: Vec<Vec<C64>>,
    /// Gram matrix of `u_k` restricted to `E` under the uniform measure.
    pub gram: CMatrix,
    pub lip_f: Vec<f64>,
    pub lip_g: Vec<f64>,
    /// `2 pi e^{2 pi}`, the factor relating `L(u_k)` to `L(g_k)`.
    pub exp_constant: f64,
}

impl KolmBundle {
    pub fn r(&self) -> usize {
        self.e.len()
    }

    /// `max |gram - I|`.
    pub fn gram_defect(&self) -> f64 {
        self.gram.max_abs_diff(&CMatrix::identity(self.r()))
    }

    /// The vectors `pi_mu(u_k) xi_mu`, one per `k`.
    pub fn gns_vectors(&self) -> Vec<Vec<C64>> {
        let scale = 1.0 / (self.r() as f64).sqrt();
        self.u
            .iter()
            .map(|uk| self.e.iter().map(|&x| uk[x] * scale).collect())
            .collect()
    }
}

pub fn kolm_unitaries(space: &FiniteMetricSpace, delta: f64) -> Result<KolmBundle> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::pre(format!("delta must be positive, got {delta}")));
    }
    let e = space.greedy_separated(delta);
    let r = e.len();
    let n = space.n;
    let f: Vec<Vec<f64>> = e
        .iter()
        .map(|&xj| (0..n).map(|x| (1.0 - space.d(x, xj) / delta).max(0.0)).collect())
        .collect();
    let g: Vec<Vec<f64>> = (1..=r)
        .map(|k| {
            (0..n)
                .map(|x| {
                    (1..=r)
                        .map(|j| ((j * k) % r) as f64 / r as f64 * f[j - 1][x])
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let u: Vec<Vec<C64>> = g
        .iter()
        .map(|gk| gk.iter().map(|&v| C64::from_polar(1.0, 2.0 * PI * v)).collect())
        .collect();
    let mut bundle = KolmBundle {
        delta,
        e,
        f,
        g,
        u,
        gram: CMatrix::zeros(r, r),
        lip_f: Vec::new(),
        lip_g: Vec::new(),
        exp_constant: 2.0 * PI * (2.0 * PI).exp(),
    };
    let vecs = bundle.gns_vectors();
    bundle.gram = CMatrix::from_fn(r, r, |a, b| crate::linalg::inner(&vecs[a], &vecs[b]));
    bundle.lip_f = bundle
        .f
        .iter()
        .map(|fj| lipschitz_seminorm_real(fj, space))
        .collect::<Result<_>>()?;
    bundle.lip_g = bundle
        .g
        .iter()
        .map(|gk| lipschitz_seminorm_real(gk, space))
        .collect::<Result<_>>()?;
    Ok(bundle)
}
