//! Acceptance checks. Runs without the libtest harness so that every criterion
//! prints one PASS/FAIL line; the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qmetric::approxdim::{self, Convention, VectorFamily};
use qmetric::caps::Caps;
use qmetric::cli;
use qmetric::entropy::{self, GrowthSeries};
use qmetric::linalg::{CMatrix, C64};
use qmetric::metricspace::{self, FiniteMetricSpace};
use qmetric::nctorus::{self, PhaseMatrix, RationalRepresentation, TwistedPolynomial};
use qmetric::weyl::{self, WeylWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const STRICT: Convention = Convention::Strict;

/// Outcome of one criterion: failed checks are collected, not thrown, so the
/// summary line can list all of them.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn that(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn within(&mut self, started: Instant, budget: Duration) {
        let took = started.elapsed();
        self.note(format!("{:.1}s", took.as_secs_f64()));
        self.that(took <= budget, format!("runtime {took:?} exceeds {budget:?}"));
    }
}

fn c1_weyl_relations(c: &mut Check) {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for p in [2usize, 3] {
        let (u, v) = weyl::clock_shift(p).unwrap();
        let rho = C64::from_polar(1.0, 2.0 * PI / p as f64);
        worst = worst.max((&v * &u).max_abs_diff(&(&u * &v).scale(rho)));
        for sites in 1..=3i64 {
            let w = WeylWindow::new(p, 0, sites - 1).unwrap();
            // site-wise relations inside the window
            for k in 0..sites as usize {
                for l in 0..sites as usize {
                    let mut eu = vec![(0, 0); sites as usize];
                    let mut ev = vec![(0, 0); sites as usize];
                    eu[k] = (1, 0);
                    ev[l] = (0, 1);
                    let uk = weyl::weyl_monomial(w, &eu).unwrap();
                    let vl = weyl::weyl_monomial(w, &ev).unwrap();
                    let lhs = vl.mul(&uk).unwrap();
                    let rhs = uk.mul(&vl).unwrap();
                    let factor = if k == l { rho } else { C64::new(1.0, 0.0) };
                    worst = worst.max(lhs.matrix().max_abs_diff(&rhs.matrix().scale(factor)));
                }
            }
            let mats: Vec<Vec<C64>> = weyl::all_exponents(w)
                .map(|e| weyl::weyl_monomial(w, &e).unwrap().matrix().as_slice().to_vec())
                .collect();
            let d = w.dim() as f64;
            let gram_worst = (0..mats.len())
                .into_par_iter()
                .map(|a| {
                    (0..mats.len())
                        .map(|b| {
                            let tau: C64 = mats[a].iter().zip(&mats[b]).map(|(x, y)| y.conj() * x).sum::<C64>() / d;
                            let want = if a == b { 1.0 } else { 0.0 };
                            (tau - want).norm()
                        })
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            worst = worst.max(gram_worst);
        }
    }
    c.note(format!("max error {worst:.2e}"));
    c.that(worst < 1e-12, format!("relation/orthonormality error {worst:e}"));
    c.within(t0, Duration::from_secs(5));
}

fn c2_twisted_oracle(c: &mut Check) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for den in [2i64, 3, 4, 5] {
        for q in 1..den {
            if gcd(q, den) != 1 {
                continue;
            }
            let phase = PhaseMatrix::two(q as f64 / den as f64).unwrap();
            let rep = RationalRepresentation::new(&phase).unwrap();
            for _ in 0..200 {
                let k: Vec<i64> = (0..2).map(|_| rng.gen_range(-6..=6)).collect();
                let l: Vec<i64> = (0..2).map(|_| rng.gen_range(-6..=6)).collect();
                let ck = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let cl = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let a = TwistedPolynomial::monomial(&phase, &k, ck).unwrap();
                let b = TwistedPolynomial::monomial(&phase, &l, cl).unwrap();
                let symbolic = rep.image(&a.mul(&b).unwrap()).unwrap();
                let matrices = &rep.image(&a).unwrap() * &rep.image(&b).unwrap();
                worst = worst.max(symbolic.max_abs_diff(&matrices));
            }
        }
    }
    c.note(format!("max error {worst:.2e}"));
    c.that(worst < 1e-12, format!("symbolic vs matrix product differ by {worst:e}"));
    c.within(t0, Duration::from_secs(10));
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn c3_orthonormal_family(c: &mut Check) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in [4usize, 16, 64] {
        let u = CMatrix::random_unitary(m + 3, &mut rng);
        let fam = VectorFamily::new((0..m).map(|j| u.column(j)).collect()).unwrap();
        for delta in [0.3, 0.5, 0.9] {
            let oracle = (0..=m).find(|&r| ((m - r) as f64 / m as f64) < delta * delta).unwrap();
            let exact = approxdim::dim_exact_orthonormal(m, delta, STRICT).unwrap();
            let lower = approxdim::dim_lower_spectral(&fam, delta, STRICT).unwrap();
            let upper = approxdim::dim_upper_svd(&fam, delta, STRICT).unwrap().r;
            c.that(exact == oracle, format!("m={m} delta={delta}: exact {exact} != {oracle}"));
            c.that(
                lower as f64 >= (1.0 - delta * delta) * m as f64,
                format!("m={m} delta={delta}: lower {lower} < (1-delta^2) m"),
            );
            c.that(
                lower <= exact && exact <= upper,
                format!("m={m} delta={delta}: [{lower}, {upper}] misses {exact}"),
            );
        }
    }
    c.within(t0, Duration::from_secs(5));
}

fn c4_shift_entropy(c: &mut Check) {
    let t0 = Instant::now();
    let target = 2.0 * 2f64.ln();
    for n in 1..=5 {
        let b = entropy::shift_entropy_bracket(2, n, 0.5, STRICT).unwrap();
        c.that(
            b.lower <= target && target <= b.upper,
            format!("n={n}: [{}, {}] misses 2 log 2", b.lower, b.upper),
        );
        if n == 5 {
            c.note(format!("lower(5) = {:.4}", b.lower));
            c.that((target - b.lower).abs() < 0.10, format!("lower(5) = {} not within 0.10", b.lower));
        }
    }
    let caps = Caps::default();
    for n in 1..=4 {
        let g = entropy::shift_product_dim(2, n, 0.5, STRICT, &caps).unwrap();
        let want = approxdim::dim_exact_orthonormal(1 << (2 * n), 0.5, STRICT).unwrap();
        c.that(
            g.lower == want && g.upper == want,
            format!("n={n}: GNS bracket [{}, {}] vs closed form {want}", g.lower, g.upper),
        );
    }
    c.within(t0, Duration::from_secs(60));
}

fn tail_slope(series: &GrowthSeries) -> f64 {
    entropy::entropy_slope(series, 5).unwrap().slope
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn c5_toral_entropy(c: &mut Check) {
    let t0 = Instant::now();
    let caps = Caps::default();
    let cat = [2, 1, 1, 1];
    let h = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let series = entropy::lattice_orbit_card(2, &cat, 1, 14, &caps).unwrap();
    let slope = tail_slope(&series);
    c.note(format!("cat slope {slope:.4} vs {h:.4}"));
    c.that((slope - h).abs() <= 0.10 * h, format!("cat-map slope {slope} not within 10% of {h}"));
    for (i, &card) in series.counts.iter().enumerate() {
        let bound = entropy::box_bound_card(2, &cat, 1, i + 1, 0.05).unwrap();
        c.that(bound >= card as f64, format!("n={}: bound {bound} < c_n {card}", i + 1));
    }
    for (name, t) in [("parabolic", [1, 1, 0, 1]), ("rotation", [0, -1, 1, 0])] {
        let e = entropy::eigen_entropy(2, &t).unwrap();
        c.that(e == 0.0, format!("{name}: eigen_entropy {e}"));
        let s = tail_slope(&entropy::lattice_orbit_card(2, &t, 1, 14, &caps).unwrap());
        c.note(format!("{name} slope {s:.4}"));
        c.that(s < 0.05, format!("{name}: lattice slope {s:.4} at n = 14 is not below 0.05"));
    }
    if let Some(rss) = peak_rss_bytes() {
        c.note(format!("peak rss {} MiB", rss >> 20));
        c.that(rss < 2 << 30, format!("peak memory {rss} bytes"));
    }
    c.within(t0, Duration::from_secs(120));
}

fn c6_power_law(c: &mut Check) {
    let cases: [(usize, &[i64]); 3] = [
        (2, &[2, 1, 1, 1]),
        (3, &[0, 0, 1, 1, 0, 1, 0, 1, 0]),
        (4, &[1, 1, 0, 0, 1, 2, 1, 0, 0, 1, 1, 1, 1, 0, 0, 1]),
    ];
    for (p, t) in cases {
        let h = entropy::eigen_entropy(p, t).unwrap();
        c.that(h > 0.0, format!("{t:?}: expected positive entropy"));
        for k in 1..=4 {
            let tk = entropy::int_mat_pow(p, t, k).unwrap();
            let hk = entropy::eigen_entropy(p, &tk).unwrap();
            let rel = (hk - k as f64 * h).abs() / (k as f64 * h);
            c.that(rel < 1e-9, format!("{t:?} k={k}: relative error {rel:e}"));
        }
    }
}

fn c7_kolmogorov(c: &mut Check) {
    let t0 = Instant::now();
    let deltas = metricspace::geometric_grid(0.5, 0.0625, 4).unwrap();
    let square = metricspace::box_dimension(&FiniteMetricSpace::unit_grid(32, 2).unwrap(), &deltas).unwrap();
    let segment = metricspace::box_dimension(&FiniteMetricSpace::unit_grid(1024, 1).unwrap(), &deltas).unwrap();
    c.note(format!("square {:.3}, segment {:.3}", square.slope, segment.slope));
    c.that((1.8..=2.0).contains(&square.slope), format!("square slope {}", square.slope));
    c.that((0.9..=1.05).contains(&segment.slope), format!("segment slope {}", segment.slope));
    c.within(t0, Duration::from_secs(30));
}

fn c8_kolm_construction(c: &mut Check) {
    let space = FiniteMetricSpace::unit_grid(8, 2).unwrap();
    let delta = 0.1;
    let b = metricspace::kolm_unitaries(&space, delta).unwrap();
    c.that(b.r() == 64, format!("separated set has {} points", b.r()));
    let defect = b.gram_defect();
    let fam_defect = VectorFamily::new(b.gns_vectors()).unwrap().orthonormality_defect();
    c.note(format!("gram defect {defect:.1e}"));
    c.that(defect < 1e-10 && fam_defect < 1e-10, format!("Gram defect {defect:e} / {fam_defect:e}"));
    for (k, &l) in b.lip_g.iter().enumerate() {
        c.that(l <= (1.0 + 1e-9) / delta, format!("L(g_{k}) = {l}"));
    }
}

fn c9_fejer_cesaro(c: &mut Check) {
    let t0 = Instant::now();
    for n in [16u64, 256, 4096] {
        let i = nctorus::fejer_integral(n, 2 * n as usize + 2);
        c.that((i - 1.0).abs() < 1e-8, format!("n={n}: integral {i}"));
    }
    let ns: Vec<u64> = (4..=12).map(|e| 1u64 << e).collect();
    let rate = |n: u64| (n as f64).ln() / n as f64;
    let moments: Vec<f64> = ns.iter().map(|&n| nctorus::fejer_abs_moment(n) / rate(n)).collect();
    let c_moment = moments.iter().copied().fold(0.0, f64::max);
    c.that(c_moment.is_finite() && c_moment < 1.0, format!("moment constant {c_moment}"));
    // fit C on the first half of the range, then check it on the whole range
    let errors: Vec<f64> = ns.iter().map(|&n| nctorus::cesaro_abs_error(n, 8192)).collect();
    let fit = ns.len() / 2;
    let c_fit = (0..fit).map(|i| errors[i] / rate(ns[i])).fold(0.0, f64::max);
    for (i, &n) in ns.iter().enumerate() {
        c.that(errors[i] <= c_fit * rate(n), format!("n={n}: error {} > C log n / n", errors[i]));
    }
    c.note(format!("C_moment {c_moment:.4}, C_rate {c_fit:.4}"));
    c.within(t0, Duration::from_secs(30));
}

fn c10_torus_lip(c: &mut Check) {
    let phase = PhaseMatrix::two((5f64.sqrt() - 1.0) / 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let k: Vec<i64> = (0..2).map(|_| rng.gen_range(-10..=10)).collect();
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        done += 1;
        let exact = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        let a = TwistedPolynomial::monomial(&phase, &k, C64::new(1.0, 0.0)).unwrap();
        let lower = nctorus::lip_lower_sampled(&a);
        let upper = nctorus::lip_bounds(&a).upper;
        worst = worst.max((lower - exact).abs() / exact);
        c.that((lower - exact).abs() <= 0.01 * exact, format!("k={k:?}: sampled {lower} vs {exact}"));
        c.that(upper >= exact * (1.0 - 1e-12), format!("k={k:?}: upper {upper} < {exact}"));
    }
    c.note(format!("max relative gap {worst:.1e}"));
}

fn c11_uhf(c: &mut Check) {
    let caps = Caps::default();
    let (p, lambda) = (2usize, 0.5);
    let e = entropy::uhf_dimension(p, lambda, &[1, 2, 3], 3, STRICT, &caps).unwrap();
    for r in &e.rows {
        let m = (p as u64).pow(2 * (2 * r.n as u32 + 1));
        c.that(
            r.dim_lower as f64 >= 0.75 * m as f64,
            format!("n={}: D {} < 3/4 * {m}", r.n, r.dim_lower),
        );
        c.that(r.gram_defect.is_some_and(|g| g < 1e-10), format!("n={}: uncertified family", r.n));
    }
    c.note(format!(
        "slopes [{:.6}, {:.6}] target {}",
        e.slope_lower.min(e.slope_upper),
        e.slope_lower.max(e.slope_upper),
        e.target
    ));
    c.that(e.brackets_target(1e-9), "regression bracket misses 4");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3i64 {
        let mut windows = vec![(n, n + 1), (n - 1, n + 2)];
        if n == 1 {
            windows.push((-2, 2));
        }
        for chk in entropy::uhf_residual_checks(p, lambda, n, &windows, &mut rng, &caps).unwrap() {
            c.that(chk.holds(), format!("{chk:?}"));
        }
    }
}

fn qmetric(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qmetric"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn c12_reproducibility(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid: String = (0..36).map(|i| format!("{},{}\n", (i % 6) as f64 / 5.0, (i / 6) as f64 / 5.0)).collect();
    std::fs::write(d.join("grid.csv"), format!("x,y\n{grid}")).unwrap();
    std::fs::write(d.join("v.json"), "[[1,0,0],[0,[0,1],0],[0.6,0.8,0],[0,0,1]]").unwrap();
    let runs: [&[&str]; 8] = [
        &["weyl-dim", "--n", "1,2", "--certify", "2"],
        &["torus-dim", "--n", "2,4,8"],
        &["shift-entropy", "--n", "3", "--gns-max", "2"],
        &["toral-entropy", "--T", "2,1,1,1", "--m", "1,2", "--n", "8"],
        &["kolmogorov", "--points", "grid.csv", "--delta-grid", "0.5:0.125:3", "--kolm-delta", "0.3"],
        &["cesaro-rate", "--n", "16,32,64", "--points", "256"],
        &["lattice-growth", "--T", "1,1,0,1", "--n", "6"],
        &["dim-bracket", "--vectors", "v.json", "--delta-grid", "0.9:0.3:3"],
    ];
    for args in runs {
        let name = args[0];
        let first = format!("{name}.csv");
        let out = qmetric(&[args, &["--out", &first]].concat(), d);
        c.that(out.status.success(), format!("{name}: {}", String::from_utf8_lossy(&out.stderr)));
        let reference = std::fs::read_to_string(d.join(&first)).unwrap_or_default();
        let sources = [first.clone(), format!("{name}.json")];
        for (i, src) in sources.iter().enumerate() {
            let again = format!("{name}-replay{i}.csv");
            let out = qmetric(&["replay", src, "--out", &again, "--stamp"], d);
            c.that(out.status.success(), format!("{name} replay: {}", String::from_utf8_lossy(&out.stderr)));
            let text = std::fs::read_to_string(d.join(&again)).unwrap_or_default();
            c.that(
                !reference.is_empty() && cli::csv_body(&text) == cli::csv_body(&reference),
                format!("{name}: replay from {src} changed the CSV body"),
            );
        }
    }
    let bad = qmetric(&["shift-entropy", "--delta", "2"], d);
    c.that(bad.status.code() == Some(2), format!("precondition exit {:?}", bad.status.code()));
    let capped = Command::new(env!("CARGO_BIN_EXE_qmetric"))
        .args(["lattice-growth", "--T", "2,1,1,1", "--n", "6"])
        .env(qmetric::caps::ENV_VAR, "lattice_card=50")
        .output()
        .unwrap();
    c.that(capped.status.code() == Some(3), format!("cap exit {:?}", capped.status.code()));
    c.note("8 experiments replayed from CSV and JSON");
}

fn main() {
    let criteria: [(&str, fn(&mut Check)); 12] = [
        ("weyl relations and monomial orthonormality", c1_weyl_relations),
        ("twisted product vs clock/shift matrices", c2_twisted_oracle),
        ("orthonormal family dimensions", c3_orthonormal_family),
        ("shift entropy bracket", c4_shift_entropy),
        ("toral entropy", c5_toral_entropy),
        ("eigen entropy power law", c6_power_law),
        ("box dimension of grids", c7_kolmogorov),
        ("partition-of-unity unitaries", c8_kolm_construction),
        ("fejer kernel and cesaro rate", c9_fejer_cesaro),
        ("torus monomial lip norms", c10_torus_lip),
        ("uhf dimension experiment", c11_uhf),
        ("cli reproducibility", c12_reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("{:02}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let mut check = Check::default();
        if let Err(e) = catch_unwind(AssertUnwindSafe(|| run(&mut check))) {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            check.failures.push(format!("panicked: {msg}"));
        }
        let status = if check.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {id} {status}: {name} ({})", check.notes.join("; "));
        for f in &check.failures {
            println!("    {f}");
        }
        failed += !check.failures.is_empty() as usize;
    }
    println!("{} criteria checked, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
