//! Command-line front end: one subcommand per experiment.
//!
//! Every CSV starts with a `# config: {json}` line holding the full experiment
//! configuration and ends with a `# summary: {json}` line. `qmetric replay`
//! reruns a configuration taken from any emitted CSV or JSON file.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::approxdim::{self, Convention, NormTag, VectorFamily};
use crate::caps::Caps;
use crate::entropy;
use crate::error::{Error, Result};
use crate::fmt_float;
use crate::metricspace::{self, FiniteMetricSpace, Metric};
use crate::nctorus::{cesaro_abs_error, fejer_abs_moment, fejer_integral};

#[derive(Debug, Parser)]
#[command(name = "qmetric", version, about = "Dimension and product-entropy experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output file; CSV (or JSON with --format json). Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Add a timestamp comment to the output header.
    #[arg(long, global = true)]
    pub stamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(flatten)]
    Experiment(Experiment),
    /// Rerun the configuration recorded in an emitted CSV or JSON file.
    Replay {
        /// A file written by an earlier run.
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    /// Dimension brackets for the UHF algebra with weights lambda^|k|.
    WeylDim(WeylDimArgs),
    /// Dimension brackets for the rotation algebra on the p-torus.
    TorusDim(TorusDimArgs),
    /// Entropy bracket for the tensor shift on M_p.
    ShiftEntropy(ShiftEntropyArgs),
    /// Lattice growth, eigenvalue entropy and box bound of a toral automorphism.
    ToralEntropy(ToralEntropyArgs),
    /// Net statistics and box dimension of a point cloud.
    Kolmogorov(KolmogorovArgs),
    /// Fejer kernel moments and the Cesaro rate for |t|.
    CesaroRate(CesaroRateArgs),
    /// Cardinalities of K_m + T K_m + ... + T^{n-1} K_m.
    LatticeGrowth(LatticeGrowthArgs),
    /// Dimension brackets for a vector family read from JSON.
    DimBracket(DimBracketArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct WeylDimArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
    pub n: Vec<u64>,
    /// Certify orthonormality from GNS vectors up to this n.
    #[arg(long, default_value_t = 3)]
    pub certify: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Convention::Strict)]
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TorusDimArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 4, 8, 16, 32, 64])]
    pub n: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Convention::Strict)]
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ShiftEntropyArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Largest n; rows are written for 1..=n.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Compute D_tau from actual GNS vectors up to this n.
    #[arg(long, default_value_t = 4)]
    pub gns_max: usize,
    #[arg(long, value_enum, default_value_t = Convention::Strict)]
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ToralEntropyArgs {
    /// Row-major integer matrix, e.g. 2,1,1,1.
    #[arg(long = "T", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub t: Vec<i64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1i64, 2])]
    pub m: Vec<i64>,
    #[arg(long, default_value_t = 14)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub tail: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta_pad: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LatticeGrowthArgs {
    #[arg(long = "T", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub t: Vec<i64>,
    #[arg(long, default_value_t = 1)]
    pub m: i64,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Sum the terms literally instead of using the recursion.
    #[arg(long)]
    pub literal: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KolmogorovArgs {
    /// CSV point cloud (or distance matrix with --metric explicit-matrix).
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::Euclidean)]
    pub metric: Metric,
    /// Geometric grid `a:b:steps`.
    #[arg(long, default_value = "0.5:0.0625:4")]
    pub delta_grid: String,
    /// Also build the partition-of-unity unitaries at this delta.
    #[arg(long)]
    pub kolm_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CesaroRateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [16u64, 32, 64, 128, 256, 512, 1024, 2048, 4096])]
    pub n: Vec<u64>,
    /// Quadrature and sup-grid nodes; must exceed every n.
    #[arg(long, default_value_t = 8192)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DimBracketArgs {
    /// JSON list of vectors (numbers or [re, im] pairs).
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, default_value = "0.9:0.1:5")]
    pub delta_grid: String,
    #[arg(long, value_enum, default_value_t = Convention::Strict)]
    pub convention: Convention,
    #[arg(long, value_enum, default_value_t = NormTag::Gns)]
    pub norm_tag: NormTag,
}

/// Tabular result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
}

fn f(x: f64) -> String {
    fmt_float(x)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn square_side(t: &[i64]) -> Result<usize> {
    let p = (t.len() as f64).sqrt().round() as usize;
    if p * p != t.len() || p == 0 {
        return Err(Error::pre(format!("--T needs p*p entries, got {}", t.len())));
    }
    Ok(p)
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::pre(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::WeylDim(_) => "weyl-dim",
            Experiment::TorusDim(_) => "torus-dim",
            Experiment::ShiftEntropy(_) => "shift-entropy",
            Experiment::ToralEntropy(_) => "toral-entropy",
            Experiment::Kolmogorov(_) => "kolmogorov",
            Experiment::CesaroRate(_) => "cesaro-rate",
            Experiment::LatticeGrowth(_) => "lattice-growth",
            Experiment::DimBracket(_) => "dim-bracket",
        }
    }

    pub fn run(&self, caps: &Caps) -> Result<Report> {
        match self {
            Experiment::WeylDim(a) => weyl_dim(a, caps),
            Experiment::TorusDim(a) => torus_dim(a),
            Experiment::ShiftEntropy(a) => shift_entropy(a, caps),
            Experiment::ToralEntropy(a) => toral_entropy(a, caps),
            Experiment::Kolmogorov(a) => kolmogorov(a),
            Experiment::CesaroRate(a) => cesaro_rate(a),
            Experiment::LatticeGrowth(a) => lattice_growth(a, caps),
            Experiment::DimBracket(a) => dim_bracket(a),
        }
    }
}

fn dimension_rows(e: &entropy::DimensionExperiment) -> Vec<Vec<String>> {
    e.rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                f(r.delta_lower),
                r.dim_lower.to_string(),
                f(r.delta_upper),
                r.dim_upper.to_string(),
                opt(r.gram_defect.map(f)),
            ]
        })
        .collect()
}

const DIMENSION_COLUMNS: [&str; 6] = ["n", "delta_lower", "dim_lower", "delta_upper", "dim_upper", "gram_defect"];

fn weyl_dim(a: &WeylDimArgs, caps: &Caps) -> Result<Report> {
    check_open_unit("lambda", a.lambda)?;
    let e = entropy::uhf_dimension(a.p, a.lambda, &a.n, a.certify, a.convention, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut checks = Vec::new();
    for &n in &a.n {
        let n = n as i64;
        let mut windows = vec![(n, n + 1)];
        if (a.p as u128).pow(8) <= caps.group_enum as u128 {
            windows.push((n - 1, n + 2));
        }
        checks.extend(entropy::uhf_residual_checks(a.p, a.lambda, n, &windows, &mut rng, caps)?);
    }
    let holds = checks.iter().all(|c| c.holds());
    Ok(Report {
        columns: DIMENSION_COLUMNS.to_vec(),
        rows: dimension_rows(&e),
        summary: json!({
            "slope_lower": e.slope_lower,
            "slope_upper": e.slope_upper,
            "target": e.target,
            "brackets_target": e.brackets_target(1e-9),
            "residual_checks": checks,
            "residual_chain_holds": holds,
        }),
    })
}

fn torus_dim(a: &TorusDimArgs) -> Result<Report> {
    let e = entropy::torus_dimension(a.p, &a.n, a.convention)?;
    Ok(Report {
        columns: DIMENSION_COLUMNS.to_vec(),
        rows: dimension_rows(&e),
        summary: json!({
            "slope_lower": e.slope_lower,
            "slope_upper": e.slope_upper,
            "target": e.target,
        }),
    })
}

fn shift_entropy(a: &ShiftEntropyArgs, caps: &Caps) -> Result<Report> {
    check_open_unit("delta", a.delta)?;
    let target = 2.0 * (a.p as f64).ln();
    let mut rows = Vec::new();
    let mut all_contain = true;
    for n in 1..=a.n {
        let b = entropy::shift_entropy_bracket(a.p, n, a.delta, a.convention)?;
        let contains = b.lower <= target && target <= b.upper;
        all_contain &= contains;
        let gns = if n <= a.gns_max {
            Some(entropy::shift_product_dim(a.p, n, a.delta, a.convention, caps)?)
        } else {
            None
        };
        rows.push(vec![
            n.to_string(),
            b.dim.to_string(),
            f(b.lower),
            f(b.upper),
            contains.to_string(),
            opt(gns.as_ref().map(|g| g.lower)),
            opt(gns.as_ref().map(|g| g.upper)),
        ]);
    }
    Ok(Report {
        columns: vec!["n", "dim", "lower", "upper", "contains", "gns_lower", "gns_upper"],
        rows,
        summary: json!({ "target": target, "all_contain": all_contain }),
    })
}

fn series_rows(series: &entropy::GrowthSeries) -> Vec<(String, String, String)> {
    let diffs = series.finite_differences();
    series
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let d = if i == 0 { String::new() } else { f(diffs[i - 1]) };
            ((i + 1).to_string(), c.to_string(), d)
        })
        .collect()
}

fn toral_entropy(a: &ToralEntropyArgs, caps: &Caps) -> Result<Report> {
    let p = square_side(&a.t)?;
    let h = entropy::eigen_entropy(p, &a.t)?;
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for &m in &a.m {
        let series = entropy::lattice_orbit_card(p, &a.t, m, a.n, caps)?;
        for (i, (n, c, d)) in series_rows(&series).into_iter().enumerate() {
            let bound = entropy::box_bound(p, &a.t, m, i + 1, a.delta_pad)?;
            rows.push(vec![m.to_string(), n, c, d, f(bound.log_bound)]);
        }
        let est = entropy::entropy_slope(&series, a.tail)?;
        estimates.push(json!({ "m": m, "estimate": est }));
    }
    let eig: Vec<[f64; 2]> = entropy::eigenvalues(p, &a.t)?.iter().map(|z| [z.re, z.im]).collect();
    Ok(Report {
        columns: vec!["m", "n", "card", "log_diff", "log_bound"],
        rows,
        summary: json!({
            "eigen_entropy": h,
            "eigenvalues": eig,
            "estimates": estimates,
        }),
    })
}

fn lattice_growth(a: &LatticeGrowthArgs, caps: &Caps) -> Result<Report> {
    let p = square_side(&a.t)?;
    let series = if a.literal {
        entropy::lattice_orbit_card_literal(p, &a.t, a.m, a.n, caps)?
    } else {
        entropy::lattice_orbit_card(p, &a.t, a.m, a.n, caps)?
    };
    let rows = series_rows(&series).into_iter().map(|(n, c, d)| vec![n, c, d]).collect();
    let summary = if a.n >= 3 {
        json!({ "estimate": entropy::entropy_slope(&series, a.n.min(5))? })
    } else {
        json!({})
    };
    Ok(Report {
        columns: vec!["n", "card", "log_diff"],
        rows,
        summary,
    })
}

fn kolmogorov(a: &KolmogorovArgs) -> Result<Report> {
    let space = FiniteMetricSpace::from_csv_path(&a.points, a.metric)?;
    let deltas = metricspace::parse_delta_grid(&a.delta_grid)?;
    let dim = metricspace::box_dimension(&space, &deltas)?;
    let rows = dim
        .rows
        .iter()
        .map(|r| {
            vec![
                f(r.delta),
                r.sep.to_string(),
                r.spn.to_string(),
                r.cover.to_string(),
                opt(r.sep_exact),
                opt(r.spn_exact),
            ]
        })
        .collect();
    let kolm = match a.kolm_delta {
        Some(d) => {
            let b = metricspace::kolm_unitaries(&space, d)?;
            json!({
                "delta": d,
                "r": b.r(),
                "gram_defect": b.gram_defect(),
                "max_lip_g": b.lip_g.iter().copied().fold(0.0, f64::max),
                "max_lip_f": b.lip_f.iter().copied().fold(0.0, f64::max),
            })
        }
        None => Value::Null,
    };
    Ok(Report {
        columns: vec!["delta", "sep", "spn", "cover", "sep_exact", "spn_exact"],
        rows,
        summary: json!({
            "points": space.len(),
            "slope": dim.slope,
            "spn_slope": dim.spn_slope,
            "cover_slope": dim.cover_slope,
            "affine_slope": dim.affine_slope,
            "kolmogorov": kolm,
        }),
    })
}

fn cesaro_rate(a: &CesaroRateArgs) -> Result<Report> {
    if a.n.is_empty() || a.n.iter().any(|&n| n < 2) {
        return Err(Error::pre("cesaro-rate needs n values >= 2"));
    }
    let max_n = *a.n.iter().max().unwrap();
    if a.points as u64 <= max_n {
        return Err(Error::pre(format!("--points must exceed every n, got {} <= {max_n}", a.points)));
    }
    let mut rows = Vec::new();
    let (mut c_moment, mut c_error) = (0.0f64, 0.0f64);
    for &n in &a.n {
        let scale = n as f64 / (n as f64).ln();
        let integral = fejer_integral(n, a.points);
        let moment = fejer_abs_moment(n);
        let err = cesaro_abs_error(n, a.points);
        c_moment = c_moment.max(moment * scale);
        c_error = c_error.max(err * scale);
        rows.push(vec![
            n.to_string(),
            f(integral),
            f(moment),
            f(moment * scale),
            f(err),
            f(err * scale),
        ]);
    }
    Ok(Report {
        columns: vec!["n", "fejer_integral", "abs_moment", "moment_ratio", "sup_error", "error_ratio"],
        rows,
        summary: json!({ "moment_constant": c_moment, "error_constant": c_error }),
    })
}

fn dim_bracket(a: &DimBracketArgs) -> Result<Report> {
    let text = std::fs::read_to_string(&a.vectors)?;
    let fam = VectorFamily::from_json(&text)?;
    let deltas = metricspace::parse_delta_grid(&a.delta_grid)?;
    let brackets = deltas
        .iter()
        .map(|&d| approxdim::dim_bracket(&fam, d, a.convention, a.norm_tag))
        .collect::<Result<Vec<_>>>()?;
    let rows = brackets
        .iter()
        .map(|b| vec![f(b.delta), b.lower.to_string(), b.upper.to_string(), b.norm_tag.as_str().to_string()])
        .collect();
    let regression = approxdim::mdim_regression(&brackets).ok();
    Ok(Report {
        columns: vec!["delta", "lower", "upper", "norm_tag"],
        rows,
        summary: json!({
            "vectors": fam.len(),
            "dim": fam.dim(),
            "slope_lower": regression.map(|r| r.0),
            "slope_upper": regression.map(|r| r.1),
        }),
    })
}

/// CSV text: config line, optional stamp, header, rows, summary line.
pub fn render_csv(config: &Experiment, report: &Report, stamp: Option<&str>) -> Result<String> {
    let mut out = format!("# config: {}\n", serde_json::to_string(config)?);
    if let Some(s) = stamp {
        out.push_str(&format!("# stamp: {s}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&report.columns)?;
    for r in &report.rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Numerical(e.to_string()))?);
    out.push_str(&format!("# summary: {}\n", serde_json::to_string(&report.summary)?));
    Ok(out)
}

pub fn render_json(config: &Experiment, report: &Report, stamp: Option<&str>) -> Result<String> {
    let mut doc = json!({
        "config": config,
        "columns": report.columns,
        "rows": report.rows,
        "summary": report.summary,
    });
    if let Some(s) = stamp {
        doc["stamp"] = json!(s);
    }
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Lines of a CSV that are not `#` comments.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// The configuration recorded in an emitted CSV or JSON file.
pub fn read_config(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text)?;
        let cfg = doc
            .get("config")
            .ok_or_else(|| Error::pre(format!("{} has no config field", path.display())))?;
        return Ok(serde_json::from_value(cfg.clone())?);
    }
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .ok_or_else(|| Error::pre(format!("{} has no `# config:` line", path.display())))?;
    Ok(serde_json::from_str(line)?)
}

fn stamp_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix {secs}")
}

/// Run an experiment and write its output. With `--format csv` and `--out`,
/// a JSON document `{config, summary}` is also written next to the CSV.
pub fn execute(config: &Experiment, out: Option<&Path>, format: Format, stamp: bool, caps: &Caps) -> Result<Report> {
    let report = config.run(caps)?;
    let stamp = stamp.then(stamp_now);
    let text = match format {
        Format::Csv => render_csv(config, &report, stamp.as_deref())?,
        Format::Json => render_json(config, &report, stamp.as_deref())?,
    };
    match out {
        Some(path) => {
            std::fs::write(path, &text)?;
            if format == Format::Csv {
                let side = json!({ "config": config, "summary": report.summary });
                std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&side)? + "\n")?;
            }
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(report)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let caps = Caps::global();
    let result = match &cli.command {
        Command::Experiment(exp) => execute(exp, cli.out.as_deref(), cli.format, cli.stamp, &caps),
        Command::Replay { config } => {
            read_config(config).and_then(|exp| execute(&exp, cli.out.as_deref(), cli.format, cli.stamp, &caps))
        }
    };
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("qmetric: {e}");
            e.exit_code()
        }
    }
}
