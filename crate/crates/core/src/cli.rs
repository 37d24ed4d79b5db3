//! Command-line front end.
//!
//! Each subcommand resolves its settings from defaults, then the matching
//! table of the `--config` TOML file, then flags, and writes a
//! `<command>_report.json` envelope holding the resolved settings, the seed
//! and the result into the output directory.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure (including a violated inequality).

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::equilibrium::{euler_lagrange_residual, solve_detailed, SolverConfig};
use crate::error::{Error, Result};
use crate::free_moments::{
    asymptotic_freeness_report, free_product_moment, limit_marginal, Alphabet, MomentTable, DEFAULT_DEGREE_CAP,
};
use crate::measures::{
    arcsine, interval_grid, semicircle_cdf, semicircle_density, semicircle_on, trigonometric_circle, uniform_circle,
    uniform_interval, Carrier, GridMeasure, FREE_ENTROPY_OFFSET,
};
use crate::potentials::Potential;
use crate::pressure::{gibbs_variational_check, pressure_estimate, PressureSettings};
use crate::random_matrices::{
    sample_gibbs_angles, sample_gibbs_eigenvalues_with, EnsembleSpec, MatrixKind, SamplerSettings,
};
use crate::tci::{
    free_tci_suite, verify_free_product_upper_bound, verify_matrix_tci, Family, MatrixGaussian, TCIReport, Verdict,
    CIRCLE_GRID,
};
use crate::transport::{circle_rotation_scan, wasserstein_1d, wasserstein_circle_chordal};

/// JSON schema every `*_report.json` file satisfies.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "freetci",
    version,
    about = "Free transportation-cost inequality experiments",
    arg_required_else_help = true
)]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (must exist).
    #[arg(long, global = true, env = "FREETCI_OUT")]
    out: Option<PathBuf>,
    /// TOML file with top-level `seed`/`out`/`workers` and one table per
    /// subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium measure of a potential with its optimality certificate.
    Equilibrium(EquilibriumArgs),
    /// Eigenvalues (or eigenangles) of a Gibbs ensemble.
    Sample(SampleArgs),
    /// Mixed moments of the free product of limiting marginals.
    Moments(MomentsArgs),
    /// Sampled mixed moments against free-product values.
    Freeness(FreenessArgs),
    /// Wasserstein distance between two measures.
    Transport(TransportArgs),
    /// Truncated pressure and its large-N extrapolation.
    Pressure(PressureArgs),
    /// Transportation-cost inequality checks.
    Tci(TciArgs),
    /// Gnuplot-ready data files.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Equilibrium(_) => "equilibrium",
            Command::Sample(_) => "sample",
            Command::Moments(_) => "moments",
            Command::Freeness(_) => "freeness",
            Command::Transport(_) => "transport",
            Command::Pressure(_) => "pressure",
            Command::Tci(_) => "tci",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    equilibrium: Option<toml::Table>,
    sample: Option<toml::Table>,
    moments: Option<toml::Table>,
    freeness: Option<toml::Table>,
    transport: Option<toml::Table>,
    pressure: Option<toml::Table>,
    tci: Option<toml::Table>,
    report: Option<toml::Table>,
}

impl FileConfig {
    fn section(&self, name: &str) -> Option<&toml::Table> {
        match name {
            "equilibrium" => self.equilibrium.as_ref(),
            "sample" => self.sample.as_ref(),
            "moments" => self.moments.as_ref(),
            "freeness" => self.freeness.as_ref(),
            "transport" => self.transport.as_ref(),
            "pressure" => self.pressure.as_ref(),
            "tci" => self.tci.as_ref(),
            "report" => self.report.as_ref(),
            _ => None,
        }
    }
}

/// Config table overlaid with the flags that were given.
fn resolve<A: Serialize, C: DeserializeOwned>(args: &A, section: Option<&toml::Table>) -> Result<C> {
    let mut merged = match section {
        Some(t) => serde_json::to_value(t)?,
        None => json!({}),
    };
    if let (Value::Object(base), Value::Object(flags)) = (&mut merged, serde_json::to_value(args)?) {
        for (k, v) in flags {
            let empty_list = matches!(&v, Value::Array(a) if a.is_empty());
            if !v.is_null() && !empty_list {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Parse(format!("configuration: {e}")))
}

fn parse_potential(s: &str) -> Result<Potential> {
    if s.ends_with(".toml") {
        return Potential::from_toml(&std::fs::read_to_string(s)?);
    }
    s.parse()
}

// ---- equilibrium ---------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct EquilibriumArgs {
    /// Potential (`quadratic`, `line:0,0,0.5`, `cosine:0.3`, or a .toml file).
    #[arg(long)]
    q: Option<String>,
    /// Window radius (line potentials).
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    /// Number of cells.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EquilibriumConfig {
    q: String,
    radius: f64,
    grid: usize,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig { q: "quadratic".into(), radius: 3.0, grid: 1000 }
    }
}

fn support_interval(mu: &GridMeasure) -> (f64, f64) {
    let idx: Vec<usize> = mu.support().collect();
    let cells = mu.cells();
    match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => (cells[a].lo, cells[b].hi),
        _ => (f64::NAN, f64::NAN),
    }
}

fn run_equilibrium(c: &EquilibriumConfig, out: &Path) -> Result<(Value, Vec<String>)> {
    let q = parse_potential(&c.q)?;
    let eq = solve_detailed(&q, c.radius, c.grid, &SolverConfig::default())?;
    let residual = euler_lagrange_residual(&eq.measure, &q)?;
    let offset = if q.is_circle() { 0.0 } else { FREE_ENTROPY_OFFSET };
    let (lo, hi) = support_interval(&eq.measure);
    let mut result = json!({
        "potential": q.label(),
        "carrier": eq.measure.carrier().name(),
        "multiplier": eq.multiplier,
        "weighted_energy": eq.weighted_energy,
        "log_energy": eq.measure.log_energy().value,
        "b_constant": -eq.weighted_energy + offset,
        "residual": residual,
        "support": [lo, hi],
        "rounds": eq.rounds,
    });
    if let Some((a, b, _)) = q.as_quadratic() {
        let (m, s) = (-b / (2.0 * a), (1.0 / (2.0 * a)).sqrt());
        result["l1_to_semicircle"] = json!(eq.measure.l1_to_cdf(|x| semicircle_cdf((x - m) / s)));
    }
    eq.measure.save(&out.join("equilibrium_measure"))?;
    Ok((result, vec!["equilibrium_measure.csv".into(), "equilibrium_measure.json".into()]))
}

// ---- sample --------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    q: Option<String>,
    /// Matrix size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Condition on `||A|| <= R` (line potentials).
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    /// Sample SU(N) instead of U(N) (circle potentials).
    #[arg(long)]
    special: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SampleConfig {
    q: String,
    n: usize,
    count: usize,
    radius: Option<f64>,
    special: bool,
    sampler: SamplerSettings,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            q: "quadratic".into(),
            n: 32,
            count: 100,
            radius: None,
            special: false,
            sampler: SamplerSettings::default(),
        }
    }
}

fn run_sample(c: &SampleConfig, seed: u64, out: &Path) -> Result<(Value, Vec<String>)> {
    let q = parse_potential(&c.q)?;
    let run = if q.is_circle() {
        sample_gibbs_angles(&q, c.n, c.count, seed, &c.sampler, c.special)?
    } else {
        sample_gibbs_eigenvalues_with(&q, c.n, c.count, seed, &c.sampler, c.radius)?
    };
    let mut w = csv::Writer::from_path(out.join("sample_spectra.csv"))?;
    w.write_record((0..c.n).map(|i| format!("x{i}")))?;
    for s in &run.samples {
        w.write_record(s.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    let nf = c.n as f64;
    let circle = q.is_circle();
    // Normalised trace of A^k, or the real part of tr U^k on the circle.
    let mean_power = |k: i32| {
        let f = |x: f64| if circle { (k as f64 * x).cos() } else { x.powi(k) };
        run.samples.iter().map(|s| s.iter().map(|&x| f(x)).sum::<f64>() / nf).sum::<f64>() / run.samples.len() as f64
    };
    let result = json!({
        "potential": q.label(),
        "samples": run.samples.len(),
        "acceptance": run.acceptance,
        "step": run.step,
        "exact": run.exact,
        "rejected": run.rejected,
        "truncation_mass": run.truncation_mass(),
        "mean_trace_power": [mean_power(1), mean_power(2), mean_power(4)],
    });
    Ok((result, vec!["sample_spectra.csv".into()]))
}

// ---- moments -------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct MomentsArgs {
    /// One potential per letter (repeat the flag).
    #[arg(long)]
    q: Vec<String>,
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MomentsConfig {
    q: Vec<String>,
    degree: usize,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig { q: vec!["quadratic".into(), "quadratic".into()], degree: 4 }
    }
}

fn run_moments(c: &MomentsConfig) -> Result<(Value, Vec<String>)> {
    let qs = c.q.iter().map(|s| parse_potential(s)).collect::<Result<Vec<_>>>()?;
    if qs.is_empty() {
        return Err(Error::invalid("give at least one potential"));
    }
    if qs.iter().any(|q| q.is_circle() != qs[0].is_circle()) {
        return Err(Error::CarrierMismatch("letters must share a carrier".into()));
    }
    if c.degree > DEFAULT_DEGREE_CAP {
        return Err(Error::DegreeCap { requested: c.degree, cap: DEFAULT_DEGREE_CAP });
    }
    let alphabet = if qs[0].is_circle() { Alphabet::Unitary } else { Alphabet::SelfAdjoint };
    let marginals = qs.iter().map(|q| limit_marginal(q, c.degree)).collect::<Result<Vec<_>>>()?;
    let table = MomentTable::tabulate(alphabet, qs.len(), c.degree, |w| free_product_moment(&marginals, w))?;
    Ok((serde_json::to_value(&table)?, vec![]))
}

// ---- freeness ------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct FreenessArgs {
    #[arg(long)]
    q: Vec<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// `self-adjoint`, `unitary` or `special-unitary`.
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FreenessConfig {
    q: Vec<String>,
    n: usize,
    count: usize,
    degree: usize,
    kind: Option<String>,
    radius: Option<f64>,
}

impl Default for FreenessConfig {
    fn default() -> Self {
        FreenessConfig {
            q: vec!["quadratic".into(), "quadratic".into()],
            n: 64,
            count: 50,
            degree: 4,
            kind: None,
            radius: None,
        }
    }
}

fn run_freeness(c: &FreenessConfig, seed: u64) -> Result<(Value, Vec<String>)> {
    let qs = c.q.iter().map(|s| parse_potential(s)).collect::<Result<Vec<_>>>()?;
    let circle = qs.first().is_some_and(Potential::is_circle);
    let kind = match c.kind.as_deref() {
        None if circle => MatrixKind::SpecialUnitary,
        None | Some("self-adjoint") => MatrixKind::SelfAdjoint,
        Some("unitary") => MatrixKind::Unitary,
        Some("special-unitary") => MatrixKind::SpecialUnitary,
        Some(other) => return Err(Error::Parse(format!("unknown matrix kind {other:?}"))),
    };
    let spec =
        EnsembleSpec { kind, dim: c.n, potentials: qs, radius: c.radius, sampler: SamplerSettings::default(), seed };
    let report = asymptotic_freeness_report(&spec, c.degree, c.count)?;
    let mut v = serde_json::to_value(&report)?;
    v["max_gap"] = json!(report.max_gap());
    Ok((v, vec![]))
}

// ---- transport -----------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct TransportArgs {
    /// Measure: `semicircle:c=0,s=1`, `uniform:a=-1,b=1`, `arcsine:a=2`,
    /// `trig:c1=0.5,s2=0.1`, `uniform-circle`, or `file:<stem>`.
    #[arg(long)]
    first: Option<String>,
    #[arg(long)]
    second: Option<String>,
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Exponent of the line distance.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TransportConfig {
    first: String,
    second: String,
    radius: f64,
    grid: usize,
    p: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            first: "semicircle".into(),
            second: "semicircle:c=0.5".into(),
            radius: 3.0,
            grid: 1200,
            p: 2.0,
        }
    }
}

fn measure_from_spec(spec: &str, radius: f64, grid: usize) -> Result<GridMeasure> {
    let (head, body) = spec.split_once(':').unwrap_or((spec, ""));
    if head == "file" {
        return GridMeasure::load(Path::new(body));
    }
    let mut keys = std::collections::BTreeMap::new();
    for kv in body.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("{kv:?} in measure {spec:?}")))?;
        let v: f64 = v.trim().parse().map_err(|e| Error::Parse(format!("{kv:?} in measure {spec:?}: {e}")))?;
        keys.insert(k.trim().to_string(), v);
    }
    let get = |k: &str, d: f64| keys.get(k).copied().unwrap_or(d);
    let allow = |names: &[&str]| -> Result<()> {
        match keys.keys().find(|k| !names.contains(&k.as_str())) {
            Some(k) => Err(Error::Parse(format!("unknown key {k:?} in measure {spec:?}"))),
            None => Ok(()),
        }
    };
    match head {
        "semicircle" => {
            allow(&["c", "s"])?;
            semicircle_on(radius, interval_grid(radius, grid), get("c", 0.0), get("s", 1.0))
        }
        "uniform" => {
            allow(&["a", "b"])?;
            uniform_interval(radius, grid, get("a", -1.0), get("b", 1.0))
        }
        "arcsine" => {
            allow(&["a"])?;
            arcsine(radius, grid, get("a", 2.0))
        }
        "uniform-circle" => {
            allow(&[])?;
            Ok(uniform_circle(grid))
        }
        "trig" => {
            let mut cos = Vec::new();
            let mut sin = Vec::new();
            for (k, v) in &keys {
                let (target, idx) = match (k.chars().next(), k[1..].parse::<usize>()) {
                    (Some('c'), Ok(i)) if i >= 1 => (&mut cos, i),
                    (Some('s'), Ok(i)) if i >= 1 => (&mut sin, i),
                    _ => return Err(Error::Parse(format!("unknown key {k:?} in measure {spec:?}"))),
                };
                if target.len() < idx {
                    target.resize(idx, 0.0);
                }
                target[idx - 1] = *v;
            }
            trigonometric_circle(grid, &cos, &sin)
        }
        _ => Err(Error::Parse(format!("unknown measure {spec:?}"))),
    }
}

fn run_transport(c: &TransportConfig) -> Result<(Value, Vec<String>)> {
    let circle = |s: &str| s.starts_with("trig") || s.starts_with("uniform-circle");
    let grid_for = |s: &str| if circle(s) && c.grid == TransportConfig::default().grid { CIRCLE_GRID } else { c.grid };
    let mu = measure_from_spec(&c.first, c.radius, grid_for(&c.first))?;
    let nu = measure_from_spec(&c.second, c.radius, grid_for(&c.second))?;
    let result = match (mu.carrier(), nu.carrier()) {
        (Carrier::Circle, Carrier::Circle) => json!({
            "carrier": "circle",
            "w2_chordal": wasserstein_circle_chordal(&mu, &nu)?,
            "rotation_upper_bound": circle_rotation_scan(&mu, &nu)?,
        }),
        (Carrier::Interval { .. }, Carrier::Interval { .. }) => json!({
            "carrier": "line",
            "p": c.p,
            "wasserstein": wasserstein_1d(&mu, &nu, c.p)?,
        }),
        _ => return Err(Error::CarrierMismatch("both measures must live on the same carrier".into())),
    };
    Ok((result, vec![]))
}

// ---- pressure ------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct PressureArgs {
    /// One potential per letter (repeat the flag).
    #[arg(long)]
    h: Vec<String>,
    /// Matrix sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Also check the Gibbs variational identity (single quadratic letter).
    #[arg(long)]
    variational: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PressureConfig {
    h: Vec<String>,
    dims: Vec<usize>,
    radius: f64,
    samples: usize,
    nodes: usize,
    max_std_error: f64,
    variational: bool,
    sampler: SamplerSettings,
}

impl Default for PressureConfig {
    fn default() -> Self {
        let p = PressureSettings::default();
        PressureConfig {
            h: vec!["quadratic".into()],
            dims: vec![8, 16, 32, 64],
            radius: 3.0,
            samples: p.samples,
            nodes: p.nodes,
            max_std_error: p.max_std_error,
            variational: false,
            sampler: p.sampler,
        }
    }
}

fn run_pressure(c: &PressureConfig, seed: u64) -> Result<(Value, Vec<String>)> {
    let h = c.h.iter().map(|s| parse_potential(s)).collect::<Result<Vec<_>>>()?;
    let settings = PressureSettings {
        samples: c.samples,
        nodes: c.nodes,
        max_std_error: c.max_std_error,
        sampler: c.sampler.clone(),
        seed,
    };
    let report = pressure_estimate(&h, &c.dims, c.radius, &settings)?;
    let mut v = json!({ "estimate": report });
    if c.variational {
        let [q] = h.as_slice() else {
            return Err(Error::invalid("the variational check needs exactly one letter"));
        };
        let checks =
            c.dims.iter().map(|&n| gibbs_variational_check(q, n, c.radius, &settings)).collect::<Result<Vec<_>>>()?;
        v["variational"] = serde_json::to_value(checks)?;
    }
    Ok((v, vec![]))
}

// ---- tci -----------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct TciArgs {
    /// `free`, `matrix` or `product`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// Matrix sizes for the matrix mode (comma separated).
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Coupled-sample count for the product mode.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TciConfig {
    mode: String,
    family: Family,
    q: Option<String>,
    rho: Option<f64>,
    dims: Vec<usize>,
    /// Mean-shift sizes and covariance inflations of the matrix mode.
    shifts: Vec<f64>,
    inflations: Vec<f64>,
    /// `(center, scale)` of each letter in the product mode.
    letters: Vec<(f64, f64)>,
    product_dim: usize,
    samples: usize,
}

impl Default for TciConfig {
    fn default() -> Self {
        TciConfig {
            mode: "free".into(),
            family: Family::ShiftedSemicircle,
            q: None,
            rho: None,
            dims: vec![2, 8, 32],
            shifts: vec![0.25, 1.0],
            inflations: vec![0.5, -0.3],
            letters: vec![(0.5, 1.0), (0.0, 1.3)],
            product_dim: 32,
            samples: 50,
        }
    }
}

fn run_tci(c: &TciConfig, seed: u64) -> Result<Vec<TCIReport>> {
    let default_q = if c.family.is_circle() { "zero-circle" } else { "quadratic" };
    let q = parse_potential(c.q.as_deref().unwrap_or(default_q))?;
    let rho = c.rho.unwrap_or(q.rho);
    let mut reports = match c.mode.as_str() {
        "free" => free_tci_suite(c.family, &q, rho)?,
        "matrix" => {
            let mut out = Vec::new();
            for &n in &c.dims {
                let base = MatrixGaussian::gibbs(&q, n)?;
                for &s in &c.shifts {
                    // Hermitian shift with ||M||_HS = s.
                    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                        num_complex::Complex64::new(((i + j) % 3) as f64 - 1.0, if i == j { 0.0 } else { 0.5 })
                    });
                    let m = (&m + m.adjoint()).map(|z| z * 0.5);
                    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    let mean = &base.mean + m.map(|z| z * (s / norm));
                    out.push(verify_matrix_tci(
                        std::slice::from_ref(&q),
                        n,
                        &[MatrixGaussian { mean, variance: base.variance }],
                        rho,
                    )?);
                }
                for &e in &c.inflations {
                    let lam = MatrixGaussian { mean: base.mean.clone(), variance: base.variance * (1.0 + e) };
                    out.push(verify_matrix_tci(std::slice::from_ref(&q), n, &[lam], rho)?);
                }
            }
            out
        }
        "product" => vec![verify_free_product_upper_bound(&c.letters, c.product_dim, c.samples, seed)?],
        other => return Err(Error::Parse(format!("unknown tci mode {other:?}"))),
    };
    reports.sort_by(|a, b| a.inequality.cmp(&b.inequality));
    Ok(reports)
}

// ---- report --------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[arg(long)]
    q: Option<String>,
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportConfig {
    q: String,
    radius: f64,
    grid: usize,
    /// Grid sizes of the B-constant convergence curve.
    convergence: Vec<usize>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { q: "quadratic".into(), radius: 3.0, grid: 400, convergence: vec![50, 100, 200, 400, 800] }
    }
}

fn run_report(c: &ReportConfig, out: &Path) -> Result<(Value, Vec<String>)> {
    let q = parse_potential(&c.q)?;
    let eq = solve_detailed(&q, c.radius, c.grid, &SolverConfig::default())?;
    let reference = q.as_quadratic().map(|(a, b, _)| (-b / (2.0 * a), (1.0 / (2.0 * a)).sqrt()));
    let mut density = String::from("# x equilibrium_density");
    density.push_str(if reference.is_some() { " semicircle_density\n" } else { "\n" });
    for (cell, w) in eq.measure.cells().iter().zip(eq.measure.weights()) {
        let x = cell.mid();
        density.push_str(&format!("{x} {}", w / cell.width()));
        if let Some((m, s)) = reference {
            density.push_str(&format!(" {}", semicircle_density((x - m) / s) / s));
        }
        density.push('\n');
    }
    std::fs::write(out.join("density.dat"), density)?;
    let offset = if q.is_circle() { 0.0 } else { FREE_ENTROPY_OFFSET };
    let mut curve = String::from("# cells b_constant\n");
    let mut points = Vec::new();
    for &n in &c.convergence {
        let b = -solve_detailed(&q, c.radius, n, &SolverConfig::default())?.weighted_energy + offset;
        curve.push_str(&format!("{n} {b}\n"));
        points.push(json!([n, b]));
    }
    std::fs::write(out.join("b_convergence.dat"), curve)?;
    Ok((
        json!({ "potential": q.label(), "b_convergence": points }),
        vec!["density.dat".into(), "b_convergence.dat".into()],
    ))
}

// ---- driver --------------------------------------------------------------

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn write_report(
    out: &Path,
    command: &str,
    seed: u64,
    config: &Value,
    result: Value,
    files: Vec<String>,
) -> Result<PathBuf> {
    let envelope = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "result": result,
        "files": files,
    });
    let path = out.join(format!("{command}_report.json"));
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn execute(cli: &Cli, file: &FileConfig, seed: u64, out: &Path) -> Result<i32> {
    let name = cli.command.name();
    let section = file.section(name);
    let mut status = EXIT_OK;
    let (config, result, files) = match &cli.command {
        Command::Equilibrium(a) => {
            let c: EquilibriumConfig = resolve(a, section)?;
            let (r, f) = run_equilibrium(&c, out)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Sample(a) => {
            let c: SampleConfig = resolve(a, section)?;
            let (r, f) = run_sample(&c, seed, out)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Moments(a) => {
            let c: MomentsConfig = resolve(a, section)?;
            let (r, f) = run_moments(&c)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Freeness(a) => {
            let c: FreenessConfig = resolve(a, section)?;
            let (r, f) = run_freeness(&c, seed)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Transport(a) => {
            let c: TransportConfig = resolve(a, section)?;
            let (r, f) = run_transport(&c)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Pressure(a) => {
            let c: PressureConfig = resolve(a, section)?;
            let (r, f) = run_pressure(&c, seed)?;
            (serde_json::to_value(&c)?, r, f)
        }
        Command::Tci(a) => {
            let c: TciConfig = resolve(a, section)?;
            let reports = run_tci(&c, seed)?;
            if reports.iter().any(|r| r.verdict == Verdict::Violated) {
                eprintln!("freetci: an inequality check was violated beyond its error bars");
                status = EXIT_NUMERICAL;
            }
            (serde_json::to_value(&c)?, serde_json::to_value(&reports)?, vec![])
        }
        Command::Report(a) => {
            let c: ReportConfig = resolve(a, section)?;
            let (r, f) = run_report(&c, out)?;
            (serde_json::to_value(&c)?, r, f)
        }
    };
    let path = write_report(out, name, seed, &config, result, files)?;
    let _ = writeln!(std::io::stdout(), "{}", path.display());
    Ok(status)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let file = match &cli.config {
        Some(path) => {
            match std::fs::read_to_string(path).map_err(Error::from).and_then(|t| Ok(toml::from_str::<FileConfig>(&t)?))
            {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("freetci: cannot use config {}: {e}", path.display());
                    return EXIT_CONFIG;
                }
            }
        }
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out = cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    if !out.is_dir() {
        eprintln!("freetci: output directory {} does not exist", out.display());
        return EXIT_CONFIG;
    }
    let workers = cli.workers.or(file.workers);
    let task = || match execute(&cli, &file, seed, &out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("freetci: {e}");
            exit_code(&e)
        }
    };
    match workers {
        Some(0) => {
            eprintln!("freetci: --workers must be at least 1");
            EXIT_CONFIG
        }
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(task),
            Err(e) => {
                eprintln!("freetci: cannot start {w} workers: {e}");
                EXIT_CONFIG
            }
        },
        None => task(),
    }
}
