//! Partition functions of Gibbs ensembles, the truncated pressure
//! `P_{N,R}(h)` with its large-`N` extrapolation, and the Gibbs
//! variational identity.
//!
//! Volumes on self-adjoint matrices use Lebesgue measure for the
//! Hilbert–Schmidt inner product (`N^2` real coordinates). Unitary
//! partition functions are normalised by Haar measure on `SU(N)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quadrature::gauss_legendre_on;
use crate::random_matrices::mcmc::sample_line_mcmc;
use crate::random_matrices::{is_zero_circle, sample_gibbs_angles, sample_gibbs_eigenvalues_with, SamplerSettings};

/// Truncation mass above which a warning is attached.
pub const TRUNCATION_WARN: f64 = 1e-3;
/// Truncation mass above which an estimate is refused.
pub const TRUNCATION_LIMIT: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PressureSettings {
    /// Samples per thermodynamic-integration node.
    pub samples: usize,
    /// Gauss–Legendre nodes in the coupling.
    pub nodes: usize,
    /// Largest accepted standard error of a normalised estimate.
    pub max_std_error: f64,
    pub sampler: SamplerSettings,
    pub seed: u64,
}

impl Default for PressureSettings {
    fn default() -> Self {
        PressureSettings { samples: 200, nodes: 21, max_std_error: 5e-2, sampler: SamplerSettings::default(), seed: 0 }
    }
}

fn ln_factorial(j: usize) -> f64 {
    ln_gamma(j as f64 + 1.0)
}

/// `log C_N` in `dA = C_N prod_{i<j} (x_i - x_j)^2 dx dU` (Haar
/// probability `dU`): `C_N = (2 pi)^{N(N-1)/2} / prod_{j=1}^N j!`.
pub fn weyl_log_constant(n: usize) -> f64 {
    let nf = n as f64;
    0.5 * nf * (nf - 1.0) * TAU.ln() - (1..=n).map(ln_factorial).sum::<f64>()
}

/// `log int prod_{i<j} (x_i - x_j)^2 exp(-N sum x_i^2 / 2) dx`.
pub fn log_gaussian_eigenvalue_integral(n: usize) -> f64 {
    let nf = n as f64;
    -0.5 * nf * nf * nf.ln() + 0.5 * nf * TAU.ln() + (1..=n).map(ln_factorial).sum::<f64>()
}

/// `log int_{[-R,R]^N} prod_{i<j} (x_i - x_j)^2 dx`, a Selberg integral.
pub fn log_cube_eigenvalue_integral(n: usize, radius: f64) -> f64 {
    let nf = n as f64;
    nf * nf * (2.0 * radius).ln()
        + (0..n).map(|j| 2.0 * ln_factorial(j) + ln_factorial(j + 1) - ln_factorial(n + j)).sum::<f64>()
}

/// Log-volume of `{A self-adjoint : ||A|| <= R}`.
pub fn log_ball_volume(n: usize, radius: f64) -> f64 {
    weyl_log_constant(n) + log_cube_eigenvalue_integral(n, radius)
}

/// `log int exp(-N Tr(a A^2 + b A + c)) dA`.
fn gaussian_log_partition(n: usize, a: f64, b: f64, c: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * nf * (PI / (nf * a)).ln() - nf * nf * (c - b * b / (4.0 * a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Exact,
    ThermodynamicIntegration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPartition {
    pub dim: usize,
    pub log_z: f64,
    /// `(1/N^2) log Z_N + (1/2) log N` on the line, `(1/N^2) log Z_N` on
    /// the circle.
    pub normalized: f64,
    /// Standard error of `normalized`.
    pub std_error: f64,
    pub method: PartitionMethod,
}

/// Mean and batch-means standard error.
fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    let batches = 10.min(k / 2);
    if batches < 2 {
        return (mean, 0.0);
    }
    let size = k / batches;
    let means: Vec<f64> =
        (0..batches).map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

fn node_seed(seed: u64, node: usize) -> u64 {
    seed.wrapping_mul(0xBF58_476D_1CE4_E5B9).wrapping_add(0x94D0_49BB_1331_11EB_u64.wrapping_mul(node as u64 + 1))
}

/// `int_0^1 E_s[f] ds` by Gauss–Legendre, with `E_s` the mean of
/// `observable` over draws from `draw(s, seed)`.
fn thermodynamic_integral<D, O>(settings: &PressureSettings, draw: D, observable: O) -> Result<(f64, f64)>
where
    D: Fn(f64, u64) -> Result<Vec<Vec<f64>>> + Sync,
    O: Fn(&[f64]) -> f64 + Sync,
{
    if settings.nodes == 0 || settings.samples < 2 {
        return Err(Error::invalid("thermodynamic integration needs nodes and at least two samples"));
    }
    let (s, w) = gauss_legendre_on(settings.nodes, 0.0, 1.0);
    let parts = (0..settings.nodes)
        .into_par_iter()
        .map(|k| {
            let samples = draw(s[k], node_seed(settings.seed, k))?;
            let values: Vec<f64> = samples.iter().map(|x| observable(x)).collect();
            Ok(mean_and_error(&values))
        })
        .collect::<Result<Vec<_>>>()?;
    let value = parts.iter().zip(&w).map(|((m, _), wk)| m * wk).sum();
    let var: f64 = parts.iter().zip(&w).map(|((_, e), wk)| (e * wk).powi(2)).sum();
    Ok((value, var.sqrt()))
}

fn check_error(std_error: f64, settings: &PressureSettings, what: &str) -> Result<()> {
    if !(std_error <= settings.max_std_error) {
        return Err(Error::Diagnostics(format!(
            "{what}: thermodynamic-integration standard error {std_error:.3e} exceeds {:.3e}; raise the sample count",
            settings.max_std_error
        )));
    }
    Ok(())
}

/// `log Z_N(Q) = log int exp(-N Tr Q(A)) dA` for a confining line
/// potential.
pub fn log_partition_line(q: &Potential, n: usize, settings: &PressureSettings) -> Result<LogPartition> {
    if q.is_circle() {
        return Err(Error::CarrierMismatch("log_partition_line needs a line potential".into()));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    if !q.confining() {
        return Err(Error::invalid(format!("{} is not confining; Z_N diverges", q.label())));
    }
    let nf = n as f64;
    let c = q.constant();
    let q0 = q.with_constant(0.0);
    let (log_z0, std_error, method) = if let Some((a, b, _)) = q0.as_quadratic() {
        (gaussian_log_partition(n, a, b, 0.0), 0.0, PartitionMethod::Exact)
    } else {
        let base = Potential::quadratic();
        let (integral, err) = thermodynamic_integral(
            settings,
            |s, seed| {
                let qs = base.interpolate(&q0, s)?;
                Ok(sample_gibbs_eigenvalues_with(&qs, n, settings.samples, seed, &settings.sampler, None)?.samples)
            },
            |x| x.iter().map(|v| q0.evaluate(*v) - 0.5 * v * v).sum::<f64>() / nf,
        )?;
        check_error(err, settings, "log_partition_line")?;
        (gaussian_log_partition(n, 0.5, 0.0, 0.0) - nf * nf * integral, err, PartitionMethod::ThermodynamicIntegration)
    };
    let log_z = log_z0 - c * nf * nf;
    Ok(LogPartition { dim: n, log_z, normalized: log_z / (nf * nf) + 0.5 * nf.ln(), std_error, method })
}

/// `log Z_N(Q) = log int_{SU(N)} exp(-N Tr Q(U)) dU`.
pub fn log_partition_circle(q: &Potential, n: usize, settings: &PressureSettings) -> Result<LogPartition> {
    if !q.is_circle() {
        return Err(Error::CarrierMismatch("log_partition_circle needs a circle potential".into()));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    let nf = n as f64;
    let c = q.constant();
    let q0 = q.with_constant(0.0);
    let zero = Potential::zero_circle();
    let (log_z0, std_error, method) = if is_zero_circle(&q0) || n == 1 {
        // SU(1) is a point.
        (if n == 1 { -q0.evaluate(0.0) } else { 0.0 }, 0.0, PartitionMethod::Exact)
    } else {
        let (integral, err) = thermodynamic_integral(
            settings,
            |s, seed| {
                let qs = zero.interpolate(&q0, s)?;
                Ok(sample_gibbs_angles(&qs, n, settings.samples, seed, &settings.sampler, true)?.samples)
            },
            |x| x.iter().map(|t| q0.evaluate(*t)).sum::<f64>() / nf,
        )?;
        check_error(err, settings, "log_partition_circle")?;
        (-nf * nf * integral, err, PartitionMethod::ThermodynamicIntegration)
    };
    let log_z = log_z0 - c * nf * nf;
    Ok(LogPartition { dim: n, log_z, normalized: log_z / (nf * nf), std_error, method })
}

/// One matrix size of a pressure estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressurePoint {
    pub dim: usize,
    /// `(1/N^2) P_{N,R}(h) + (n/2) log N`.
    pub value: f64,
    pub std_error: f64,
    /// Largest mass outside the `R`-ball among the untruncated Gibbs laws
    /// of the letters (only for confining letters).
    pub truncation_mass: Option<f64>,
    pub warnings: Vec<String>,
}

/// Pieces of one letter: normalised pressure, error, truncation mass.
struct LetterPressure {
    value: f64,
    std_error: f64,
    mass: Option<f64>,
}

/// `(1/N^2) log P(||A|| <= R)` under a Gaussian law, and the mass outside.
fn gaussian_truncation(
    a: f64,
    b: f64,
    n: usize,
    radius: f64,
    settings: &PressureSettings,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let q = Potential::line(vec![0.0, b, a], 0.0);
    let run = sample_gibbs_eigenvalues_with(&q, n, settings.samples, seed, &settings.sampler, Some(radius))?;
    let total = (run.samples.len() + run.rejected) as f64;
    let p_in = run.samples.len() as f64 / total;
    let mass = 1.0 - p_in;
    // Binomial error of log p_in by the delta method.
    let err = (mass / (p_in * total)).sqrt();
    let nf = n as f64;
    Ok((p_in.ln() / (nf * nf), err / (nf * nf), mass))
}

fn letter_pressure(
    h: &Potential,
    n: usize,
    radius: f64,
    settings: &PressureSettings,
    seed: u64,
) -> Result<LetterPressure> {
    let nf = n as f64;
    let norm = |log_p: f64| log_p / (nf * nf) + 0.5 * nf.ln();
    if let Some((a, b, c)) = h.as_quadratic() {
        let (log_in, err, mass) = gaussian_truncation(a, b, n, radius, settings, seed)?;
        return Ok(LetterPressure {
            value: norm(gaussian_log_partition(n, a, b, c)) + log_in,
            std_error: err,
            mass: Some(mass),
        });
    }
    // Reference: x^2/2 on the same ball.
    let (ref_in, ref_err, _) = gaussian_truncation(0.5, 0.0, n, radius, settings, seed)?;
    let base = Potential::quadratic();
    let mut ti_settings = settings.clone();
    ti_settings.seed = seed ^ 0x5555_5555_5555_5555;
    let (integral, err) = thermodynamic_integral(
        &ti_settings,
        |s, sd| {
            let hs = base.interpolate(h, s)?;
            Ok(sample_line_mcmc(&hs, n, settings.samples, sd, &settings.sampler, radius)?.samples)
        },
        |x| x.iter().map(|v| h.evaluate(*v) - 0.5 * v * v).sum::<f64>() / nf,
    )?;
    let value = norm(gaussian_log_partition(n, 0.5, 0.0, 0.0)) + ref_in - integral;
    let mass = if h.confining() {
        let run = sample_gibbs_eigenvalues_with(
            h,
            n,
            settings.samples,
            seed ^ 0xAAAA_AAAA_AAAA_AAAA,
            &settings.sampler,
            None,
        )?;
        let outside = run.samples.iter().filter(|x| x.iter().any(|v| v.abs() > radius)).count();
        Some(outside as f64 / run.samples.len() as f64)
    } else {
        None
    };
    Ok(LetterPressure { value, std_error: (err * err + ref_err * ref_err).sqrt(), mass })
}

/// Pressure of `h = sum_i h_i(X_i)` at one matrix size.
pub fn pressure_at(h: &[Potential], n: usize, radius: f64, settings: &PressureSettings) -> Result<PressurePoint> {
    if h.is_empty() {
        return Err(Error::invalid("h needs at least one letter"));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid("pressure needs a finite positive radius"));
    }
    if h.iter().any(|p| p.is_circle()) {
        return Err(Error::CarrierMismatch("pressure terms must be line polynomials".into()));
    }
    let mut value = 0.0;
    let mut var = 0.0;
    let mut mass: Option<f64> = None;
    for (i, hi) in h.iter().enumerate() {
        let seed = node_seed(settings.seed ^ (n as u64) << 32, 1000 + i);
        let p = letter_pressure(hi, n, radius, settings, seed)?;
        value += p.value;
        var += p.std_error * p.std_error;
        if let Some(m) = p.mass {
            mass = Some(mass.map_or(m, |x: f64| x.max(m)));
        }
    }
    let mut warnings = Vec::new();
    if let Some(m) = mass {
        if m > TRUNCATION_LIMIT {
            return Err(Error::Truncation { mass: m, limit: TRUNCATION_LIMIT, radius });
        }
        if m > TRUNCATION_WARN {
            warnings.push(format!("N={n}: truncation mass {m:.2e} outside the radius-{radius} ball"));
        }
    }
    let std_error = var.sqrt();
    check_error(std_error, settings, "pressure")?;
    Ok(PressurePoint { dim: n, value, std_error, truncation_mass: mass, warnings })
}

/// Per-size pressures and their `a + b / N^2` extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub radius: f64,
    pub letters: usize,
    pub points: Vec<PressurePoint>,
    /// Fitted limit `a`.
    pub extrapolated: f64,
    pub std_error: f64,
    /// Fitted finite-size coefficient `b`.
    pub slope: f64,
    pub model: String,
    pub warnings: Vec<String>,
}

/// Least squares `y = a + b x`; returns `(a, b)` and the coefficients of
/// `a` as a linear combination of the `y`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let k = x.len() as f64;
    if x.len() == 1 {
        return (y[0], 0.0, vec![1.0]);
    }
    let mx = x.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let coef: Vec<f64> = x.iter().map(|v| 1.0 / k - mx * (v - mx) / sxx).collect();
    let a = coef.iter().zip(y).map(|(c, v)| c * v).sum();
    let my = y.iter().sum::<f64>() / k;
    let b = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum::<f64>() / sxx;
    (a, b, coef)
}

pub fn pressure_estimate(
    h: &[Potential],
    dims: &[usize],
    radius: f64,
    settings: &PressureSettings,
) -> Result<PressureReport> {
    if dims.is_empty() {
        return Err(Error::invalid("need at least one matrix size"));
    }
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == 1 && dims.len() > 1 {
        return Err(Error::invalid("matrix sizes must be distinct for extrapolation"));
    }
    let points = sorted.iter().map(|&n| pressure_at(h, n, radius, settings)).collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|p| 1.0 / (p.dim as f64).powi(2)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    let (a, b, coef) = linear_fit(&x, &y);
    let std_error = coef.iter().zip(&points).map(|(c, p)| (c * p.std_error).powi(2)).sum::<f64>().sqrt();
    let warnings = points.iter().flat_map(|p| p.warnings.clone()).collect();
    Ok(PressureReport {
        radius,
        letters: h.len(),
        points,
        extrapolated: a,
        std_error,
        slope: b,
        model: "a + b/N^2".into(),
        warnings,
    })
}

/// The three sides of `P = -N^2 E[tr h] + S` for the truncated Gibbs law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalCheck {
    pub dim: usize,
    pub radius: f64,
    /// `P_{N,R}(h) = log Z_{N,R}(h)`.
    pub pressure: f64,
    /// `E[tr h(A)]` under the truncated law.
    pub energy: f64,
    /// Differential entropy of the truncated law.
    pub entropy: f64,
    pub residual: f64,
    pub truncation_mass: f64,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / TAU.sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Checks the Gibbs variational identity for a quadratic letter `h`.
///
/// The pressure comes from the Gaussian integral and the in-ball
/// probability, the energy from samples of the truncated law, and the
/// entropy from the Gaussian closed form. At `N = 1` all three are exact
/// truncated-normal formulas.
pub fn gibbs_variational_check(
    h: &Potential,
    n: usize,
    radius: f64,
    settings: &PressureSettings,
) -> Result<VariationalCheck> {
    let Some((a, b, c)) = h.as_quadratic() else {
        return Err(Error::invalid("the variational check needs a quadratic h"));
    };
    if n == 0 || !(radius > 0.0) {
        return Err(Error::invalid("need N >= 1 and a positive radius"));
    }
    let nf = n as f64;
    let k = nf * nf;
    let mean = -b / (2.0 * a);
    let sigma = (1.0 / (2.0 * a * nf)).sqrt();
    let (pressure, energy, entropy, mass) = if n == 1 {
        let (al, be) = ((-radius - mean) / sigma, (radius - mean) / sigma);
        let zt = std_normal_cdf(be) - std_normal_cdf(al);
        let mass = 1.0 - zt;
        if mass > TRUNCATION_WARN {
            return Err(Error::Truncation { mass, limit: TRUNCATION_WARN, radius });
        }
        let (pa, pb) = (std_normal_pdf(al), std_normal_pdf(be));
        let m1 = mean + sigma * (pa - pb) / zt;
        let var = sigma * sigma * (1.0 + (al * pa - be * pb) / zt - ((pa - pb) / zt).powi(2));
        let energy = a * (var + m1 * m1) + b * m1 + c;
        let entropy = (TAU.sqrt() * std::f64::consts::E.sqrt() * sigma * zt).ln() + (al * pa - be * pb) / (2.0 * zt);
        let pressure = -c + b * b / (4.0 * a) + (PI / a).sqrt().ln() + zt.ln();
        (pressure, energy, entropy, mass)
    } else {
        let run = sample_gibbs_eigenvalues_with(h, n, settings.samples, settings.seed, &settings.sampler, Some(radius))
            .map_err(|e| match e {
                Error::Truncation { radius, .. } => Error::Truncation { mass: 1.0, limit: TRUNCATION_WARN, radius },
                other => other,
            })?;
        let mass = run.truncation_mass();
        if mass > TRUNCATION_WARN {
            return Err(Error::Truncation { mass, limit: TRUNCATION_WARN, radius });
        }
        let pressure = gaussian_log_partition(n, a, b, c) + (1.0 - mass).ln();
        let values: Vec<f64> = run.samples.iter().map(|x| x.iter().map(|v| h.evaluate(*v)).sum::<f64>() / nf).collect();
        let (energy, _) = mean_and_error(&values);
        // N^2 independent coordinates of variance sigma^2.
        let entropy = 0.5 * k * (TAU * std::f64::consts::E * sigma * sigma).ln();
        (pressure, energy, entropy, mass)
    };
    let residual = (pressure - (-k * energy + entropy)).abs();
    Ok(VariationalCheck { dim: n, radius, pressure, energy, entropy, residual, truncation_mass: mass })
}

#[cfg(test)]
mod tests;
