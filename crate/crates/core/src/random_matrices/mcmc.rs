//! Metropolis samplers for log-gas eigenvalue densities
//! `prod |x_i - x_j|^2 exp(-N sum Q(x_i))` on the line and the circle.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::{chain_rng, gue_eigenvalues, haar_matrix, is_zero_circle, project_su_angles, unitary_eigenangles};
use crate::error::{Error, Result};
use crate::measures::semicircle_cdf;
use crate::potentials::Potential;

const ACCEPTANCE_RANGE: (f64, f64) = (0.1, 0.9);
const MAX_REJECTIONS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    /// Burn-in sweeps per chain; `max(10 N, 100)` when unset, so the step
    /// adaptation has room at small `N`.
    pub burn_in: Option<usize>,
    /// Sweeps between recorded samples; `N` when unset.
    pub thinning: Option<usize>,
    pub initial_step: f64,
    pub target_acceptance: f64,
    /// Independent chains; samples are split evenly among them.
    pub chains: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings { burn_in: None, thinning: None, initial_step: 0.1, target_acceptance: 0.3, chains: 1 }
    }
}

/// Output of a sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsRun {
    /// Sorted eigenvalues (or angles in `[0, 2 pi)`), one vector per sample.
    pub samples: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate (1 for exact samplers).
    pub acceptance: f64,
    /// Final step size of the first chain (0 for exact samplers).
    pub step: f64,
    /// Draws discarded by the truncation radius.
    pub rejected: usize,
    pub exact: bool,
}

impl GibbsRun {
    /// Fraction of draws that fell outside the truncation window.
    pub fn truncation_mass(&self) -> f64 {
        let kept = self.samples.len();
        if kept + self.rejected == 0 {
            0.0
        } else {
            self.rejected as f64 / (kept + self.rejected) as f64
        }
    }
}

pub fn sample_gibbs_eigenvalues(q: &Potential, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(sample_gibbs_eigenvalues_with(q, n, count, seed, &SamplerSettings::default(), None)?.samples)
}

/// Eigenvalues of `lambda_N(Q)`, optionally conditioned on `||A|| <= R`.
/// Quadratic potentials are sampled exactly through the Gaussian model.
pub fn sample_gibbs_eigenvalues_with(
    q: &Potential,
    n: usize,
    count: usize,
    seed: u64,
    settings: &SamplerSettings,
    radius: Option<f64>,
) -> Result<GibbsRun> {
    if q.is_circle() {
        return Err(Error::CarrierMismatch("eigenvalue sampler needs a line potential".into()));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    if let Some((a, b, _)) = q.as_quadratic() {
        let scale = 1.0 / (2.0 * a).sqrt();
        let shift = -b / (2.0 * a);
        let draws: Vec<(Vec<f64>, usize)> = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = chain_rng(seed, i as u64);
                let mut rejected = 0;
                loop {
                    let v: Vec<f64> = gue_eigenvalues(n, &mut rng).iter().map(|x| x * scale + shift).collect();
                    match radius {
                        Some(r) if v.iter().any(|x| x.abs() > r) => {
                            rejected += 1;
                            if rejected > MAX_REJECTIONS_PER_SAMPLE {
                                return Err(Error::Truncation { mass: 1.0, limit: 5e-2, radius: r });
                            }
                        }
                        _ => return Ok((v, rejected)),
                    }
                }
            })
            .collect::<Result<_>>()?;
        let rejected = draws.iter().map(|d| d.1).sum();
        return Ok(GibbsRun {
            samples: draws.into_iter().map(|d| d.0).collect(),
            acceptance: 1.0,
            step: 0.0,
            rejected,
            exact: true,
        });
    }
    let init = semicircle_start(n, radius);
    let target = LineTarget { q, n, radius };
    run_chains(&target, init, count, seed, settings, Move::Single)
}

/// Metropolis chains for any line potential on `[-R, R]`, exact sampler or
/// not.
pub(crate) fn sample_line_mcmc(
    q: &Potential,
    n: usize,
    count: usize,
    seed: u64,
    settings: &SamplerSettings,
    radius: f64,
) -> Result<GibbsRun> {
    if q.is_circle() {
        return Err(Error::CarrierMismatch("eigenvalue sampler needs a line potential".into()));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    let init = semicircle_start(n, Some(radius));
    let target = LineTarget { q, n, radius: Some(radius) };
    run_chains(&target, init, count, seed, settings, Move::Single)
}

/// Angles of the `U(N)` (`special = false`) or `SU(N)` (`special = true`)
/// Gibbs ensemble with circle potential `q`.
pub fn sample_gibbs_angles(
    q: &Potential,
    n: usize,
    count: usize,
    seed: u64,
    settings: &SamplerSettings,
    special: bool,
) -> Result<GibbsRun> {
    if !q.is_circle() {
        return Err(Error::CarrierMismatch("angle sampler needs a circle potential".into()));
    }
    if n == 0 {
        return Err(Error::invalid("matrix size N must be at least 1"));
    }
    if special && n == 1 {
        return Ok(GibbsRun { samples: vec![vec![0.0]; count], acceptance: 1.0, step: 0.0, rejected: 0, exact: true });
    }
    // Equispaced start with zero angle sum.
    let init: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64 - PI * (n - 1) as f64 / n as f64).collect();
    let target = CircleTarget { q, n };
    let mv = if special { Move::Pair } else { Move::Single };
    let mut run = run_chains(&target, init, count, seed, settings, mv)?;
    for s in run.samples.iter_mut() {
        for t in s.iter_mut() {
            *t = t.rem_euclid(TAU);
        }
        s.sort_by(f64::total_cmp);
    }
    Ok(run)
}

/// Eigenangles of `exp(-N Tr Q(U)) d gamma_SU(U)`. For `Q = 0` the exact
/// route (Haar sample, eigenangles, projection onto `SU(N)`) is used.
pub fn sample_gibbs_su_eigenangles(q: &Potential, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !q.is_circle() {
        return Err(Error::CarrierMismatch("SU sampler needs a circle potential".into()));
    }
    if is_zero_circle(q) {
        return (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = chain_rng(seed, i as u64);
                let angles = unitary_eigenangles(&haar_matrix(n, &mut rng))?;
                let mut out = project_su_angles(&angles);
                out.sort_by(f64::total_cmp);
                Ok(out)
            })
            .collect();
    }
    Ok(sample_gibbs_angles(q, n, count, seed, &SamplerSettings::default(), true)?.samples)
}

fn semicircle_start(n: usize, radius: Option<f64>) -> Vec<f64> {
    let bound = radius.map(|r| 0.9 * r).unwrap_or(f64::INFINITY);
    (0..n)
        .map(|k| {
            let p = (k as f64 + 0.5) / n as f64;
            let (mut lo, mut hi) = (-2.0, 2.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if semicircle_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (0.5 * (lo + hi)).clamp(-bound, bound)
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Move {
    Single,
    Pair,
}

trait Target: Sync {
    /// Log-density change when coordinate `i` moves to `y`.
    fn single(&self, x: &[f64], i: usize, y: f64) -> f64;
    /// Log-density change when `i -> yi` and `j -> yj` simultaneously.
    fn pair(&self, x: &[f64], i: usize, yi: f64, j: usize, yj: f64) -> f64;
    /// Largest useful proposal scale.
    fn max_step(&self) -> f64 {
        10.0
    }
}

struct LineTarget<'a> {
    q: &'a Potential,
    n: usize,
    radius: Option<f64>,
}

/// `sum_{k != skip} log |num(k)| / |den(k)|`, multiplying in blocks to save
/// logarithms.
fn log_ratio_sum(len: usize, skip: (usize, usize), mut ratio: impl FnMut(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut prod = 1.0;
    let mut count = 0;
    for k in 0..len {
        if k == skip.0 || k == skip.1 {
            continue;
        }
        prod *= ratio(k);
        count += 1;
        if count == 16 {
            acc += prod.ln();
            prod = 1.0;
            count = 0;
        }
    }
    acc + prod.ln()
}

impl Target for LineTarget<'_> {
    fn max_step(&self) -> f64 {
        self.radius.map_or(10.0, |r| r.min(10.0))
    }

    fn single(&self, x: &[f64], i: usize, y: f64) -> f64 {
        if let Some(r) = self.radius {
            if y.abs() > r {
                return f64::NEG_INFINITY;
            }
        }
        let xi = x[i];
        let vdm = log_ratio_sum(x.len(), (i, i), |k| ((y - x[k]) / (xi - x[k])).abs());
        2.0 * vdm - self.n as f64 * (self.q.evaluate(y) - self.q.evaluate(xi))
    }

    fn pair(&self, x: &[f64], i: usize, yi: f64, j: usize, yj: f64) -> f64 {
        if let Some(r) = self.radius {
            if yi.abs() > r || yj.abs() > r {
                return f64::NEG_INFINITY;
            }
        }
        let (xi, xj) = (x[i], x[j]);
        let a = log_ratio_sum(x.len(), (i, j), |k| ((yi - x[k]) / (xi - x[k])).abs());
        let b = log_ratio_sum(x.len(), (i, j), |k| ((yj - x[k]) / (xj - x[k])).abs());
        let c = ((yi - yj) / (xi - xj)).abs().ln();
        2.0 * (a + b + c)
            - self.n as f64 * (self.q.evaluate(yi) + self.q.evaluate(yj) - self.q.evaluate(xi) - self.q.evaluate(xj))
    }
}

struct CircleTarget<'a> {
    q: &'a Potential,
    n: usize,
}

fn chord(a: f64, b: f64) -> f64 {
    (0.5 * (a - b)).sin().abs()
}

impl Target for CircleTarget<'_> {
    fn single(&self, x: &[f64], i: usize, y: f64) -> f64 {
        let xi = x[i];
        let vdm = log_ratio_sum(x.len(), (i, i), |k| chord(y, x[k]) / chord(xi, x[k]));
        2.0 * vdm - self.n as f64 * (self.q.evaluate(y) - self.q.evaluate(xi))
    }

    fn pair(&self, x: &[f64], i: usize, yi: f64, j: usize, yj: f64) -> f64 {
        let (xi, xj) = (x[i], x[j]);
        let a = log_ratio_sum(x.len(), (i, j), |k| chord(yi, x[k]) / chord(xi, x[k]));
        let b = log_ratio_sum(x.len(), (i, j), |k| chord(yj, x[k]) / chord(xj, x[k]));
        let c = (chord(yi, yj) / chord(xi, xj)).ln();
        2.0 * (a + b + c)
            - self.n as f64 * (self.q.evaluate(yi) + self.q.evaluate(yj) - self.q.evaluate(xi) - self.q.evaluate(xj))
    }
}

struct ChainOutput {
    samples: Vec<Vec<f64>>,
    accepted: usize,
    proposed: usize,
    step: f64,
}

fn sweep<T: Target, R: Rng>(target: &T, x: &mut [f64], step: f64, mv: Move, rng: &mut R) -> usize {
    let n = x.len();
    let mut accepted = 0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        let delta = step * z;
        let log_u: f64 = rng.random::<f64>().ln();
        match mv {
            Move::Single => {
                let i = rng.random_range(0..n);
                let y = x[i] + delta;
                if log_u < target.single(x, i, y) {
                    x[i] = y;
                    accepted += 1;
                }
            }
            Move::Pair => {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let (yi, yj) = (x[i] + delta, x[j] - delta);
                if log_u < target.pair(x, i, yi, j, yj) {
                    x[i] = yi;
                    x[j] = yj;
                    accepted += 1;
                }
            }
        }
    }
    accepted
}

fn run_chains<T: Target>(
    target: &T,
    init: Vec<f64>,
    count: usize,
    seed: u64,
    settings: &SamplerSettings,
    mv: Move,
) -> Result<GibbsRun> {
    let n = init.len();
    let chains = settings.chains.max(1);
    let per_chain = count.div_ceil(chains);
    let burn_in = settings.burn_in.unwrap_or((10 * n).max(100));
    let thinning = settings.thinning.unwrap_or(n).max(1);
    if !(settings.initial_step > 0.0) {
        return Err(Error::invalid("initial MCMC step must be positive"));
    }
    let outputs: Vec<ChainOutput> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(seed, c as u64);
            let mut x = init.clone();
            let mut step = settings.initial_step;
            for _ in 0..burn_in {
                let acc = sweep(target, &mut x, step, mv, &mut rng) as f64 / n as f64;
                step = (step * (acc - settings.target_acceptance).exp()).clamp(1e-6, target.max_step());
            }
            let mut samples = Vec::with_capacity(per_chain);
            let mut accepted = 0;
            let mut proposed = 0;
            for _ in 0..per_chain {
                for _ in 0..thinning {
                    accepted += sweep(target, &mut x, step, mv, &mut rng);
                    proposed += n;
                }
                let mut s = x.clone();
                s.sort_by(f64::total_cmp);
                samples.push(s);
            }
            ChainOutput { samples, accepted, proposed, step }
        })
        .collect();
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let acceptance = if proposed == 0 { 1.0 } else { accepted as f64 / proposed as f64 };
    if proposed > 0 && !(ACCEPTANCE_RANGE.0..=ACCEPTANCE_RANGE.1).contains(&acceptance) {
        return Err(Error::Diagnostics(format!(
            "acceptance rate {acceptance:.3} outside [{}, {}] after tuning",
            ACCEPTANCE_RANGE.0, ACCEPTANCE_RANGE.1
        )));
    }
    let step = outputs.first().map(|o| o.step).unwrap_or(0.0);
    let mut samples: Vec<Vec<f64>> = outputs.into_iter().flat_map(|o| o.samples).collect();
    samples.truncate(count);
    Ok(GibbsRun { samples, acceptance, step, rejected: 0, exact: false })
}
