//! Weighted logarithmic energy minimisation.
//!
//! On a fixed grid the problem is the strictly convex quadratic program
//! `min -w^T K w + q^T w` over the probability simplex, where `K` is the
//! cell-pair log kernel and `q` the cell averages of the potential. An
//! accelerated projected gradient run supplies a support guess which an
//! active-set iteration then turns into the exact grid minimiser.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::kernel::{dot, LogKernel};
use crate::measures::{circle_grid, interval_grid, Carrier, GridMeasure, FREE_ENTROPY_OFFSET};
use crate::potentials::Potential;

/// Weight above which a node counts as part of the numerical support.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Projected-gradient iterations used for the warm start.
    pub warm_iterations: usize,
    /// Maximum number of active-set rounds.
    pub max_rounds: usize,
    /// KKT tolerance on the off-support Euler-Lagrange violation.
    pub tolerance: f64,
    /// Mass allowed in the two outermost cells before the window is
    /// declared too small.
    pub edge_mass: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { warm_iterations: 400, max_rounds: 200, tolerance: 1e-10, edge_mass: 1e-9 }
    }
}

/// Solver output together with its optimality data.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub measure: GridMeasure,
    /// Euler-Lagrange constant `F` (the Lagrange multiplier).
    pub multiplier: f64,
    pub weighted_energy: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub on_support: f64,
    pub off_support: f64,
}

/// `-Sigma(mu) + mu(Q)`.
pub fn weighted_energy(mu: &GridMeasure, q: &Potential) -> Result<f64> {
    let potential = q.integrate(mu)?;
    Ok(-mu.log_energy().value + potential)
}

/// Equilibrium measure of `q` on the default grid: `n` equal cells on
/// `[-radius, radius]` for line potentials, `n` equispaced angles on the
/// circle (where `radius` is ignored).
pub fn solve_equilibrium(q: &Potential, radius: f64, n: usize) -> Result<GridMeasure> {
    Ok(solve_detailed(q, radius, n, &SolverConfig::default())?.measure)
}

pub fn solve_detailed(q: &Potential, radius: f64, n: usize, config: &SolverConfig) -> Result<Equilibrium> {
    let (carrier, nodes) = if q.is_circle() {
        (Carrier::Circle, circle_grid(n))
    } else {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("window radius must be positive"));
        }
        (Carrier::Interval { radius }, interval_grid(radius, n))
    };
    solve_on_grid(q, carrier, nodes, config)
}

/// Equilibrium measure over probability vectors on an arbitrary grid.
pub fn solve_on_grid(q: &Potential, carrier: Carrier, nodes: Vec<f64>, config: &SolverConfig) -> Result<Equilibrium> {
    q.validate()?;
    if !q.matches(&carrier) {
        return Err(Error::CarrierMismatch(format!("{} potential on a {} grid", q.carrier_name(), carrier.name())));
    }
    if nodes.len() < 2 {
        return Err(Error::invalid("equilibrium grid needs at least 2 nodes"));
    }
    let n = nodes.len();
    let template = GridMeasure::new(carrier, nodes.clone(), uniform(n))?;
    let kernel = template.kernel();
    let qv = q.cell_averages(&template);

    let warm = projected_gradient(&kernel, &qv, config.warm_iterations);
    let (w, multiplier, rounds) = active_set(&kernel, &qv, &warm, config)?;

    if let Carrier::Interval { radius } = carrier {
        let edge = w[0].max(w[n - 1]);
        if edge > config.edge_mass {
            return Err(Error::EnlargeWindow { radius, edge_mass: edge });
        }
    }
    let measure = GridMeasure::from_unnormalized(carrier, nodes, w)?;
    let weighted_energy = weighted_energy(&measure, q)?;
    Ok(Equilibrium { measure, multiplier, weighted_energy, rounds })
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Largest eigenvalue of `-K` on zero-sum vectors, by power iteration.
fn tangent_norm(kernel: &LogKernel) -> f64 {
    let n = kernel.len();
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
    center(&mut v);
    let mut lambda = 1.0;
    for _ in 0..60 {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut kv: Vec<f64> = kernel.apply(&v).into_iter().map(|x| -x).collect();
        center(&mut kv);
        lambda = dot(&kv, &v);
        v = kv;
    }
    lambda.abs().max(1e-12)
}

fn projected_gradient(kernel: &LogKernel, q: &[f64], iterations: usize) -> Vec<f64> {
    let n = q.len();
    let step = 1.0 / (2.0 * tangent_norm(kernel) * 1.05);
    let mut w = uniform(n);
    let mut y = w.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let ky = kernel.apply(&y);
        let mut next: Vec<f64> = (0..n).map(|i| y[i] - step * (q[i] - 2.0 * ky[i])).collect();
        project_simplex(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = (0..n).map(|i| next[i] + beta * (next[i] - w[i])).collect();
        w = next;
        t = t_next;
    }
    w
}

/// Exact minimiser by primal-dual active set on the KKT system
/// `2 K_SS w_S - F 1 = q_S`, `1^T w_S = 1`.
fn active_set(kernel: &LogKernel, q: &[f64], warm: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, f64, usize)> {
    let n = q.len();
    let peak = warm.iter().cloned().fold(0.0, f64::max);
    let mut in_support: Vec<bool> = warm.iter().map(|w| *w > 1e-6 * peak).collect();
    let mut residual = f64::INFINITY;
    for round in 1..=config.max_rounds {
        let support: Vec<usize> = (0..n).filter(|&i| in_support[i]).collect();
        let m = support.len();
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut b = DVector::<f64>::zeros(m + 1);
        for (r, &i) in support.iter().enumerate() {
            let row = kernel.row(i);
            for (c, &j) in support.iter().enumerate() {
                a[(r, c)] = 2.0 * row[j];
            }
            a[(r, m)] = -1.0;
            a[(m, r)] = 1.0;
            b[r] = q[i];
        }
        b[m] = 1.0;
        let x = a.lu().solve(&b).ok_or_else(|| Error::Numerical("singular KKT system in equilibrium solver".into()))?;
        let multiplier = x[m];
        let mut w = vec![0.0; n];
        for (r, &i) in support.iter().enumerate() {
            w[i] = x[r];
        }

        let negative: Vec<usize> = support.iter().copied().filter(|&i| w[i] < 0.0).collect();
        if !negative.is_empty() {
            residual = negative.iter().map(|&i| -w[i]).fold(0.0, f64::max);
            for i in negative {
                in_support[i] = false;
            }
            continue;
        }

        let kw = kernel.apply(&w);
        let scale = 1.0 + multiplier.abs();
        let mut violators = Vec::new();
        residual = 0.0;
        for i in 0..n {
            if !in_support[i] {
                let excess = 2.0 * kw[i] - q[i] - multiplier;
                if excess > config.tolerance * scale {
                    violators.push(i);
                    residual = residual.max(excess);
                }
            }
        }
        if violators.is_empty() {
            return Ok((w, multiplier, round));
        }
        for i in violators {
            in_support[i] = true;
        }
    }
    Err(Error::NonConvergence { iterations: config.max_rounds, residual })
}

/// First-order optimality certificate. With `U = 2 int log|x - y| dmu(y) - Q`
/// (cell averaged) and `F` the median of `U` over the support, returns
/// `max |U - F|` on the support and `max (U - F)_+` off it.
pub fn euler_lagrange_residual(mu: &GridMeasure, q: &Potential) -> Result<Residual> {
    euler_lagrange_residual_with(mu, q, SUPPORT_THRESHOLD)
}

pub fn euler_lagrange_residual_with(mu: &GridMeasure, q: &Potential, threshold: f64) -> Result<Residual> {
    if !q.matches(&mu.carrier()) {
        return Err(Error::CarrierMismatch(format!(
            "{} potential against {} measure",
            q.carrier_name(),
            mu.carrier().name()
        )));
    }
    let support: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights()[i] > threshold).collect();
    if support.is_empty() {
        return Err(Error::invalid("measure has empty numerical support"));
    }
    let kw = mu.kernel().apply(mu.weights());
    let qv = q.cell_averages(mu);
    let u: Vec<f64> = kw.iter().zip(&qv).map(|(k, q)| 2.0 * k - q).collect();
    let mut on: Vec<f64> = support.iter().map(|&i| u[i]).collect();
    on.sort_by(f64::total_cmp);
    let f = if on.len() % 2 == 1 { on[on.len() / 2] } else { 0.5 * (on[on.len() / 2 - 1] + on[on.len() / 2]) };
    let on_support = on.iter().map(|v| (v - f).abs()).fold(0.0, f64::max);
    let mut in_support = vec![false; mu.len()];
    support.iter().for_each(|&i| in_support[i] = true);
    let off_support = (0..mu.len()).filter(|&i| !in_support[i]).map(|i| (u[i] - f).max(0.0)).fold(0.0, f64::max);
    Ok(Residual { on_support, off_support })
}

/// Grid settings used for the B constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BConfig {
    pub radius: f64,
    pub grid: usize,
}

impl Default for BConfig {
    fn default() -> Self {
        BConfig { radius: 3.0, grid: 1000 }
    }
}

/// `Sigma(mu_Q) - mu_Q(Q) + 3/4 + log(2 pi)/2` for a single line potential.
pub fn b_term_line(q: &Potential, config: &BConfig) -> Result<f64> {
    if q.is_circle() {
        return Err(Error::CarrierMismatch("line B constant needs line potentials".into()));
    }
    let mu = solve_equilibrium(q, config.radius, config.grid)?;
    Ok(-weighted_energy(&mu, q)? + FREE_ENTROPY_OFFSET)
}

/// `Sigma(mu_Q) - mu_Q(Q)` for a single circle potential.
pub fn b_term_circle(q: &Potential, config: &BConfig) -> Result<f64> {
    if !q.is_circle() {
        return Err(Error::CarrierMismatch("circle B constant needs circle potentials".into()));
    }
    let mu = solve_equilibrium(q, 0.0, config.grid)?;
    Ok(-weighted_energy(&mu, q)?)
}

/// Sum of per-letter terms in a canonical order, so the result does not
/// depend on the order of the potential list.
fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub fn b_constant_line(qs: &[Potential], config: &BConfig) -> Result<f64> {
    let terms = qs.iter().map(|q| b_term_line(q, config)).collect::<Result<Vec<_>>>()?;
    Ok(canonical_sum(terms))
}

pub fn b_constant_circle(qs: &[Potential], config: &BConfig) -> Result<f64> {
    let terms = qs.iter().map(|q| b_term_circle(q, config)).collect::<Result<Vec<_>>>()?;
    Ok(canonical_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{semicircle, semicircle_cdf, uniform_circle};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn weighted_energy_examples() {
        let g = semicircle(3.0, 2000).unwrap();
        let v = weighted_energy(&g, &Potential::quadratic()).unwrap();
        assert!((v - 0.75).abs() < 2e-3, "{v}");
        let u = uniform_circle(512);
        assert!(weighted_energy(&u, &Potential::zero_circle()).unwrap().abs() < 1e-3);
        let zero = Potential::line(vec![0.0], 0.0);
        assert_eq!(weighted_energy(&g, &zero).unwrap(), -g.log_energy().value);
        assert!(weighted_energy(&u, &Potential::quadratic()).is_err());
    }

    #[test]
    fn semicircle_is_recovered() {
        let eq = solve_detailed(&Potential::quadratic(), 3.0, 1000, &SolverConfig::default()).unwrap();
        let l1 = eq.measure.l1_to_cdf(semicircle_cdf);
        assert!(l1 <= 2e-2, "L1 {l1}");
        let r = euler_lagrange_residual(&eq.measure, &Potential::quadratic()).unwrap();
        assert!(r.on_support <= 5e-2 && r.off_support <= 5e-2, "{r:?}");
        // Grid minimiser beats the discretised exact answer.
        let exact = weighted_energy(&semicircle(3.0, 1000).unwrap(), &Potential::quadratic()).unwrap();
        assert!(eq.weighted_energy <= exact + 1e-12);
    }

    #[test]
    fn quadratic_scaling() {
        let mu = solve_equilibrium(&Potential::scaled_quadratic(1.0), 3.0, 1000).unwrap();
        let l1 = mu.l1_to_cdf(|x| semicircle_cdf(x * 2f64.sqrt()));
        assert!(l1 <= 2e-2, "L1 {l1}");
    }

    #[test]
    fn uniform_on_the_circle() {
        let mu = solve_equilibrium(&Potential::zero_circle(), 0.0, 400).unwrap();
        let l1 = mu.l1_to_cdf(|t| t / TAU);
        assert!(l1 <= 1e-2, "L1 {l1}");
        let r = euler_lagrange_residual(&uniform_circle(400), &Potential::zero_circle()).unwrap();
        assert!(r.on_support <= 1e-2 && r.off_support <= 1e-2);
    }

    #[test]
    fn shifted_semicircle_fails_certificate() {
        let shifted = semicircle(3.0, 1000).unwrap().translated(0.5).unwrap();
        let r = euler_lagrange_residual(&shifted, &Potential::quadratic()).unwrap();
        assert!(r.on_support > 0.5, "{r:?}");
    }

    #[test]
    fn small_window_is_reported() {
        let err = solve_equilibrium(&Potential::quadratic(), 1.5, 300).unwrap_err();
        assert!(matches!(err, Error::EnlargeWindow { .. }), "{err}");
    }

    #[test]
    fn ungapped_circle_solution() {
        // Q = a cos t with |a| <= 1: density (1 - a cos t) / 2 pi, B = a^2 / 4.
        let a = 0.4;
        let q = Potential::cosine(a);
        let mu = solve_equilibrium(&q, 0.0, 600).unwrap();
        let cdf = |t: f64| (t - a * t.sin()) / TAU;
        assert!(mu.l1_to_cdf(cdf) < 1e-2);
        let b = b_constant_circle(&[q], &BConfig { radius: 0.0, grid: 600 }).unwrap();
        assert!((b - a * a / 4.0).abs() < 1e-3, "{b}");
    }

    #[test]
    fn gapped_circle_constant() {
        // For a > 1 the support is an arc and B = a - 3/4 - log(a) / 2.
        let a: f64 = 2.0;
        let b = b_constant_circle(&[Potential::cosine(a)], &BConfig { radius: 0.0, grid: 1000 }).unwrap();
        let exact = a - 0.75 - 0.5 * a.ln();
        assert!((b - exact).abs() < 2e-3, "{b} vs {exact}");
    }

    #[test]
    fn b_constant_examples() {
        let cfg = BConfig::default();
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let one = b_constant_line(&[Potential::quadratic()], &cfg).unwrap();
        assert!((one - half_log_2pi).abs() < 2e-3, "{one}");
        let three = b_constant_line(&vec![Potential::quadratic(); 3], &cfg).unwrap();
        assert!((three - 3.0 * half_log_2pi).abs() < 6e-3);
        // Q = x^2: B = 1/2 log(pi) - 1/4 + ... computed from the scaling law.
        let x2 = b_constant_line(&[Potential::scaled_quadratic(1.0)], &cfg).unwrap();
        assert!((x2 - (half_log_2pi - 0.5 * 2f64.ln())).abs() < 2e-3, "{x2}");
        assert!(b_constant_circle(&vec![Potential::zero_circle(); 2], &cfg).unwrap().abs() < 1e-3);
        assert!(b_constant_line(&[Potential::zero_circle()], &cfg).is_err());
    }

    #[test]
    fn b_constant_is_additive_and_order_free() {
        let cfg = BConfig { radius: 3.0, grid: 400 };
        let qs = vec![Potential::quadratic(), Potential::scaled_quadratic(1.0), Potential::quartic()];
        let total = b_constant_line(&qs, &cfg).unwrap();
        let parts: f64 = qs.iter().map(|q| b_constant_line(std::slice::from_ref(q), &cfg).unwrap()).sum();
        assert!((total - parts).abs() < 1e-12);
        let mut rev = qs.clone();
        rev.reverse();
        assert_eq!(b_constant_line(&rev, &cfg).unwrap(), total);
        let rotated = vec![qs[1].clone(), qs[2].clone(), qs[0].clone()];
        assert_eq!(b_constant_line(&rotated, &cfg).unwrap(), total);
    }

    #[test]
    fn solver_beats_random_measures() {
        let n = 200;
        let pots = [
            Potential::quadratic(),
            Potential::scaled_quadratic(1.0),
            Potential::quartic(),
            Potential::zero_circle(),
            Potential::cosine(0.4),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in &pots {
            let eq = solve_detailed(q, 3.0, n, &SolverConfig::default()).unwrap();
            let r = euler_lagrange_residual(&eq.measure, q).unwrap();
            assert!(r.on_support <= 5e-2 && r.off_support <= 5e-2, "{r:?}");
            let best = eq.weighted_energy;
            for _ in 0..100 {
                // Random mixtures of the optimum and noise on the same grid.
                let t: f64 = rng.random();
                let raw: Vec<f64> =
                    eq.measure.weights().iter().map(|w| (1.0 - t) * w + t * rng.random::<f64>() / n as f64).collect();
                let mu =
                    GridMeasure::from_unnormalized(eq.measure.carrier(), eq.measure.nodes().to_vec(), raw).unwrap();
                assert!(best <= weighted_energy(&mu, q).unwrap() + 1e-6);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn simplex_projection_is_a_probability_vector(v in proptest::collection::vec(-3.0f64..3.0, 1..40)) {
            let mut v = v;
            project_simplex(&mut v);
            prop_assert!(v.iter().all(|x| *x >= 0.0));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
