//! Wasserstein distances: exact on the line, linear programming on the
//! circle, Gaussian closed forms, empirical couplings of matrix samples,
//! and coupling-cost upper bounds for random matrix distributions.

mod assignment;
mod simplex;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, GridMeasure};
use crate::random_matrices::{gue_spectral_law, retract, unitary_eigenangles, MatrixSample};

pub use assignment::{hungarian, sinkhorn, CostMatrix, EntropicBounds};
pub use simplex::{solve_transport, TransportPlan};

/// Largest sample count solved by exact assignment.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 512;

/// Piecewise-linear quantile function of a grid measure: on
/// `[t[k], t[k+1]]` it runs from `lo[k]` to `hi[k]`.
struct QuantilePieces {
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl QuantilePieces {
    fn of(mu: &GridMeasure) -> Self {
        let mut t = vec![0.0];
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        let mut acc = 0.0;
        for (c, w) in mu.cells().iter().zip(mu.weights()) {
            if *w > 0.0 {
                acc += w;
                t.push(acc);
                lo.push(c.lo);
                hi.push(c.hi);
            }
        }
        *t.last_mut().expect("nonempty") = 1.0;
        QuantilePieces { t, lo, hi }
    }

    fn eval(&self, k: usize, s: f64) -> f64 {
        let (a, b) = (self.t[k], self.t[k + 1]);
        if b <= a {
            return self.lo[k];
        }
        self.lo[k] + (self.hi[k] - self.lo[k]) * ((s - a) / (b - a))
    }
}

/// `int_0^L |d0 + (d1 - d0) s / L|^p ds`.
fn integral_abs_linear(d0: f64, d1: f64, len: f64, p: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if d0 * d1 < 0.0 {
        let root = len * d0.abs() / (d0.abs() + d1.abs());
        return integral_abs_linear(d0, 0.0, root, p) + integral_abs_linear(0.0, d1, len - root, p);
    }
    let (a, b) = (d0.abs(), d1.abs());
    if (a - b).abs() <= 1e-15 * a.max(b) {
        return len * (0.5 * (a + b)).powf(p);
    }
    len * (b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * (b - a))
}

/// `W_p` between two measures on the line, `(int_0^1 |F^-1 - G^-1|^p)^(1/p)`,
/// with the piecewise-linear quantiles of cell-uniform densities.
pub fn wasserstein_1d(mu: &GridMeasure, nu: &GridMeasure, p: f64) -> Result<f64> {
    if mu.carrier().is_circle() || nu.carrier().is_circle() {
        return Err(Error::CarrierMismatch("wasserstein_1d needs interval measures".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("W_p needs finite p >= 1, got {p}")));
    }
    let (a, b) = (QuantilePieces::of(mu), QuantilePieces::of(nu));
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    let mut total = 0.0;
    while i + 1 < a.t.len() && j + 1 < b.t.len() {
        let e = a.t[i + 1].min(b.t[j + 1]);
        if e > s {
            let d0 = a.eval(i, s) - b.eval(j, s);
            let d1 = a.eval(i, e) - b.eval(j, e);
            total += integral_abs_linear(d0, d1, e - s, p);
            s = e;
        }
        if a.t[i + 1] <= e {
            i += 1;
        }
        if b.t[j + 1] <= e {
            j += 1;
        }
    }
    Ok(total.powf(1.0 / p))
}

/// Squared chordal distance `|e^{is} - e^{it}|^2`.
pub fn chordal_cost(s: f64, t: f64) -> f64 {
    2.0 * (1.0 - (s - t).cos())
}

fn circle_atoms(mu: &GridMeasure) -> Result<(Vec<f64>, Vec<f64>)> {
    if !mu.carrier().is_circle() {
        return Err(Error::CarrierMismatch("chordal transport needs circle measures".into()));
    }
    Ok(mu.support().map(|k| (mu.nodes()[k], mu.weights()[k])).unzip())
}

/// Exact quadratic chordal Wasserstein distance between the atoms of two
/// circle measures, by the transportation LP.
pub fn wasserstein_circle_chordal(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    let (x, a) = circle_atoms(mu)?;
    let (y, b) = circle_atoms(nu)?;
    let n = y.len();
    let cost: Vec<f64> = (0..x.len() * n).map(|k| chordal_cost(x[k / n], y[k % n])).collect();
    let plan = solve_transport(&a, &b, cost)?;
    Ok(plan.cost.max(0.0).sqrt())
}

/// Upper bound from the cyclic monotone couplings: `nu`'s mass is
/// re-cut at every one of its own cumulative levels and matched in
/// order against `mu`.
pub fn circle_rotation_scan(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    let (x, a) = circle_atoms(mu)?;
    let (y, b) = circle_atoms(nu)?;
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    let b: Vec<f64> = b.iter().map(|w| w * ta / tb).collect();
    let m = y.len();
    let mut best = f64::INFINITY;
    for start in 0..m {
        let (mut i, mut j) = (0, start);
        let (mut ra, mut rb) = (a[0], b[start]);
        let mut cost = 0.0;
        let mut steps = 0;
        while i < x.len() && steps < 2 * (x.len() + m) {
            let f = ra.min(rb);
            cost += f * chordal_cost(x[i], y[j]);
            ra -= f;
            rb -= f;
            steps += 1;
            if ra <= 1e-15 {
                i += 1;
                if i < x.len() {
                    ra = a[i];
                }
            }
            if rb <= 1e-15 {
                j = (j + 1) % m;
                rb = b[j];
            }
        }
        best = best.min(cost);
    }
    Ok(best.max(0.0).sqrt())
}

fn check_psd(c: &DMatrix<f64>, name: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !c.is_square() {
        return Err(Error::invalid(format!("{name} covariance must be square")));
    }
    let scale = c.amax().max(1.0);
    if (c - c.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid(format!("{name} covariance is not symmetric")));
    }
    let eig = c.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-10 * scale {
        return Err(Error::invalid(format!(
            "{name} covariance is not positive semidefinite (eigenvalue {:e})",
            eig.eigenvalues.min()
        )));
    }
    Ok(eig)
}

fn psd_sqrt(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn check_dims(m1: &DVector<f64>, c1: &DMatrix<f64>, m2: &DVector<f64>, c2: &DMatrix<f64>) -> Result<()> {
    let k = m1.len();
    if m2.len() != k || c1.nrows() != k || c2.nrows() != k {
        return Err(Error::invalid("means and covariances must share one dimension"));
    }
    Ok(())
}

/// `W_2` between `N(m1, c1)` and `N(m2, c2)`.
pub fn gaussian_w2(m1: &DVector<f64>, c1: &DMatrix<f64>, m2: &DVector<f64>, c2: &DMatrix<f64>) -> Result<f64> {
    check_dims(m1, c1, m2, c2)?;
    let e1 = check_psd(c1, "first")?;
    check_psd(c2, "second")?;
    let r1 = psd_sqrt(&e1);
    let mut middle = &r1 * c2 * &r1;
    middle = 0.5 * (&middle + middle.transpose());
    let cross = psd_sqrt(&middle.symmetric_eigen());
    let bures = c1.trace() + c2.trace() - 2.0 * cross.trace();
    Ok(((m1 - m2).norm_squared() + bures.max(0.0)).sqrt())
}

/// `S(N(m1, c1) | N(m2, c2))` in nats; infinite when `c1` is singular.
pub fn gaussian_relative_entropy(
    m1: &DVector<f64>,
    c1: &DMatrix<f64>,
    m2: &DVector<f64>,
    c2: &DMatrix<f64>,
) -> Result<f64> {
    check_dims(m1, c1, m2, c2)?;
    let e1 = check_psd(c1, "first")?;
    let e2 = check_psd(c2, "second")?;
    let scale = c2.amax().max(1.0);
    if e2.eigenvalues.min() <= 1e-14 * scale {
        return Err(Error::invalid("reference covariance must be positive definite"));
    }
    if e1.eigenvalues.min() <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let chol = c2.clone().cholesky().ok_or_else(|| Error::Numerical("Cholesky factorisation failed".into()))?;
    let k = m1.len() as f64;
    let d = m2 - m1;
    let trace_term = chol.solve(c1).trace();
    let quad = d.dot(&chol.solve(&d));
    let logdet2: f64 = e2.eigenvalues.iter().map(|l| l.ln()).sum();
    let logdet1: f64 = e1.eigenvalues.iter().map(|l| l.ln()).sum();
    Ok(0.5 * (trace_term + quad - k + logdet2 - logdet1))
}

/// How an empirical `W_2` was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMethod {
    ExactAssignment,
    Entropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalW2 {
    pub value: f64,
    /// A lower bound; equal to `value` for exact assignment.
    pub lower: f64,
    pub method: CouplingMethod,
}

impl EmpiricalW2 {
    pub fn gap(&self) -> f64 {
        self.value - self.lower
    }
}

/// `W_2` of two uniform empirical measures from their squared-cost
/// matrix.
pub fn empirical_w2_costs(c: &CostMatrix) -> Result<EmpiricalW2> {
    if c.n == 0 {
        return Err(Error::invalid("empty samples"));
    }
    if c.n <= EXACT_ASSIGNMENT_LIMIT {
        let (v, _) = hungarian(c);
        let v = v.max(0.0).sqrt();
        return Ok(EmpiricalW2 { value: v, lower: v, method: CouplingMethod::ExactAssignment });
    }
    let eps = 1e-3 * c.median().max(f64::MIN_POSITIVE);
    let b = sinkhorn(c, eps, 300)?;
    Ok(EmpiricalW2 { value: b.upper.max(0.0).sqrt(), lower: b.lower.max(0.0).sqrt(), method: CouplingMethod::Entropic })
}

pub fn empirical_w2_line(xs: &EmpiricalMeasure, ys: &EmpiricalMeasure) -> Result<EmpiricalW2> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("sample counts differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.carrier().is_circle() || ys.carrier().is_circle() {
        return Err(Error::CarrierMismatch("empirical_w2_line needs interval samples".into()));
    }
    let (x, y) = (xs.atoms(), ys.atoms());
    empirical_w2_costs(&CostMatrix::from_fn(x.len(), |i, j| (x[i] - y[j]).powi(2)))
}

/// Ground distance between matrix tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundCost {
    #[default]
    HilbertSchmidt,
    /// Riemannian distance `||log(U* V)||_HS` on the unitary group.
    Geodesic,
}

/// `(1/N) sum_i d(A_i, B_i)^2` for tuples of `N x N` matrices.
pub fn tuple_cost(a: &[MatrixSample], b: &[MatrixSample], ground: GroundCost) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("tuples have different lengths"));
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.dim() != y.dim() {
            return Err(Error::invalid("dimension mismatch"));
        }
        total += match ground {
            GroundCost::HilbertSchmidt => x.hs_distance(y)?.powi(2),
            GroundCost::Geodesic => geodesic_distance_sq(x, y)?,
        };
    }
    Ok(total / a.first().map_or(1, |x| x.dim()) as f64)
}

fn geodesic_distance_sq(x: &MatrixSample, y: &MatrixSample) -> Result<f64> {
    if !x.kind().is_unitary() || !y.kind().is_unitary() {
        return Err(Error::invalid("geodesic cost needs unitary samples"));
    }
    let w = x.to_dense().adjoint() * y.to_dense();
    Ok(unitary_eigenangles(&w)?
        .iter()
        .map(|t| {
            let a = if *t > PI { t - TAU } else { *t };
            a * a
        })
        .sum())
}

/// `W_2` between two equal-size lists of matrix tuples under the
/// normalised cost of [`tuple_cost`].
pub fn empirical_w2_matrices(
    xs: &[Vec<MatrixSample>],
    ys: &[Vec<MatrixSample>],
    ground: GroundCost,
) -> Result<EmpiricalW2> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("sample counts differ: {} vs {}", xs.len(), ys.len())));
    }
    let n = xs.len();
    let data =
        (0..n * n).into_par_iter().map(|k| tuple_cost(&xs[k / n], &ys[k % n], ground)).collect::<Result<Vec<_>>>()?;
    empirical_w2_costs(&CostMatrix { n, data })
}

/// Monte-Carlo value of an explicit coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBound {
    /// `sqrt(mean (1/N) sum_i ||r_R(A_i) - r_R(B_i)||^2)`.
    pub value: f64,
    /// Same without retraction.
    pub unretracted: f64,
    /// Standard error of `value`, by the delta method.
    pub std_error: f64,
    pub count: usize,
}

/// Upper bound on the `W_2` distance between the laws of `A` and `B`
/// from `count` coupled draws `sampler(t) = (A, B)`. Self-adjoint letters
/// are retracted to `[-R, R]` when `radius` is given; unitary letters are
/// used as they are.
pub fn coupling_cost_bound<F>(
    sampler: F,
    count: usize,
    radius: Option<f64>,
    ground: GroundCost,
) -> Result<CouplingBound>
where
    F: Fn(usize) -> Result<(Vec<MatrixSample>, Vec<MatrixSample>)> + Sync,
{
    if count == 0 {
        return Err(Error::invalid("need at least one coupled draw"));
    }
    let rows = (0..count)
        .into_par_iter()
        .map(|t| {
            let (a, b) = sampler(t)?;
            let raw = tuple_cost(&a, &b, ground)?;
            let retracted = match radius {
                Some(r) => {
                    let cut = |v: &[MatrixSample]| -> Result<Vec<MatrixSample>> {
                        v.iter().map(|s| if s.kind().is_unitary() { Ok(s.clone()) } else { retract(s, r) }).collect()
                    };
                    tuple_cost(&cut(&a)?, &cut(&b)?, ground)?
                }
                None => raw,
            };
            Ok((retracted, raw))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = count as f64;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / k;
    let raw = rows.iter().map(|r| r.1).sum::<f64>() / k;
    let var = if count > 1 { rows.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    let value = mean.max(0.0).sqrt();
    let std_error = if value > 0.0 { (var / k).sqrt() / (2.0 * value) } else { 0.0 };
    Ok(CouplingBound { value, unretracted: raw.max(0.0).sqrt(), std_error, count })
}

/// Gaussian matrix ensemble `scale * X + center * I`, `X` standard GUE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMatrixLaw {
    pub center: f64,
    pub scale: f64,
}

/// Both sides of `W_2(mean spectral laws) <= N^{-1/2} W_2(matrix laws)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub dim: usize,
    pub spectral: f64,
    pub matrix: f64,
    /// `matrix - spectral`.
    pub slack: f64,
}

/// The matrix laws live on `N^2` real coordinates orthonormal for the
/// Hilbert–Schmidt inner product (diagonal entries, `sqrt 2` times real
/// and imaginary parts above the diagonal), where they are Gaussian with
/// covariance `scale^2 / N` times the identity.
pub fn gaussian_chain_check(
    dim: usize,
    first: GaussianMatrixLaw,
    second: GaussianMatrixLaw,
    radius: f64,
    grid: usize,
) -> Result<ChainCheck> {
    if dim == 0 {
        return Err(Error::invalid("matrix size must be positive"));
    }
    let k = dim * dim;
    let mean = |law: &GaussianMatrixLaw| DVector::from_fn(k, |c, _| if c < dim { law.center } else { 0.0 });
    let cov = |law: &GaussianMatrixLaw| DMatrix::from_diagonal_element(k, k, law.scale * law.scale / dim as f64);
    let matrix = gaussian_w2(&mean(&first), &cov(&first), &mean(&second), &cov(&second))? / (dim as f64).sqrt();
    let mu = gue_spectral_law(dim, first.center, first.scale, radius, grid)?;
    let nu = gue_spectral_law(dim, second.center, second.scale, radius, grid)?;
    let spectral = wasserstein_1d(&mu, &nu, 2.0)?;
    Ok(ChainCheck { dim, spectral, matrix, slack: matrix - spectral })
}
