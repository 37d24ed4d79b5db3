//! Transportation-cost inequalities: both sides, their error bars and a
//! verdict for each computable case.
//!
//! Free inequalities are evaluated on a fine grid and again on the grid
//! with cells merged in pairs; the difference of the two evaluations is
//! the discretisation error attached to each side.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::equilibrium::{solve_on_grid, weighted_energy, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::{
    arcsine, circle_grid, interval_grid, semicircle_on, trigonometric_circle, uniform_interval, Carrier, GridMeasure,
    FREE_ENTROPY_OFFSET,
};
use crate::potentials::Potential;
use crate::random_matrices::{chain_rng, gue_matrix, Entries, MatrixKind, MatrixSample};
use crate::transport::{coupling_cost_bound, wasserstein_1d, wasserstein_circle_chordal, GroundCost};

/// Absolute tolerance added to every combined error bar.
pub const ABS_TOL: f64 = 1e-6;
/// Window and cell count of the built-in line families.
pub const LINE_RADIUS: f64 = 3.0;
pub const LINE_GRID: usize = 1200;
/// Cell count of the built-in circle families.
pub const CIRCLE_GRID: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsAtEquality,
    ViolatedWithinError,
    Violated,
    /// Only an upper bound on the left side was available and it exceeds
    /// the right side: nothing can be concluded.
    InconclusiveUpperBound,
}

impl Verdict {
    pub fn classify(slack: f64, combined_error: f64) -> Verdict {
        if slack.abs() <= combined_error {
            Verdict::HoldsAtEquality
        } else if slack > 0.0 {
            Verdict::Holds
        } else if slack < -(combined_error + ABS_TOL) {
            Verdict::Violated
        } else {
            Verdict::ViolatedWithinError
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Verdict::Holds | Verdict::HoldsAtEquality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParameters {
    pub rho: f64,
    pub radius: Option<f64>,
    pub dim: Option<usize>,
    pub potentials: Vec<String>,
    pub measure: String,
    /// Intermediate quantities (entropies, constants, sample counts).
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TCIReport {
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
    /// `lhs_error + rhs_error + ABS_TOL`.
    pub combined_error: f64,
    /// The quantity under the square root on the right.
    pub radicand: f64,
    pub parameters: ReportParameters,
    pub verdict: Verdict,
}

impl TCIReport {
    fn new(
        inequality: &str,
        (lhs, lhs_error): (f64, f64),
        (rhs, rhs_error): (f64, f64),
        radicand: f64,
        parameters: ReportParameters,
    ) -> Self {
        let slack = rhs - lhs;
        let combined_error = lhs_error + rhs_error + ABS_TOL;
        TCIReport {
            inequality: inequality.into(),
            lhs,
            rhs,
            slack,
            lhs_error,
            rhs_error,
            combined_error,
            radicand,
            verdict: Verdict::classify(slack, combined_error),
            parameters,
        }
    }
}

fn check_radicand(radicand: f64, tolerance: f64, what: &str) -> Result<f64> {
    if radicand < -tolerance {
        return Err(Error::Numerical(format!(
            "{what}: negative right-hand radicand {radicand:.3e}; the constant or the equilibrium solve is inconsistent"
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Entrywise-isotropic Gaussian law on `N x N` self-adjoint matrices:
/// mean `mean`, each of the `N^2` Hilbert–Schmidt coordinates with
/// variance `variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGaussian {
    pub mean: DMatrix<Complex64>,
    pub variance: f64,
}

impl MatrixGaussian {
    /// The Gibbs law `exp(-N Tr Q(A))` of a quadratic `Q`.
    pub fn gibbs(q: &Potential, n: usize) -> Result<Self> {
        let (a, b, _) =
            q.as_quadratic().ok_or_else(|| Error::invalid(format!("{} is not a convex quadratic", q.label())))?;
        let m = Complex64::new(-b / (2.0 * a), 0.0);
        Ok(MatrixGaussian { mean: DMatrix::from_diagonal_element(n, n, m), variance: 1.0 / (2.0 * a * n as f64) })
    }

    pub fn dim(&self) -> usize {
        self.mean.nrows()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.mean.ncols() != n {
            return Err(Error::invalid("mean must be a nonempty square matrix"));
        }
        if (&self.mean - self.mean.adjoint()).iter().any(|z| z.norm() > 1e-12) {
            return Err(Error::invalid("mean must be self-adjoint"));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::invalid("variance must be positive and finite"));
        }
        Ok(())
    }
}

/// `W_2(lambda, lambda_N(Q)) <= sqrt(2 / (rho N) S(lambda | lambda_N(Q)))`
/// for product Gaussian laws against quadratic potentials.
pub fn verify_matrix_tci(qs: &[Potential], n: usize, lambda: &[MatrixGaussian], rho: f64) -> Result<TCIReport> {
    if qs.is_empty() || qs.len() != lambda.len() {
        return Err(Error::invalid("need one Gaussian letter per potential"));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    let d = (n * n) as f64;
    let mut w2 = 0.0;
    let mut kl = 0.0;
    for (q, l) in qs.iter().zip(lambda) {
        l.validate()?;
        if l.dim() != n {
            return Err(Error::invalid(format!("letter has size {} but N = {n}", l.dim())));
        }
        let g = MatrixGaussian::gibbs(q, n)?;
        let a = q.as_quadratic().map(|t| t.0).unwrap_or(0.0);
        if 2.0 * a < rho - 1e-12 {
            return Err(Error::invalid(format!("{} is not {rho}-convex", q.label())));
        }
        let shift: f64 = (&l.mean - &g.mean).iter().map(|z| z.norm_sqr()).sum();
        let r = l.variance / g.variance;
        w2 += shift + d * (l.variance.sqrt() - g.variance.sqrt()).powi(2);
        kl += 0.5 * (d * (r - 1.0 - r.ln()) + shift / g.variance);
    }
    let radicand = 2.0 / (rho * n as f64) * kl;
    let rhs = check_radicand(radicand, 0.0, "matrix TCI")?;
    let mut values = BTreeMap::new();
    values.insert("relative_entropy".into(), kl);
    let params = ReportParameters {
        rho,
        radius: None,
        dim: Some(n),
        potentials: qs.iter().map(Potential::label).collect(),
        measure: format!("gaussian[{}]", lambda.len()),
        values,
    };
    Ok(TCIReport::new("matrix_gaussian", (w2.sqrt(), 0.0), (rhs, 0.0), radicand, params))
}

/// Equilibrium measure of `q` on one grid and its weighted energy.
#[derive(Debug, Clone)]
struct GridLevel {
    nodes: Vec<f64>,
    equilibrium: GridMeasure,
    energy: f64,
}

impl GridLevel {
    fn solve(q: &Potential, carrier: Carrier, nodes: Vec<f64>) -> Result<Self> {
        let eq = solve_on_grid(q, carrier, nodes.clone(), &SolverConfig::default())?;
        Ok(GridLevel { nodes, equilibrium: eq.measure, energy: eq.weighted_energy })
    }
}

/// Free TCI reference data for one potential on one grid: the equilibrium
/// measure and `B_Q` on the grid and on its pairwise-merged coarsening.
#[derive(Debug, Clone)]
pub struct FreeReference {
    q: Potential,
    rho: f64,
    carrier: Carrier,
    fine: GridLevel,
    coarse: GridLevel,
}

impl FreeReference {
    pub fn new(q: &Potential, rho: f64, carrier: Carrier, nodes: Vec<f64>) -> Result<Self> {
        if !q.matches(&carrier) {
            return Err(Error::CarrierMismatch(format!("{} potential on a {} grid", q.carrier_name(), carrier.name())));
        }
        let template = GridMeasure::new(carrier, nodes.clone(), vec![1.0 / nodes.len() as f64; nodes.len()])?;
        if carrier.is_circle() {
            if !(rho > -0.5) {
                return Err(Error::invalid("circle inequality needs rho > -1/2"));
            }
        } else if !(rho > 0.0) {
            return Err(Error::invalid("line inequality needs rho > 0"));
        }
        let worst = template.nodes().iter().map(|x| q.second_derivative(*x)).fold(f64::INFINITY, f64::min);
        if worst < rho - 1e-9 {
            return Err(Error::invalid(format!(
                "{} is not {rho}-convex (second derivative reaches {worst})",
                q.label()
            )));
        }
        let coarse_nodes = template.coarsened()?.nodes().to_vec();
        let (fine, coarse) =
            rayon::join(|| GridLevel::solve(q, carrier, nodes), || GridLevel::solve(q, carrier, coarse_nodes));
        Ok(FreeReference { q: q.clone(), rho, carrier, fine: fine?, coarse: coarse? })
    }

    /// Built-in grid for the potential's carrier.
    pub fn standard(q: &Potential, rho: f64) -> Result<Self> {
        if q.is_circle() {
            FreeReference::new(q, rho, Carrier::Circle, circle_grid(CIRCLE_GRID))
        } else {
            FreeReference::new(q, rho, Carrier::Interval { radius: LINE_RADIUS }, interval_grid(LINE_RADIUS, LINE_GRID))
        }
    }

    pub fn equilibrium(&self) -> &GridMeasure {
        &self.fine.equilibrium
    }

    /// `B_Q` on the fine grid.
    pub fn b_constant(&self) -> f64 {
        -self.fine.energy + self.offset()
    }

    fn offset(&self) -> f64 {
        if self.carrier.is_circle() {
            0.0
        } else {
            FREE_ENTROPY_OFFSET
        }
    }

    fn factor(&self) -> f64 {
        if self.carrier.is_circle() {
            4.0 / (1.0 + 2.0 * self.rho)
        } else {
            2.0 / self.rho
        }
    }

    /// `-chi(mu) + mu(Q)` (line) or `-Sigma(mu) + mu(Q)` (circle).
    pub fn objective(&self, mu: &GridMeasure) -> Result<f64> {
        Ok(weighted_energy(mu, &self.q)? - self.offset())
    }

    fn sides(&self, mu: &GridMeasure, level: &GridLevel) -> Result<(f64, f64, f64)> {
        let lhs = if self.carrier.is_circle() {
            wasserstein_circle_chordal(mu, &level.equilibrium)?
        } else {
            wasserstein_1d(mu, &level.equilibrium, 2.0)?
        };
        let radicand = self.factor() * (weighted_energy(mu, &self.q)? - level.energy);
        let rhs = check_radicand(radicand, ABS_TOL, "free TCI")?;
        Ok((lhs, rhs, radicand))
    }

    /// Both sides for `mu`, which must live on the reference grid.
    pub fn check(&self, mu: &GridMeasure, id: &str) -> Result<TCIReport> {
        if mu.carrier() != self.carrier || mu.nodes() != self.fine.nodes.as_slice() {
            return Err(Error::invalid("measure is not on the reference grid"));
        }
        let coarse = mu.coarsened()?;
        if coarse.nodes() != self.coarse.nodes.as_slice() {
            return Err(Error::invalid("coarsened measure does not match the reference grid"));
        }
        let (lhs, rhs, radicand) = self.sides(mu, &self.fine)?;
        let (lhs_c, rhs_c, _) = self.sides(&coarse, &self.coarse)?;
        let entropy = mu.log_energy().value + self.offset();
        let mut values = BTreeMap::new();
        values.insert(if self.carrier.is_circle() { "sigma" } else { "chi" }.into(), entropy);
        values.insert("b_constant".into(), self.b_constant());
        values.insert("potential_mean".into(), self.q.integrate(mu)?);
        let params = ReportParameters {
            rho: self.rho,
            radius: match self.carrier {
                Carrier::Interval { radius } => Some(radius),
                Carrier::Circle => None,
            },
            dim: None,
            potentials: vec![self.q.label()],
            measure: id.into(),
            values,
        };
        let name = if self.carrier.is_circle() { "free_circle" } else { "free_line" };
        Ok(TCIReport::new(name, (lhs, (lhs - lhs_c).abs()), (rhs, (rhs - rhs_c).abs()), radicand, params))
    }

    /// Checks several measures in parallel, order preserved.
    pub fn check_all(&self, family: &[(String, GridMeasure)]) -> Result<Vec<TCIReport>> {
        family.par_iter().map(|(id, mu)| self.check(mu, id)).collect()
    }
}

/// `W_2(mu, mu_Q) <= sqrt(2/rho (-chi(mu) + mu(Q) + B_Q))` on the line.
pub fn verify_free_tci_line(mu: &GridMeasure, q: &Potential, rho: f64) -> Result<TCIReport> {
    if mu.carrier().is_circle() || q.is_circle() {
        return Err(Error::CarrierMismatch("line inequality needs a line measure and potential".into()));
    }
    FreeReference::new(q, rho, mu.carrier(), mu.nodes().to_vec())?.check(mu, "measure")
}

/// `W_2(mu, mu_Q) <= sqrt(4/(1 + 2 rho) (-Sigma(mu) + mu(Q) + B_Q))` on the
/// circle, with the chordal ground cost.
pub fn verify_free_tci_circle(mu: &GridMeasure, q: &Potential, rho: f64) -> Result<TCIReport> {
    if !mu.carrier().is_circle() || !q.is_circle() {
        return Err(Error::CarrierMismatch("circle inequality needs a circle measure and potential".into()));
    }
    FreeReference::new(q, rho, Carrier::Circle, mu.nodes().to_vec())?.check(mu, "measure")
}

/// Built-in test measure families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ShiftedSemicircle,
    ScaledSemicircle,
    Uniform,
    Arcsine,
    /// Union of the four line families.
    Line,
    Trigonometric,
}

impl Family {
    pub fn is_circle(self) -> bool {
        matches!(self, Family::Trigonometric)
    }

    pub fn measures(self) -> Result<Vec<(String, GridMeasure)>> {
        let r = LINE_RADIUS;
        let grid = || interval_grid(r, LINE_GRID);
        let steps = |lo: f64, hi: f64, k: usize| (0..k).map(move |i| lo + (hi - lo) * i as f64 / (k - 1) as f64);
        Ok(match self {
            Family::ShiftedSemicircle => steps(-1.0, 1.0, 9)
                .map(|c| Ok((format!("semicircle(c={c})"), semicircle_on(r, grid(), c, 1.0)?)))
                .collect::<Result<_>>()?,
            Family::ScaledSemicircle => steps(0.5, 1.5, 9)
                .map(|s| Ok((format!("semicircle(s={s})"), semicircle_on(r, grid(), 0.0, s)?)))
                .collect::<Result<_>>()?,
            Family::Uniform => [(-1.0, 1.0), (-2.0, 1.0), (-0.5, 2.5)]
                .into_iter()
                .map(|(a, b)| Ok((format!("uniform[{a},{b}]"), uniform_interval(r, LINE_GRID, a, b)?)))
                .collect::<Result<_>>()?,
            Family::Arcsine => [2.0, 1.0]
                .into_iter()
                .map(|a| Ok((format!("arcsine[-{a},{a}]"), arcsine(r, LINE_GRID, a)?)))
                .collect::<Result<_>>()?,
            Family::Line => {
                let mut all = Vec::new();
                for f in [Family::ShiftedSemicircle, Family::ScaledSemicircle, Family::Uniform, Family::Arcsine] {
                    all.extend(f.measures()?);
                }
                all
            }
            Family::Trigonometric => {
                let cases: [(&str, &[f64], &[f64]); 12] = [
                    ("1+0.25cos(t)", &[0.25], &[]),
                    ("1+0.5cos(t)", &[0.5], &[]),
                    ("1+0.75cos(t)", &[0.75], &[]),
                    ("1+cos(t)", &[1.0], &[]),
                    ("1+0.5cos(2t)", &[0.0, 0.5], &[]),
                    ("1+cos(2t)", &[0.0, 1.0], &[]),
                    ("1+0.8sin(3t)", &[], &[0.0, 0.0, 0.8]),
                    ("1+0.9cos(4t)", &[0.0, 0.0, 0.0, 0.9], &[]),
                    ("1+0.5cos(t)+0.3sin(2t)", &[0.5], &[0.0, 0.3]),
                    ("1+0.4cos(t)+0.4cos(2t)", &[0.4, 0.4], &[]),
                    ("1+0.6sin(t)", &[], &[0.6]),
                    ("1+0.3cos(t)-0.3sin(t)+0.3cos(3t)", &[0.3, 0.0, 0.3], &[-0.3]),
                ];
                cases
                    .into_iter()
                    .map(|(id, a, b)| Ok((id.to_string(), trigonometric_circle(CIRCLE_GRID, a, b)?)))
                    .collect::<Result<_>>()?
            }
        })
    }
}

/// Runs a family against `q` (line families) or against `q` on the circle.
pub fn free_tci_suite(family: Family, q: &Potential, rho: f64) -> Result<Vec<TCIReport>> {
    if family.is_circle() != q.is_circle() {
        return Err(Error::CarrierMismatch(format!("{} potential for a {family:?} family", q.carrier_name())));
    }
    FreeReference::standard(q, rho)?.check_all(&family.measures()?)
}

/// `(1 - t) mu + t nu` on a common grid.
pub fn mixture(mu: &GridMeasure, nu: &GridMeasure, t: f64) -> Result<GridMeasure> {
    if mu.carrier() != nu.carrier() || mu.nodes() != nu.nodes() {
        return Err(Error::invalid("mixture needs measures on the same grid"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("mixture weight must lie in [0, 1]"));
    }
    let w = mu.weights().iter().zip(nu.weights()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    GridMeasure::from_unnormalized(mu.carrier(), mu.nodes().to_vec(), w)
}

/// Outcome of the single-variable equilibrium check: inequality reports
/// for each family member plus the minimisation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub potential: String,
    pub reports: Vec<TCIReport>,
    /// Objective `-chi(mu) + mu(Q)` (`-Sigma` on the circle) per member.
    pub objectives: Vec<(String, f64)>,
    pub equilibrium_objective: f64,
    /// Smallest objective excess of a family member over `mu_Q`.
    pub min_gap: f64,
    pub minimizer_is_equilibrium: bool,
}

/// Checks the inequality on each member and that `mu_Q` beats all of them.
pub fn verify_equilibrium_theorem(
    qs: &[Potential],
    rho: f64,
    family: &[(String, GridMeasure)],
) -> Result<EquilibriumCheck> {
    let [q] = qs else {
        return Err(Error::invalid("the equilibrium check is single-variable: pass exactly one potential"));
    };
    let first = family.first().ok_or_else(|| Error::invalid("empty test family"))?;
    let reference = FreeReference::new(q, rho, first.1.carrier(), first.1.nodes().to_vec())?;
    let reports = reference.check_all(family)?;
    let objectives: Vec<(String, f64)> =
        family.iter().map(|(id, mu)| Ok((id.clone(), reference.objective(mu)?))).collect::<Result<_>>()?;
    let equilibrium_objective = reference.objective(reference.equilibrium())?;
    let min_gap = objectives.iter().map(|(_, v)| v - equilibrium_objective).fold(f64::INFINITY, f64::min);
    Ok(EquilibriumCheck {
        potential: q.label(),
        reports,
        objectives,
        equilibrium_objective,
        min_gap,
        minimizer_is_equilibrium: min_gap > -ABS_TOL,
    })
}

/// Perturbations `(1 - t) mu_Q + t nu` of the equilibrium measure.
pub fn equilibrium_perturbations(reference: &FreeReference) -> Result<Vec<(String, GridMeasure)>> {
    let mu_q = reference.equilibrium();
    let nodes = mu_q.nodes().to_vec();
    let others: Vec<(String, GridMeasure)> = if mu_q.carrier().is_circle() {
        vec![
            ("cos".into(), trigonometric_circle(nodes.len(), &[1.0], &[])?),
            ("sin2".into(), trigonometric_circle(nodes.len(), &[], &[0.0, 0.8])?),
        ]
    } else {
        let Carrier::Interval { radius } = mu_q.carrier() else { unreachable!() };
        vec![
            ("uniform".into(), uniform_interval(radius, nodes.len(), -1.0, 1.0)?),
            ("arcsine".into(), arcsine(radius, nodes.len(), 2.0)?),
            ("shifted".into(), semicircle_on(radius, nodes.clone(), 0.5, 1.0)?),
        ]
    };
    let mut out = Vec::new();
    for (id, nu) in &others {
        for t in [0.05, 0.2, 0.5] {
            out.push((format!("{}+{t}*{id}", "mu_Q"), mixture(mu_q, nu, t)?));
        }
    }
    Ok(out)
}

/// Free product of affine semicircles `scale * s + center` checked against
/// the product of `x^2/2` potentials. The left side is replaced by the
/// cost of the coupling `(scale A + center, A)` with `A` GUE, an upper
/// bound in the large-`N` limit; the right side uses additivity of free
/// entropy over free products.
pub fn verify_free_product_upper_bound(
    letters: &[(f64, f64)],
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<TCIReport> {
    if letters.is_empty() {
        return Err(Error::invalid("need at least one letter"));
    }
    if dim == 0 || samples < 2 {
        return Err(Error::invalid("need N >= 1 and at least two samples"));
    }
    let q = Potential::quadratic();
    let reference = FreeReference::standard(&q, 1.0)?;
    let mut radicand = 0.0;
    let mut rhs_error_sq: f64 = 0.0;
    for &(center, scale) in letters {
        if !(scale > 0.0) {
            return Err(Error::invalid("letter scales must be positive"));
        }
        let mu = semicircle_on(LINE_RADIUS, interval_grid(LINE_RADIUS, LINE_GRID), center, scale)?;
        let report = reference.check(&mu, "letter")?;
        radicand += report.radicand;
        rhs_error_sq += report.rhs_error.powi(2);
    }
    let rhs = check_radicand(radicand, ABS_TOL, "free product")?;
    let bound = coupling_cost_bound(
        |t| {
            let mut rng = chain_rng(seed, t as u64);
            let mut a = Vec::with_capacity(letters.len());
            let mut b = Vec::with_capacity(letters.len());
            for &(center, scale) in letters {
                let g = gue_matrix(dim, &mut rng);
                let shifted =
                    g.map(|z| z * scale) + DMatrix::from_diagonal_element(dim, dim, Complex64::new(center, 0.0));
                a.push(MatrixSample::new(MatrixKind::SelfAdjoint, Entries::Dense(shifted))?);
                b.push(MatrixSample::new(MatrixKind::SelfAdjoint, Entries::Dense(g))?);
            }
            Ok((a, b))
        },
        samples,
        None,
        GroundCost::HilbertSchmidt,
    )?;
    let mut values = BTreeMap::new();
    values.insert("samples".into(), samples as f64);
    let params = ReportParameters {
        rho: 1.0,
        radius: Some(LINE_RADIUS),
        dim: Some(dim),
        potentials: vec![q.label(); letters.len()],
        measure: letters.iter().map(|(c, s)| format!("{s}*semicircle+{c}")).collect::<Vec<_>>().join(" * "),
        values,
    };
    let mut report = TCIReport::new(
        "free_product_upper_bound",
        (bound.value, bound.std_error),
        (rhs, rhs_error_sq.sqrt()),
        radicand,
        params,
    );
    if !report.verdict.is_success() {
        report.verdict = Verdict::InconclusiveUpperBound;
    }
    Ok(report)
}

/// `Sigma(mu) = -sum_{k >= 1} |hat mu(k)|^2 / k` on the circle, truncated
/// at `terms` Fourier modes.
pub fn circle_energy_from_fourier(mu: &GridMeasure, terms: usize) -> Result<f64> {
    if !mu.carrier().is_circle() {
        return Err(Error::CarrierMismatch("Fourier energy needs a circle measure".into()));
    }
    Ok(-(1..=terms as i64).map(|k| mu.fourier(k).norm_sqr() / k as f64).sum::<f64>())
}

/// Right side of the scaled-semicircle case: `sqrt(s^2 - 1 - 2 log s)`.
pub fn scaled_semicircle_rhs(s: f64) -> f64 {
    (s * s - 1.0 - 2.0 * s.ln()).max(0.0).sqrt()
}
