//! Probability measures on `[-R, R]` and on the unit circle.
//!
//! A [`GridMeasure`] stores nodes and weights. Each node owns a cell bounded
//! by the midpoints to its neighbours (end cells are mirrored). Integrals of
//! smooth functions, moments and the logarithmic energy treat the weight as
//! spread uniformly over the cell; quantiles and transport treat it as an
//! atom at the node.

mod io;
pub mod kernel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
pub use kernel::LogKernel;

/// Weight-sum tolerance for a valid measure.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Default maximal moment degree.
pub const DEFAULT_MAX_DEGREE: usize = 64;
/// Default grid size.
pub const DEFAULT_GRID: usize = 1000;

/// Underlying space of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "carrier", rename_all = "lowercase")]
pub enum Carrier {
    Interval {
        #[serde(rename = "R")]
        radius: f64,
    },
    Circle,
}

impl Carrier {
    pub fn is_circle(&self) -> bool {
        matches!(self, Carrier::Circle)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Carrier::Interval { .. } => "interval",
            Carrier::Circle => "circle",
        }
    }
}

/// Cell `[lo, hi]` owned by a node (angles may leave `[0, 2pi)` for the
/// wrapping cell on the circle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
}

impl Cell {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Probability measure given by grid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    carrier: Carrier,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cells: Vec<Cell>,
}

/// Logarithmic energy with its singularity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEnergy {
    pub value: f64,
    /// Set when a single node carries weight >= 0.5; the value is then a
    /// grid-regularised stand-in for `-inf`.
    pub atom_warning: bool,
}

impl GridMeasure {
    /// Validating constructor.
    pub fn new(carrier: Carrier, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("a grid measure needs at least one node"));
        }
        if nodes.len() != weights.len() {
            return Err(Error::invalid(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if nodes.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::invalid("nodes must be strictly increasing"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weights must be finite and nonnegative, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        match carrier {
            Carrier::Interval { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::invalid("interval radius must be positive"));
                }
                if nodes.iter().any(|x| x.abs() > radius) {
                    return Err(Error::invalid(format!("interval nodes must lie in [-{radius}, {radius}]")));
                }
            }
            Carrier::Circle => {
                if nodes.iter().any(|t| !(0.0..TAU).contains(t)) {
                    return Err(Error::invalid("circle nodes must be angles in [0, 2pi)"));
                }
            }
        }
        let cells = build_cells(&carrier, &nodes);
        Ok(GridMeasure { carrier, nodes, weights, cells })
    }

    /// Normalises nonnegative raw weights before validating.
    pub fn from_unnormalized(carrier: Carrier, nodes: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("raw weights must have a positive finite sum"));
        }
        let weights = raw.iter().map(|w| w.max(0.0) / total).collect();
        GridMeasure::new(carrier, nodes, weights)
    }

    /// Cell weights from a cumulative distribution function on the line
    /// (or on the lifted angle for the circle).
    pub fn from_cdf<F: Fn(f64) -> f64>(carrier: Carrier, nodes: Vec<f64>, cdf: F) -> Result<Self> {
        let cells = build_cells(&carrier, &nodes);
        let raw = cells.iter().map(|c| (cdf(c.hi) - cdf(c.lo)).max(0.0)).collect();
        GridMeasure::from_unnormalized(carrier, nodes, raw)
    }

    /// Cell weights from a (not necessarily normalised) density, integrated
    /// over each cell by Gauss–Legendre.
    pub fn from_density<F: Fn(f64) -> f64>(carrier: Carrier, nodes: Vec<f64>, density: F) -> Result<Self> {
        let cells = build_cells(&carrier, &nodes);
        let raw = cells.iter().map(|c| crate::quadrature::integrate(&density, c.lo, c.hi, 1, 8).max(0.0)).collect();
        GridMeasure::from_unnormalized(carrier, nodes, raw)
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest cell width.
    pub fn max_cell_width(&self) -> f64 {
        self.cells.iter().map(Cell::width).fold(0.0, f64::max)
    }

    /// Indices of nodes with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i)
    }

    /// Cell-averaged `k`-th moment: `int x^k dmu` on an interval (imaginary
    /// part zero), `int zeta^k dmu` on the circle.
    pub fn moment(&self, k: usize) -> Result<Complex64> {
        self.moment_capped(k, DEFAULT_MAX_DEGREE)
    }

    pub fn moment_capped(&self, k: usize, cap: usize) -> Result<Complex64> {
        if k > cap {
            return Err(Error::DegreeCap { requested: k, cap });
        }
        Ok(match self.carrier {
            Carrier::Interval { .. } => {
                let p = k as i32;
                let v: f64 = self.cells.iter().zip(&self.weights).map(|(c, w)| w * cell_average_power(c, p)).sum();
                Complex64::new(v, 0.0)
            }
            Carrier::Circle => self.fourier(k as i64),
        })
    }

    /// `int zeta^k dmu` for any integer `k` (circle only; panics otherwise).
    pub fn fourier(&self, k: i64) -> Complex64 {
        assert!(self.carrier.is_circle(), "fourier coefficients need a circle carrier");
        let kf = k as f64;
        self.cells
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| Complex64::from_polar(w * sinc(0.5 * kf * c.width()), kf * c.mid()))
            .sum()
    }

    /// Real moment on an interval.
    pub fn real_moment(&self, k: usize) -> Result<f64> {
        if self.carrier.is_circle() {
            return Err(Error::CarrierMismatch("real moments need an interval carrier".into()));
        }
        Ok(self.moment(k)?.re)
    }

    /// Cell-averaged integral `int f dmu` given an antiderivative `big_f` of `f`.
    pub fn integrate_with_antiderivative<F: Fn(f64) -> f64>(&self, big_f: F, f: impl Fn(f64) -> f64) -> f64 {
        self.cells
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| {
                if *w == 0.0 {
                    0.0
                } else if c.width() == 0.0 {
                    w * f(c.lo)
                } else {
                    w * (big_f(c.hi) - big_f(c.lo)) / c.width()
                }
            })
            .sum()
    }

    /// Piecewise-linear CDF (uniform spreading over cells). On the circle
    /// the argument is an angle in `[0, 2pi]` measured from the first cell.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (c, w) in self.cells.iter().zip(&self.weights) {
            if x >= c.hi {
                acc += w;
            } else if x > c.lo {
                acc += w * (x - c.lo) / c.width();
                break;
            } else {
                break;
            }
        }
        acc.min(1.0)
    }

    /// Atomic quantile: smallest support node whose cumulative weight
    /// reaches `p`. `p = 0` gives the leftmost support node.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("quantile level {p} outside [0, 1]")));
        }
        let mut acc = 0.0;
        let mut last = None;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(*x);
            if acc >= p - 1e-14 {
                return Ok(*x);
            }
        }
        last.ok_or_else(|| Error::invalid("measure has empty support"))
    }

    /// Logarithmic energy `int int log|x - y| dmu dmu`.
    pub fn log_energy(&self) -> LogEnergy {
        let support: Vec<usize> = self.support().collect();
        let cells: Vec<Cell> = support.iter().map(|&i| self.cells[i]).collect();
        let w: Vec<f64> = support.iter().map(|&i| self.weights[i]).collect();
        let atom_warning = w.iter().any(|v| *v >= 0.5);
        let kernel = LogKernel::assemble(&self.carrier, &cells);
        LogEnergy { value: kernel.quadratic_form(&w), atom_warning }
    }

    /// Kernel over all cells (including zero-weight ones).
    pub fn kernel(&self) -> LogKernel {
        LogKernel::assemble(&self.carrier, &self.cells)
    }

    /// Single-variable free entropy `log_energy + 3/4 + log(2 pi)/2`.
    pub fn free_entropy(&self) -> Result<f64> {
        if self.carrier.is_circle() {
            return Err(Error::CarrierMismatch(
                "free entropy of a circle measure is its logarithmic energy; call log_energy".into(),
            ));
        }
        Ok(self.log_energy().value + FREE_ENTROPY_OFFSET)
    }

    /// Shift all nodes by `c`, dropping zero-weight edge nodes that leave
    /// the window.
    pub fn translated(&self, c: f64) -> Result<Self> {
        match self.carrier {
            Carrier::Interval { radius } => {
                let shifted: Vec<f64> = self.nodes.iter().map(|x| x + c).collect();
                self.restricted_to_window(shifted, radius)
            }
            Carrier::Circle => self.rotated(c),
        }
    }

    /// Scale all nodes (and cells) by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        match self.carrier {
            Carrier::Interval { radius } => {
                let scaled: Vec<f64> = self.nodes.iter().map(|x| x * s).collect();
                self.restricted_to_window(scaled, radius)
            }
            Carrier::Circle => Err(Error::CarrierMismatch("circle measures cannot be scaled".into())),
        }
    }

    /// Rotate a circle measure by `alpha`.
    pub fn rotated(&self, alpha: f64) -> Result<Self> {
        if !self.carrier.is_circle() {
            return Err(Error::CarrierMismatch("rotation needs a circle carrier".into()));
        }
        let mut pairs: Vec<(f64, f64)> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| {
                let mut r = (t + alpha).rem_euclid(TAU);
                if r >= TAU {
                    r = 0.0;
                }
                (r, *w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        GridMeasure::new(Carrier::Circle, nodes, weights)
    }

    /// Same nodes and weights with a different interval radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        match self.carrier {
            Carrier::Interval { .. } => self.restricted_to_window(self.nodes.clone(), radius),
            Carrier::Circle => Err(Error::CarrierMismatch("circle measures have no radius".into())),
        }
    }

    fn restricted_to_window(&self, nodes: Vec<f64>, radius: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].abs() <= radius).collect();
        let kept_mass: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        if (kept_mass - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!(
                "transformed measure leaves [-{radius}, {radius}] (mass {:.3e} outside)",
                1.0 - kept_mass
            )));
        }
        // Only edge nodes may be dropped: interior gaps would change cells.
        if let (Some(first), Some(last)) = (keep.first(), keep.last()) {
            if last - first + 1 != keep.len() {
                return Err(Error::invalid("window restriction would split the grid"));
            }
        }
        let n: Vec<f64> = keep.iter().map(|&i| nodes[i]).collect();
        let w: Vec<f64> = keep.iter().map(|&i| self.weights[i]).collect();
        GridMeasure::new(Carrier::Interval { radius }, n, w)
    }

    /// Merge consecutive pairs of cells (a grid twice as coarse). Used for
    /// a posteriori discretisation error estimates.
    pub fn coarsened(&self) -> Result<Self> {
        if self.len() < 4 {
            return Err(Error::invalid("grid too small to coarsen"));
        }
        let mut nodes = Vec::with_capacity(self.len() / 2 + 1);
        let mut weights = Vec::with_capacity(self.len() / 2 + 1);
        let mut i = 0;
        while i < self.len() {
            if i + 1 < self.len() {
                nodes.push(0.5 * (self.cells[i].lo + self.cells[i + 1].hi));
                weights.push(self.weights[i] + self.weights[i + 1]);
                i += 2;
            } else {
                nodes.push(self.nodes[i]);
                weights.push(self.weights[i]);
                i += 1;
            }
        }
        if let Carrier::Circle = self.carrier {
            for t in nodes.iter_mut() {
                *t = t.rem_euclid(TAU);
            }
            let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(weights).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (n, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            return GridMeasure::from_unnormalized(self.carrier, n, w);
        }
        GridMeasure::from_unnormalized(self.carrier, nodes, weights)
    }

    /// Total-variation style L1 distance between the cell weights and the
    /// cell masses of an absolutely continuous law with CDF `cdf`.
    pub fn l1_to_cdf<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        self.cells.iter().zip(&self.weights).map(|(c, w)| (w - (cdf(c.hi) - cdf(c.lo))).abs()).sum()
    }
}

/// Offset between the logarithmic energy and single-variable free entropy.
pub const FREE_ENTROPY_OFFSET: f64 = 0.75 + 0.918_938_533_204_672_8;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn cell_average_power(c: &Cell, p: i32) -> f64 {
    let w = c.width();
    if w == 0.0 {
        return c.lo.powi(p);
    }
    (c.hi.powi(p + 1) - c.lo.powi(p + 1)) / ((p as f64 + 1.0) * w)
}

fn build_cells(carrier: &Carrier, nodes: &[f64]) -> Vec<Cell> {
    let n = nodes.len();
    if n == 1 {
        return match carrier {
            Carrier::Interval { .. } => vec![Cell { lo: nodes[0], hi: nodes[0] }],
            Carrier::Circle => vec![Cell { lo: nodes[0], hi: nodes[0] }],
        };
    }
    let mut cells = Vec::with_capacity(n);
    match carrier {
        Carrier::Interval { .. } => {
            for i in 0..n {
                let lo = if i == 0 { nodes[0] - 0.5 * (nodes[1] - nodes[0]) } else { 0.5 * (nodes[i - 1] + nodes[i]) };
                let hi = if i == n - 1 {
                    nodes[n - 1] + 0.5 * (nodes[n - 1] - nodes[n - 2])
                } else {
                    0.5 * (nodes[i] + nodes[i + 1])
                };
                cells.push(Cell { lo, hi });
            }
        }
        Carrier::Circle => {
            for i in 0..n {
                let prev = if i == 0 { nodes[n - 1] - TAU } else { nodes[i - 1] };
                let next = if i == n - 1 { nodes[0] + TAU } else { nodes[i + 1] };
                cells.push(Cell { lo: 0.5 * (prev + nodes[i]), hi: 0.5 * (nodes[i] + next) });
            }
        }
    }
    cells
}

/// Cell-centred nodes of `n` equal cells partitioning `[-radius, radius]`.
pub fn interval_grid(radius: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * radius / n as f64;
    (0..n).map(|i| -radius + (i as f64 + 0.5) * h).collect()
}

/// `n` equispaced angles starting at 0.
pub fn circle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// CDF of the standard semicircle law on `[-2, 2]`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

/// Density of the standard semicircle law.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

/// Semicircle law with centre `center` and scale `scale` (support
/// `[center - 2 scale, center + 2 scale]`) on the given interval nodes.
pub fn semicircle_on(radius: f64, nodes: Vec<f64>, center: f64, scale: f64) -> Result<GridMeasure> {
    GridMeasure::from_cdf(Carrier::Interval { radius }, nodes, |x| semicircle_cdf((x - center) / scale))
}

/// Standard semicircle on the default cell-centred grid of `[-radius, radius]`.
pub fn semicircle(radius: f64, n: usize) -> Result<GridMeasure> {
    semicircle_on(radius, interval_grid(radius, n), 0.0, 1.0)
}

/// Uniform law on `[a, b]`.
pub fn uniform_interval(radius: f64, n: usize, a: f64, b: f64) -> Result<GridMeasure> {
    GridMeasure::from_cdf(Carrier::Interval { radius }, interval_grid(radius, n), |x| {
        ((x - a) / (b - a)).clamp(0.0, 1.0)
    })
}

/// Arcsine law on `[-a, a]`.
pub fn arcsine(radius: f64, n: usize, a: f64) -> Result<GridMeasure> {
    GridMeasure::from_cdf(Carrier::Interval { radius }, interval_grid(radius, n), |x| {
        if x <= -a {
            0.0
        } else if x >= a {
            1.0
        } else {
            0.5 + (x / a).asin() / PI
        }
    })
}

/// Uniform law on the circle.
pub fn uniform_circle(n: usize) -> GridMeasure {
    let nodes = circle_grid(n);
    let w = vec![1.0 / n as f64; n];
    GridMeasure::from_unnormalized(Carrier::Circle, nodes, w).expect("uniform circle is valid")
}

/// Circle law with density proportional to
/// `1 + sum_k (a_k cos kt + b_k sin kt)`; the density must be nonnegative.
pub fn trigonometric_circle(n: usize, cos_coeffs: &[f64], sin_coeffs: &[f64]) -> Result<GridMeasure> {
    let nodes = circle_grid(n);
    // Exact cell integrals of the trigonometric polynomial.
    let antiderivative = |t: f64| {
        let mut v = t;
        for (k, a) in cos_coeffs.iter().enumerate() {
            let kf = (k + 1) as f64;
            v += a * (kf * t).sin() / kf;
        }
        for (k, b) in sin_coeffs.iter().enumerate() {
            let kf = (k + 1) as f64;
            v -= b * (kf * t).cos() / kf;
        }
        v
    };
    let cells = build_cells(&Carrier::Circle, &nodes);
    let raw: Vec<f64> = cells.iter().map(|c| antiderivative(c.hi) - antiderivative(c.lo)).collect();
    if raw.iter().any(|v| *v < -1e-12) {
        return Err(Error::invalid("trigonometric density is negative somewhere"));
    }
    GridMeasure::from_unnormalized(Carrier::Circle, nodes, raw.into_iter().map(|v| v.max(0.0)).collect())
}

/// Equal-weight atoms: finite-sample spectral distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    carrier: Carrier,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(carrier: Carrier, mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("an empirical measure needs at least one atom"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("atoms must be finite"));
        }
        match carrier {
            Carrier::Interval { radius } => {
                for a in atoms.iter_mut() {
                    *a = a.clamp(-radius, radius);
                }
            }
            Carrier::Circle => {
                for a in atoms.iter_mut() {
                    *a = a.rem_euclid(TAU);
                }
            }
        }
        atoms.sort_by(f64::total_cmp);
        Ok(EmpiricalMeasure { carrier, atoms })
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Kolmogorov distance `sup |F_emp - F|` against a continuous CDF.
    pub fn kolmogorov_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.atoms.len() as f64;
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = cdf(*x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}
