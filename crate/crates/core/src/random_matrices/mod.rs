//! Gibbs random matrix ensembles, self-adjoint and (special) unitary.
//!
//! Spectra are sampled in eigenvalue coordinates; whenever a full matrix
//! is needed it is rebuilt with an independent Haar conjugation, which
//! leaves every unitarily invariant ensemble unchanged.

pub(crate) mod mcmc;
mod words;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::free_moments::{all_words, MomentTable};
use crate::measures::{interval_grid, Carrier, GridMeasure};
use crate::potentials::Potential;

pub use mcmc::{
    sample_gibbs_angles, sample_gibbs_eigenvalues, sample_gibbs_eigenvalues_with, sample_gibbs_su_eigenangles,
    GibbsRun, SamplerSettings,
};
pub use words::{word_trace, WordEvaluator};

pub type CMatrix = DMatrix<Complex64>;

const SELF_ADJOINT_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const DET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    SelfAdjoint,
    Unitary,
    SpecialUnitary,
}

impl MatrixKind {
    pub fn is_unitary(self) -> bool {
        !matches!(self, MatrixKind::SelfAdjoint)
    }
}

/// Matrix storage; diagonal samples avoid `O(N^3)` work in word traces.
#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Dense(CMatrix),
    Diagonal(Vec<Complex64>),
}

impl Entries {
    pub fn dim(&self) -> usize {
        match self {
            Entries::Dense(m) => m.nrows(),
            Entries::Diagonal(d) => d.len(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Entries::Dense(m) => m.clone(),
            Entries::Diagonal(d) => CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub fn adjoint(&self) -> Entries {
        match self {
            Entries::Dense(m) => Entries::Dense(m.adjoint()),
            Entries::Diagonal(d) => Entries::Diagonal(d.iter().map(|z| z.conj()).collect()),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Entries {
        match self {
            Entries::Dense(m) => Entries::Dense(m * s),
            Entries::Diagonal(d) => Entries::Diagonal(d.iter().map(|z| z * s).collect()),
        }
    }

    pub fn trace(&self) -> Complex64 {
        match self {
            Entries::Dense(m) => m.trace(),
            Entries::Diagonal(d) => d.iter().sum(),
        }
    }

    pub fn mul(&self, other: &Entries) -> Entries {
        match (self, other) {
            (Entries::Diagonal(a), Entries::Diagonal(b)) => {
                Entries::Diagonal(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            (Entries::Diagonal(a), Entries::Dense(m)) => {
                let mut out = m.clone();
                for (i, ai) in a.iter().enumerate() {
                    let mut row = out.row_mut(i);
                    row *= *ai;
                }
                Entries::Dense(out)
            }
            (Entries::Dense(m), Entries::Diagonal(b)) => {
                let mut out = m.clone();
                for (j, bj) in b.iter().enumerate() {
                    let mut col = out.column_mut(j);
                    col *= *bj;
                }
                Entries::Dense(out)
            }
            (Entries::Dense(a), Entries::Dense(b)) => Entries::Dense(a * b),
        }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_of_product(&self, other: &Entries) -> Complex64 {
        match (self, other) {
            (Entries::Diagonal(a), Entries::Diagonal(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Entries::Diagonal(a), Entries::Dense(m)) | (Entries::Dense(m), Entries::Diagonal(a)) => {
                a.iter().enumerate().map(|(i, x)| x * m[(i, i)]).sum()
            }
            (Entries::Dense(a), Entries::Dense(b)) => {
                let n = a.nrows();
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        s += a[(i, j)] * b[(j, i)];
                    }
                }
                s
            }
        }
    }

    fn difference_hs(&self, other: &Entries) -> f64 {
        match (self, other) {
            (Entries::Diagonal(a), Entries::Diagonal(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
            }
            _ => (self.to_dense() - other.to_dense()).norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    kind: MatrixKind,
    entries: Entries,
}

impl MatrixSample {
    /// Validated constructor.
    pub fn new(kind: MatrixKind, entries: Entries) -> Result<Self> {
        let n = entries.dim();
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if let Entries::Dense(m) = &entries {
            if !m.is_square() {
                return Err(Error::invalid("matrix must be square"));
            }
        }
        match kind {
            MatrixKind::SelfAdjoint => {
                let dev = match &entries {
                    Entries::Dense(m) => (m - m.adjoint()).camax(),
                    Entries::Diagonal(d) => d.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
                };
                if dev > SELF_ADJOINT_TOL {
                    return Err(Error::invalid(format!("matrix is not self-adjoint (deviation {dev:.2e})")));
                }
            }
            MatrixKind::Unitary | MatrixKind::SpecialUnitary => {
                let dev = match &entries {
                    Entries::Dense(m) => (m.adjoint() * m - CMatrix::identity(n, n)).camax(),
                    Entries::Diagonal(d) => d.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max),
                };
                if dev > UNITARY_TOL {
                    return Err(Error::invalid(format!("matrix is not unitary (deviation {dev:.2e})")));
                }
                if kind == MatrixKind::SpecialUnitary {
                    let det = determinant(&entries);
                    if (det - Complex64::new(1.0, 0.0)).norm() > DET_TOL {
                        return Err(Error::invalid(format!("determinant {det} is not 1")));
                    }
                }
            }
        }
        Ok(MatrixSample { kind, entries })
    }

    pub(crate) fn unchecked(kind: MatrixKind, entries: Entries) -> Self {
        MatrixSample { kind, entries }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        self.entries.to_dense()
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.entries, Entries::Diagonal(_))
    }

    /// Eigenvalues in increasing order (self-adjoint only).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.kind != MatrixKind::SelfAdjoint {
            return Err(Error::invalid("eigenvalues() needs a self-adjoint sample; use eigenangles()"));
        }
        let mut v: Vec<f64> = match &self.entries {
            Entries::Diagonal(d) => d.iter().map(|z| z.re).collect(),
            Entries::Dense(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
        };
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Eigenangles in `[0, 2 pi)`, sorted (unitary kinds only).
    pub fn eigenangles(&self) -> Result<Vec<f64>> {
        if !self.kind.is_unitary() {
            return Err(Error::invalid("eigenangles() needs a unitary sample"));
        }
        let mut v = match &self.entries {
            Entries::Diagonal(d) => d.iter().map(|z| z.arg().rem_euclid(TAU)).collect(),
            Entries::Dense(m) => unitary_eigenangles(m)?,
        };
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub fn operator_norm(&self) -> Result<f64> {
        match self.kind {
            MatrixKind::SelfAdjoint => Ok(self.eigenvalues()?.iter().fold(0.0, |a, x| a.max(x.abs()))),
            _ => Ok(1.0),
        }
    }

    /// `||self - other||_HS`.
    pub fn hs_distance(&self, other: &MatrixSample) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(self.entries.difference_hs(&other.entries))
    }

    /// `(1/N) Tr`.
    pub fn normalized_trace(&self) -> Complex64 {
        self.entries.trace() / self.dim() as f64
    }
}

fn determinant(e: &Entries) -> Complex64 {
    match e {
        Entries::Diagonal(d) => d.iter().product(),
        Entries::Dense(m) => m.clone().lu().determinant(),
    }
}

/// Seeded generator for chain `stream` of run `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Derived seed for letter `i` of a tuple.
pub(crate) fn letter_seed(seed: u64, letter: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(letter as u64 + 1))
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Dense GUE draw with density proportional to `exp(-N Tr A^2 / 2)`.
pub fn gue_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let nf = n as f64;
    let diag_sd = (1.0 / nf).sqrt();
    let off_sd = (0.5 / nf).sqrt();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(diag_sd * normal(rng), 0.0);
        for j in (i + 1)..n {
            let z = Complex64::new(off_sd * normal(rng), off_sd * normal(rng));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// GUE eigenvalues (same normalisation as [`gue_matrix`]) from the
/// tridiagonal beta = 2 model.
pub fn gue_eigenvalues<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = normal(rng);
    }
    for i in 0..n.saturating_sub(1) {
        let k = (n - 1 - i) as f64;
        let g: f64 = Gamma::new(k, 1.0).expect("positive shape").sample(rng);
        let b = g.sqrt();
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut v: Vec<f64> = t.symmetric_eigenvalues().iter().map(|x| x * scale).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn sample_gue(n: usize, count: usize, seed: u64) -> Vec<MatrixSample> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i as u64);
            MatrixSample::unchecked(MatrixKind::SelfAdjoint, Entries::Dense(gue_matrix(n, &mut rng)))
        })
        .collect()
}

/// Haar unitary by QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = 0.5f64.sqrt();
    let z = CMatrix::from_fn(n, n, |_, _| Complex64::new(s * normal(rng), s * normal(rng)));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn sample_haar_unitary(n: usize, count: usize, seed: u64) -> Vec<MatrixSample> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i as u64);
            MatrixSample::unchecked(MatrixKind::Unitary, Entries::Dense(haar_matrix(n, &mut rng)))
        })
        .collect()
}

/// Eigenangles of a unitary matrix through the Cayley transform
/// `H = i (I - U)(I + U)^{-1}`, whose eigenvalues are `tan(theta / 2)`.
pub fn unitary_eigenangles(u: &CMatrix) -> Result<Vec<f64>> {
    let n = u.nrows();
    let id = CMatrix::identity(n, n);
    for attempt in 0..8 {
        let alpha = 0.7 * attempt as f64;
        let rot = u * Complex64::from_polar(1.0, -alpha);
        let Some(x) = (&id + &rot).lu().solve(&(&id - &rot)) else {
            continue;
        };
        let h = x * Complex64::new(0.0, 1.0);
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let lambda = h.symmetric_eigenvalues();
        if lambda.iter().any(|l| !l.is_finite() || l.abs() > 1e7) {
            continue;
        }
        return Ok(lambda.iter().map(|l| (2.0 * l.atan() + alpha).rem_euclid(TAU)).collect());
    }
    Err(Error::Numerical("unitary eigenangle computation failed".into()))
}

/// Principal `N`-th root phase `omega` with `omega^N det = 1`.
fn su_phase(det: Complex64, n: usize) -> Complex64 {
    let mut phi = det.arg();
    if phi <= -PI {
        phi = PI;
    }
    Complex64::from_polar(1.0, -phi / n as f64)
}

/// Projection onto `SU(N)`: every eigenvalue multiplied by the principal
/// root `(z_1 ... z_N)^{-1/N}`, which amounts to scaling by that factor.
pub fn project_su(u: &MatrixSample) -> Result<MatrixSample> {
    if !u.kind.is_unitary() {
        return Err(Error::invalid("project_su needs a unitary sample"));
    }
    let det = determinant(&u.entries);
    if !det.is_finite() || (det.norm() - 1.0).abs() > DET_TOL {
        return Err(Error::Numerical(format!("determinant {det} of a unitary sample is off the unit circle")));
    }
    let omega = su_phase(det, u.dim());
    Ok(MatrixSample::unchecked(MatrixKind::SpecialUnitary, u.entries.scaled(omega)))
}

/// The same projection acting on eigenangles: all angles shifted by
/// `-phi / N` with `phi` the principal argument of `exp(i sum theta)`.
pub fn project_su_angles(angles: &[f64]) -> Vec<f64> {
    let sum: f64 = angles.iter().sum();
    let omega = su_phase(Complex64::from_polar(1.0, sum), angles.len());
    let shift = omega.arg();
    angles.iter().map(|t| (t + shift).rem_euclid(TAU)).collect()
}

/// `r_R`: eigenvalues clipped to `[-R, R]` in the eigenbasis.
pub fn retract(a: &MatrixSample, radius: f64) -> Result<MatrixSample> {
    if a.kind != MatrixKind::SelfAdjoint {
        return Err(Error::invalid("retraction applies to self-adjoint samples"));
    }
    if !(radius >= 0.0) {
        return Err(Error::invalid("retraction radius must be nonnegative"));
    }
    match &a.entries {
        Entries::Diagonal(d) => Ok(MatrixSample::unchecked(
            MatrixKind::SelfAdjoint,
            Entries::Diagonal(d.iter().map(|z| Complex64::new(z.re.clamp(-radius, radius), 0.0)).collect()),
        )),
        Entries::Dense(m) => {
            let eig = m.clone().symmetric_eigen();
            if eig.eigenvalues.iter().all(|l| l.abs() <= radius) {
                return Ok(a.clone());
            }
            let v = &eig.eigenvectors;
            let mut scaled = v.clone();
            for (j, l) in eig.eigenvalues.iter().enumerate() {
                let mut col = scaled.column_mut(j);
                col *= Complex64::new(l.clamp(-radius, radius), 0.0);
            }
            let mut out = scaled * v.adjoint();
            let herm = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
            out = herm;
            Ok(MatrixSample::unchecked(MatrixKind::SelfAdjoint, Entries::Dense(out)))
        }
    }
}

/// Exact mean eigenvalue density of an `n x n` GUE matrix normalised so
/// that `E tr X^2 = 1`: `(1/n) sum_{k<n} h_k(y)^2` in the variable
/// `y = x sqrt(n/2)`, with `h_k` the Hermite functions.
pub fn gue_mean_density(n: usize, x: f64) -> f64 {
    let c = (n as f64 / 2.0).sqrt();
    let y = x * c;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    let mut total = 0.0;
    for k in 0..n {
        total += cur * cur;
        let next = (2.0 / (k + 1) as f64).sqrt() * y * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    c * total / n as f64
}

/// Mean spectral law of `scale * X + center` for `X` an `n x n` GUE
/// matrix, on a grid of `grid` cells in `[-radius, radius]`.
pub fn gue_spectral_law(n: usize, center: f64, scale: f64, radius: f64, grid: usize) -> Result<GridMeasure> {
    if n == 0 || !(scale > 0.0) {
        return Err(Error::invalid("need n >= 1 and a positive scale"));
    }
    let density = |x: f64| gue_mean_density(n, (x - center) / scale) / scale;
    let nodes = interval_grid(radius, grid);
    let inside = crate::quadrature::integrate(density, -radius, radius, grid, 8);
    if 1.0 - inside > 1e-10 {
        return Err(Error::EnlargeWindow { radius, edge_mass: 1.0 - inside });
    }
    GridMeasure::from_density(Carrier::Interval { radius }, nodes, density)
}

/// `V diag(d) V*`.
pub fn conjugate_diagonal(v: &CMatrix, d: &[Complex64]) -> CMatrix {
    let mut scaled = v.clone();
    for (j, x) in d.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        col *= *x;
    }
    scaled * v.adjoint()
}

/// Full description of a product ensemble `lambda_N(Q_1) x ... x lambda_N(Q_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: MatrixKind,
    /// Matrix size `N`.
    pub dim: usize,
    pub potentials: Vec<Potential>,
    /// Truncation radius (self-adjoint ensembles).
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub sampler: SamplerSettings,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gue(n_letters: usize, dim: usize, seed: u64) -> Self {
        EnsembleSpec {
            kind: MatrixKind::SelfAdjoint,
            dim,
            potentials: vec![Potential::quadratic(); n_letters],
            radius: None,
            sampler: SamplerSettings::default(),
            seed,
        }
    }

    pub fn haar(kind: MatrixKind, n_letters: usize, dim: usize, seed: u64) -> Self {
        EnsembleSpec {
            kind,
            dim,
            potentials: vec![Potential::zero_circle(); n_letters],
            radius: None,
            sampler: SamplerSettings::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("matrix size N must be at least 1"));
        }
        if self.potentials.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one letter"));
        }
        for q in &self.potentials {
            q.validate()?;
            if q.is_circle() != self.kind.is_unitary() {
                return Err(Error::CarrierMismatch(format!(
                    "{} potential in a {:?} ensemble",
                    q.carrier_name(),
                    self.kind
                )));
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return Err(Error::invalid("truncation radius must be positive"));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_zero_circle(q: &Potential) -> bool {
    match &q.form {
        crate::potentials::PotentialForm::Circle { cos, sin, .. } => cos.iter().chain(sin).all(|c| *c == 0.0),
        _ => false,
    }
}

/// Spectra (eigenvalues or eigenangles) of `count` draws of one letter.
fn letter_spectra(spec: &EnsembleSpec, letter: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let q = &spec.potentials[letter];
    let seed = letter_seed(spec.seed, letter);
    let n = spec.dim;
    match spec.kind {
        MatrixKind::SelfAdjoint => {
            Ok(sample_gibbs_eigenvalues_with(q, n, count, seed, &spec.sampler, spec.radius)?.samples)
        }
        MatrixKind::Unitary | MatrixKind::SpecialUnitary if is_zero_circle(q) => {
            let su = spec.kind == MatrixKind::SpecialUnitary;
            (0..count)
                .into_par_iter()
                .map(|t| {
                    let mut rng = chain_rng(seed, t as u64);
                    let angles = unitary_eigenangles(&haar_matrix(n, &mut rng))?;
                    Ok(if su { project_su_angles(&angles) } else { angles })
                })
                .collect()
        }
        MatrixKind::Unitary => Ok(sample_gibbs_angles(q, n, count, seed, &spec.sampler, false)?.samples),
        MatrixKind::SpecialUnitary => Ok(sample_gibbs_angles(q, n, count, seed, &spec.sampler, true)?.samples),
    }
}

enum LetterSource {
    Spectra(Vec<Vec<f64>>),
    Gaussian { scale: f64, shift: f64 },
    Haar,
}

/// Lazily built tuples from a product ensemble. Eigenvalue chains run up
/// front; dense matrices are only formed when a tuple is requested, so
/// large ensembles can be streamed.
///
/// The first letter comes back diagonal (its spectrum). The others are
/// conjugated by independent Haar unitaries or, for Gaussian and Haar
/// letters, drawn directly.
pub struct TupleSampler<'a> {
    spec: &'a EnsembleSpec,
    count: usize,
    sources: Vec<LetterSource>,
}

impl<'a> TupleSampler<'a> {
    pub fn new(spec: &'a EnsembleSpec, count: usize) -> Result<Self> {
        spec.validate()?;
        let mut sources = Vec::with_capacity(spec.potentials.len());
        sources.push(LetterSource::Spectra(letter_spectra(spec, 0, count)?));
        for (l, q) in spec.potentials.iter().enumerate().skip(1) {
            let gaussian = spec.kind == MatrixKind::SelfAdjoint && spec.radius.is_none();
            let source = match q.as_quadratic() {
                Some((a, b, _)) if gaussian => {
                    LetterSource::Gaussian { scale: 1.0 / (2.0 * a).sqrt(), shift: -b / (2.0 * a) }
                }
                _ if spec.kind.is_unitary() && is_zero_circle(q) => LetterSource::Haar,
                _ => LetterSource::Spectra(letter_spectra(spec, l, count)?),
            };
            sources.push(source);
        }
        Ok(TupleSampler { spec, count, sources })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn to_diag(&self, s: &[f64]) -> Vec<Complex64> {
        if self.spec.kind.is_unitary() {
            s.iter().map(|t| Complex64::from_polar(1.0, *t)).collect()
        } else {
            s.iter().map(|x| Complex64::new(*x, 0.0)).collect()
        }
    }

    /// Tuple number `t`.
    pub fn tuple(&self, t: usize) -> Result<Vec<MatrixSample>> {
        if t >= self.count {
            return Err(Error::invalid(format!("tuple {t} requested from a sampler of {}", self.count)));
        }
        let spec = self.spec;
        let n = spec.dim;
        let mut out = Vec::with_capacity(self.sources.len());
        for (l, source) in self.sources.iter().enumerate() {
            let seed = letter_seed(spec.seed, l);
            let sample = match source {
                LetterSource::Spectra(spectra) if l == 0 => {
                    MatrixSample::unchecked(spec.kind, Entries::Diagonal(self.to_diag(&spectra[t])))
                }
                LetterSource::Spectra(spectra) => {
                    // A separate stream for the conjugating unitary.
                    let mut rng = chain_rng(seed, (1u64 << 40) + t as u64);
                    let v = haar_matrix(n, &mut rng);
                    let d = self.to_diag(&spectra[t]);
                    MatrixSample::unchecked(spec.kind, Entries::Dense(conjugate_diagonal(&v, &d)))
                }
                LetterSource::Gaussian { scale, shift } => {
                    let mut rng = chain_rng(seed, t as u64);
                    let mut m = gue_matrix(n, &mut rng) * Complex64::new(*scale, 0.0);
                    for i in 0..n {
                        m[(i, i)] += Complex64::new(*shift, 0.0);
                    }
                    MatrixSample::unchecked(MatrixKind::SelfAdjoint, Entries::Dense(m))
                }
                LetterSource::Haar => {
                    let mut rng = chain_rng(seed, t as u64);
                    let u = MatrixSample::unchecked(MatrixKind::Unitary, Entries::Dense(haar_matrix(n, &mut rng)));
                    if spec.kind == MatrixKind::SpecialUnitary {
                        project_su(&u)?
                    } else {
                        u
                    }
                }
            };
            out.push(sample);
        }
        Ok(out)
    }

    /// Applies `f` to every tuple in parallel, results in tuple order.
    pub fn map<T: Send>(&self, f: impl Fn(usize, Vec<MatrixSample>) -> Result<T> + Sync) -> Result<Vec<T>> {
        (0..self.count).into_par_iter().map(|t| f(t, self.tuple(t)?)).collect()
    }
}

/// Independent tuples `(A_1, ..., A_n)` from the product ensemble; see
/// [`TupleSampler`].
pub fn sample_tuples(spec: &EnsembleSpec, count: usize) -> Result<Vec<Vec<MatrixSample>>> {
    TupleSampler::new(spec, count)?.map(|_, tuple| Ok(tuple))
}

/// Whether the tuple lies in the microstate set: every word of degree
/// `<= m` has normalised trace within `eps` of `tau`, and every matrix has
/// operator norm at most `radius`.
pub fn microstate_membership(
    samples: &[MatrixSample],
    tau: &MomentTable,
    m: usize,
    eps: f64,
    radius: f64,
) -> Result<bool> {
    if m > tau.max_degree {
        return Err(Error::invalid(format!("moment table holds degree {} < {m}", tau.max_degree)));
    }
    let words = all_words(tau.alphabet, samples.len(), m);
    let mut lookups = Vec::with_capacity(words.len());
    for w in &words {
        let v = tau.get(w).ok_or_else(|| Error::invalid(format!("moment table has no entry for word {w:?}")))?;
        lookups.push(v);
    }
    for s in samples {
        if s.operator_norm()? > radius + 1e-12 {
            return Ok(false);
        }
    }
    let mut eval = WordEvaluator::new(samples)?;
    for (w, target) in words.iter().zip(lookups) {
        if (eval.trace(w)? - target).norm() > eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests;
