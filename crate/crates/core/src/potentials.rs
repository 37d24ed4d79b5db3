//! Confining potentials on the line and on the circle.
//!
//! Line potentials are polynomials `Q(x) = sum_k c_k x^k`; circle potentials
//! are trigonometric polynomials `Q(e^{it}) = a_0 + sum_k (a_k cos kt + b_k sin kt)`.
//! Each carries a user-supplied convexity modulus `rho`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::measures::{Carrier, GridMeasure};

/// Second-difference tolerance for the convexity certificate.
pub const CONVEXITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "carrier", rename_all = "lowercase")]
pub enum PotentialForm {
    Line {
        coefficients: Vec<f64>,
    },
    Circle {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub form: PotentialForm,
    pub rho: f64,
}

/// Result of [`Potential::verify_rho_convexity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub holds: bool,
    /// Smallest sampled second difference of `Q - rho/2 x^2` (negative
    /// values are violations).
    pub worst_residual: f64,
    /// Whether `rho` itself is in the admissible range (`> 0` on the line,
    /// `> -1/2` on the circle).
    pub rho_admissible: bool,
}

#[derive(Debug, Deserialize)]
struct PotentialFile {
    potential: Potential,
}

impl Potential {
    pub fn line(coefficients: Vec<f64>, rho: f64) -> Self {
        Potential { form: PotentialForm::Line { coefficients }, rho }
    }

    pub fn circle(constant: f64, cos: Vec<f64>, sin: Vec<f64>, rho: f64) -> Self {
        Potential { form: PotentialForm::Circle { constant, cos, sin }, rho }
    }

    /// `x^2 / 2` with `rho = 1`.
    pub fn quadratic() -> Self {
        Potential::line(vec![0.0, 0.0, 0.5], 1.0)
    }

    /// `a x^2`, certified with `rho = 2a`.
    pub fn scaled_quadratic(a: f64) -> Self {
        Potential::line(vec![0.0, 0.0, a], 2.0 * a)
    }

    /// `x^4 / 4`; not uniformly convex, so `rho` is the `0+` boundary value.
    pub fn quartic() -> Self {
        Potential::line(vec![0.0, 0.0, 0.0, 0.0, 0.25], 0.0)
    }

    pub fn zero_circle() -> Self {
        Potential::circle(0.0, vec![], vec![], 0.0)
    }

    /// `amplitude * cos t` on the circle, `rho = -|amplitude|`.
    pub fn cosine(amplitude: f64) -> Self {
        Potential::circle(0.0, vec![amplitude], vec![], -amplitude.abs())
    }

    /// Parses a TOML document holding a `[potential]` table.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PotentialFile = toml::from_str(text)?;
        file.potential.validate()?;
        Ok(file.potential)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            potential: &'a Potential,
        }
        toml::to_string(&Out { potential: self }).expect("potential serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() {
            return Err(Error::invalid("rho must be finite"));
        }
        match &self.form {
            PotentialForm::Line { coefficients } => {
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("coefficients must be finite"));
                }
            }
            PotentialForm::Circle { constant, cos, sin } => {
                if !constant.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::invalid("coefficients must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn carrier_name(&self) -> &'static str {
        match self.form {
            PotentialForm::Line { .. } => "line",
            PotentialForm::Circle { .. } => "circle",
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.form, PotentialForm::Circle { .. })
    }

    /// Whether the potential lives on the same space as `carrier`.
    pub fn matches(&self, carrier: &Carrier) -> bool {
        self.is_circle() == carrier.is_circle()
    }

    /// `Q(x)` on the line, `Q(e^{ix})` on the circle.
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Line { coefficients } => horner(coefficients, x),
            PotentialForm::Circle { constant, cos, sin } => {
                let mut v = *constant;
                for (k, a) in cos.iter().enumerate() {
                    v += a * ((k + 1) as f64 * x).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    v += b * ((k + 1) as f64 * x).sin();
                }
                v
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Line { coefficients } => {
                let d2: Vec<f64> =
                    coefficients.iter().enumerate().skip(2).map(|(k, c)| c * (k * (k - 1)) as f64).collect();
                horner(&d2, x)
            }
            PotentialForm::Circle { cos, sin, .. } => {
                let mut v = 0.0;
                for (k, a) in cos.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    v -= a * kf * kf * (kf * x).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    v -= b * kf * kf * (kf * x).sin();
                }
                v
            }
        }
    }

    /// An antiderivative of `Q` in `x` (or `t`).
    pub fn antiderivative(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Line { coefficients } => {
                let anti: Vec<f64> = std::iter::once(0.0)
                    .chain(coefficients.iter().enumerate().map(|(k, c)| c / (k + 1) as f64))
                    .collect();
                horner(&anti, x)
            }
            PotentialForm::Circle { constant, cos, sin } => {
                let mut v = constant * x;
                for (k, a) in cos.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    v += a * (kf * x).sin() / kf;
                }
                for (k, b) in sin.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    v -= b * (kf * x).cos() / kf;
                }
                v
            }
        }
    }

    /// Cell averages of `Q` for every cell of `mu` (the discretised
    /// external field).
    pub fn cell_averages(&self, mu: &GridMeasure) -> Vec<f64> {
        mu.cells()
            .iter()
            .map(|c| {
                if c.width() == 0.0 {
                    self.evaluate(c.lo)
                } else {
                    (self.antiderivative(c.hi) - self.antiderivative(c.lo)) / c.width()
                }
            })
            .collect()
    }

    /// `int Q dmu` with cell averaging.
    pub fn integrate(&self, mu: &GridMeasure) -> Result<f64> {
        if !self.matches(&mu.carrier()) {
            return Err(Error::CarrierMismatch(format!(
                "{} potential against {} measure",
                self.carrier_name(),
                mu.carrier().name()
            )));
        }
        Ok(self.cell_averages(mu).iter().zip(mu.weights()).map(|(q, w)| q * w).sum())
    }

    /// The constant term.
    pub fn constant(&self) -> f64 {
        match &self.form {
            PotentialForm::Line { coefficients } => coefficients.first().copied().unwrap_or(0.0),
            PotentialForm::Circle { constant, .. } => *constant,
        }
    }

    /// Copy with the constant term replaced.
    pub fn with_constant(&self, c: f64) -> Self {
        let mut p = self.clone();
        match &mut p.form {
            PotentialForm::Line { coefficients } => {
                if coefficients.is_empty() {
                    coefficients.push(c);
                } else {
                    coefficients[0] = c;
                }
            }
            PotentialForm::Circle { constant, .. } => *constant = c,
        }
        p
    }

    /// `Q + c`.
    pub fn shifted(&self, c: f64) -> Self {
        self.with_constant(self.constant() + c)
    }

    /// `(1 - s) self + s other` (same carrier); `rho` is interpolated.
    pub fn interpolate(&self, other: &Potential, s: f64) -> Result<Self> {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            let n = a.len().max(b.len());
            (0..n)
                .map(|k| (1.0 - s) * a.get(k).copied().unwrap_or(0.0) + s * b.get(k).copied().unwrap_or(0.0))
                .collect()
        };
        let rho = (1.0 - s) * self.rho + s * other.rho;
        match (&self.form, &other.form) {
            (PotentialForm::Line { coefficients: a }, PotentialForm::Line { coefficients: b }) => {
                Ok(Potential::line(mix(a, b), rho))
            }
            (
                PotentialForm::Circle { constant: c1, cos: a1, sin: b1 },
                PotentialForm::Circle { constant: c2, cos: a2, sin: b2 },
            ) => Ok(Potential::circle((1.0 - s) * c1 + s * c2, mix(a1, a2), mix(b1, b2), rho)),
            _ => Err(Error::CarrierMismatch("cannot interpolate line and circle potentials".into())),
        }
    }

    /// `(a, b, c)` if `Q = a x^2 + b x + c` with `a > 0`.
    pub fn as_quadratic(&self) -> Option<(f64, f64, f64)> {
        match &self.form {
            PotentialForm::Line { coefficients } => {
                if coefficients.iter().skip(3).any(|c| *c != 0.0) {
                    return None;
                }
                let get = |k: usize| coefficients.get(k).copied().unwrap_or(0.0);
                (get(2) > 0.0).then(|| (get(2), get(1), get(0)))
            }
            PotentialForm::Circle { .. } => None,
        }
    }

    /// Whether `exp(-eps Q(x)) -> 0` as `|x| -> inf` (even degree, positive
    /// leading coefficient). Always true on the circle.
    pub fn confining(&self) -> bool {
        match &self.form {
            PotentialForm::Line { coefficients } => {
                let deg = coefficients.iter().rposition(|c| *c != 0.0);
                match deg {
                    Some(d) if d >= 2 => d % 2 == 0 && coefficients[d] > 0.0,
                    _ => false,
                }
            }
            PotentialForm::Circle { .. } => true,
        }
    }

    /// Samples second differences of `Q - rho/2 x^2` on the grid.
    pub fn verify_rho_convexity(&self, grid: &[f64]) -> Result<ConvexityCheck> {
        if grid.len() < 3 {
            return Err(Error::invalid("convexity check needs a grid of at least 3 points"));
        }
        if grid.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::invalid("convexity grid must be strictly increasing"));
        }
        let f: Box<dyn Fn(f64) -> f64> = match &self.form {
            PotentialForm::Line { coefficients } => {
                let mut c = coefficients.clone();
                if c.len() < 3 {
                    c.resize(3, 0.0);
                }
                c[2] -= 0.5 * self.rho;
                Box::new(move |x| horner(&c, x))
            }
            PotentialForm::Circle { .. } => {
                let rho = self.rho;
                Box::new(move |t| self.evaluate(t) - 0.5 * rho * t * t)
            }
        };
        let values: Vec<f64> = grid.iter().map(|x| f(*x)).collect();
        let mut worst = f64::INFINITY;
        for i in 1..grid.len() - 1 {
            let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
            let d =
                2.0 * ((values[i + 1] - values[i]) / (x2 - x1) - (values[i] - values[i - 1]) / (x1 - x0)) / (x2 - x0);
            worst = worst.min(d);
        }
        let rho_admissible = if self.is_circle() { self.rho > -0.5 } else { self.rho > 0.0 };
        Ok(ConvexityCheck { holds: worst >= -CONVEXITY_TOL && rho_admissible, worst_residual: worst, rho_admissible })
    }

    /// Convexity check on a default grid: `[-radius, radius]` for the line,
    /// one period for the circle.
    pub fn certify(&self, radius: f64) -> Result<ConvexityCheck> {
        let grid: Vec<f64> = if self.is_circle() {
            (0..=2000).map(|i| TAU * i as f64 / 2000.0).collect()
        } else {
            (0..=2000).map(|i| -radius + 2.0 * radius * i as f64 / 2000.0).collect()
        };
        self.verify_rho_convexity(&grid)
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.form {
            PotentialForm::Line { coefficients } => {
                let terms: Vec<String> = coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(k, c)| match k {
                        0 => format!("{c}"),
                        1 => format!("{c}x"),
                        _ => format!("{c}x^{k}"),
                    })
                    .collect();
                if terms.is_empty() {
                    "0".into()
                } else {
                    terms.join("+")
                }
            }
            PotentialForm::Circle { constant, cos, sin } => {
                let mut terms = Vec::new();
                if *constant != 0.0 {
                    terms.push(format!("{constant}"));
                }
                for (k, a) in cos.iter().enumerate().filter(|(_, a)| **a != 0.0) {
                    terms.push(format!("{a}cos({}t)", k + 1));
                }
                for (k, b) in sin.iter().enumerate().filter(|(_, b)| **b != 0.0) {
                    terms.push(format!("{b}sin({}t)", k + 1));
                }
                if terms.is_empty() {
                    "0".into()
                } else {
                    terms.join("+")
                }
            }
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Short textual forms:
///
/// * `quadratic`, `quartic`, `zero-circle`
/// * `scaled-quadratic:A` (`A x^2`), `cosine:A` (`A cos t`)
/// * `line:c0,c1,...[@rho]`
/// * `circle:a0|a1,a2,...|b1,b2,...[@rho]`
///
/// A missing `@rho` defaults to `0` on the circle and must be given on the
/// line unless the polynomial is quadratic (then `rho = 2 c_2`).
impl std::str::FromStr for Potential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t:?} in potential {s:?}: {e}")))
        };
        let list = |t: &str| -> Result<Vec<f64>> {
            if t.trim().is_empty() {
                Ok(vec![])
            } else {
                t.split(',').map(num).collect()
            }
        };
        let (main, rho) = match s.rsplit_once('@') {
            Some((m, r)) => (m, Some(num(r)?)),
            None => (s, None),
        };
        let (head, body) = main.split_once(':').unwrap_or((main, ""));
        let p = match (head, body.is_empty()) {
            ("quadratic", true) => Potential::quadratic(),
            ("quartic", true) => Potential::quartic(),
            ("zero-circle", true) => Potential::zero_circle(),
            ("scaled-quadratic", false) => {
                let a = num(body)?;
                if !(a > 0.0) {
                    return Err(Error::invalid("scaled-quadratic needs a positive coefficient"));
                }
                Potential::scaled_quadratic(a)
            }
            ("cosine", false) => Potential::cosine(num(body)?),
            ("line", false) => {
                let c = list(body)?;
                let rho = match rho {
                    Some(r) => r,
                    None if c.len() <= 3 => 2.0 * c.get(2).copied().unwrap_or(0.0),
                    None => return Err(Error::Parse(format!("{s:?}: give rho with @rho for non-quadratic lines"))),
                };
                Potential::line(c, rho)
            }
            ("circle", false) => {
                let parts: Vec<&str> = body.split('|').collect();
                if parts.len() > 3 {
                    return Err(Error::Parse(format!("{s:?}: expected a0|cos|sin")));
                }
                let a0 =
                    parts.first().map(|t| if t.trim().is_empty() { Ok(0.0) } else { num(t) }).unwrap_or(Ok(0.0))?;
                let cos = parts.get(1).map(|t| list(t)).unwrap_or(Ok(vec![]))?;
                let sin = parts.get(2).map(|t| list(t)).unwrap_or(Ok(vec![]))?;
                Potential::circle(a0, cos, sin, rho.unwrap_or(0.0))
            }
            _ => return Err(Error::Parse(format!("unknown potential {s:?}"))),
        };
        let p = match (head, rho) {
            ("line" | "circle", _) | (_, None) => p,
            (_, Some(r)) => Potential { rho: r, ..p },
        };
        p.validate()?;
        Ok(p)
    }
}
