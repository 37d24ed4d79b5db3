//! Cell-pair averaged logarithmic kernel.
//!
//! A grid measure is read as a piecewise-constant density over its cells, so
//! the energy double integral becomes `w^T K w` with
//! `K[i][j] = mean of log|x - y|` over `x` in cell `i`, `y` in cell `j`.
//! The diagonal log singularity is integrated in closed form.

use rayon::prelude::*;
use std::f64::consts::PI;

use super::{Carrier, Cell};
use crate::quadrature::gauss_legendre;

/// Far-field switch: beyond this many cell widths the averaged kernel is
/// evaluated by its moment expansion instead of the closed form, which
/// suffers cancellation.
const FAR_FIELD_WIDTHS: f64 = 12.0;

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone)]
pub struct LogKernel {
    n: usize,
    data: Vec<f64>,
}

impl LogKernel {
    pub fn assemble(carrier: &Carrier, cells: &[Cell]) -> Self {
        let n = cells.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| match carrier {
                        Carrier::Interval { .. } => interval_pair_mean(&cells[i], &cells[j]),
                        Carrier::Circle => circle_pair_mean(&cells[i], &cells[j]),
                    })
                    .collect()
            })
            .collect();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend(r);
        }
        // Exact symmetry; the two evaluation orders can differ in the last bit.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        LogKernel { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `K w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n);
        (0..self.n).into_par_iter().map(|i| dot(self.row(i), w)).collect()
    }

    /// `w^T K w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let kw = self.apply(w);
        dot(&kw, w)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Second antiderivative of `log|t|`.
fn phi(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * t.abs().ln() - 0.75 * t * t
    }
}

/// Mean of `log|u|` for `u = (d + X - Y)` with `X`, `Y` uniform on centred
/// intervals of widths `w1`, `w2`.
fn log_abs_pair_mean(d: f64, w1: f64, w2: f64) -> f64 {
    let wmax = w1.max(w2);
    if wmax == 0.0 {
        return if d == 0.0 { f64::NEG_INFINITY } else { d.abs().ln() };
    }
    if d.abs() >= FAR_FIELD_WIDTHS * wmax {
        // log|d| + E log(1 + u/d), odd moments of u vanish.
        let m = |w: f64, k: i32| (0.5 * w).powi(k) / (k as f64 + 1.0);
        let u2 = m(w1, 2) + m(w2, 2);
        let u4 = m(w1, 4) + 6.0 * m(w1, 2) * m(w2, 2) + m(w2, 4);
        let u6 = m(w1, 6) + 15.0 * m(w1, 4) * m(w2, 2) + 15.0 * m(w1, 2) * m(w2, 4) + m(w2, 6);
        let r2 = 1.0 / (d * d);
        return d.abs().ln() - u2 * r2 / 2.0 - u4 * r2 * r2 / 4.0 - u6 * r2 * r2 * r2 / 6.0;
    }
    if w1 == 0.0 || w2 == 0.0 {
        // One point, one segment: mean of log|d + s| for s over a segment.
        let w = w1.max(w2);
        let psi = |t: f64| if t == 0.0 { 0.0 } else { t * t.abs().ln() - t };
        return (psi(d + 0.5 * w) - psi(d - 0.5 * w)) / w;
    }
    // x in [a, b], y in [c, e] with centre difference d.
    let (a, b) = (d - 0.5 * w1, d + 0.5 * w1);
    let (c, e) = (-0.5 * w2, 0.5 * w2);
    (phi(b - c) - phi(a - c) - phi(b - e) + phi(a - e)) / (w1 * w2)
}

fn interval_pair_mean(ci: &Cell, cj: &Cell) -> f64 {
    let d = ci.mid() - cj.mid();
    log_abs_pair_mean(d, ci.width(), cj.width())
}

/// `log(2 sin(u/2) / u)`, smooth on `|u| < 2 pi`.
fn circle_smooth_part(u: f64) -> f64 {
    let h = 0.5 * u;
    if h.abs() < 1e-4 {
        let h2 = h * h;
        -h2 / 6.0 - h2 * h2 / 180.0
    } else {
        (h.sin() / h).ln()
    }
}

fn wrap_to_pi(mut d: f64) -> f64 {
    d %= 2.0 * PI;
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

fn circle_pair_mean(ci: &Cell, cj: &Cell) -> f64 {
    // log|e^{is} - e^{it}| = log|u| + log(2 sin(u/2)/u) for |u| < 2 pi.
    let d = wrap_to_pi(ci.mid() - cj.mid());
    let (w1, w2) = (ci.width(), cj.width());
    let singular = log_abs_pair_mean(d, w1, w2);
    let (x, w) = gauss_legendre(4);
    let mut smooth = 0.0;
    for (xa, wa) in x.iter().zip(&w) {
        for (xb, wb) in x.iter().zip(&w) {
            let u = d + 0.5 * w1 * xa - 0.5 * w2 * xb;
            smooth += 0.25 * wa * wb * circle_smooth_part(u);
        }
    }
    singular + smooth
}
