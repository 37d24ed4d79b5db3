//! Uniform-weight couplings of two equal-size samples: exact assignment
//! and entropic regularisation with a certified duality gap.

use crate::error::{Error, Result};

/// Square cost matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..n * n).map(|k| f(k / n, k % n)).collect();
        CostMatrix { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn median(&self) -> f64 {
        let mut v = self.data.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }
}

/// Minimum-cost perfect matching, shortest augmenting paths with
/// potentials. Returns the mean cost and `col[i]` for each row.
pub fn hungarian(c: &CostMatrix) -> (f64, Vec<usize>) {
    let n = c.n;
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[p[j] - 1] = j - 1;
    }
    let total: f64 = (0..n).map(|i| c.get(i, col[i])).sum();
    (total / n as f64, col)
}

/// Entropic coupling bracket: `lower <= OT <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropicBounds {
    /// Cost of the rounded (exactly feasible) entropic plan.
    pub upper: f64,
    /// Value of a c-transformed dual pair.
    pub lower: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn with epsilon scaling down to `epsilon`, uniform
/// marginals.
pub fn sinkhorn(c: &CostMatrix, epsilon: f64, max_iterations: usize) -> Result<EntropicBounds> {
    let n = c.n;
    if n == 0 {
        return Err(Error::invalid("empty cost matrix"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("entropic regularisation must be positive"));
    }
    let log_w = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let cmax = c.data.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut eps = cmax.max(epsilon);
    let mut iterations = 0;
    loop {
        // Intermediate stages only need a warm start for the next one.
        let (tol, cap) = if eps <= epsilon { (1e-7, max_iterations) } else { (1e-4, max_iterations.min(100)) };
        for _ in 0..cap {
            iterations += 1;
            for (i, fi) in f.iter_mut().enumerate() {
                let row = g.iter().enumerate().map(|(j, gj)| (gj - c.get(i, j)) / eps);
                *fi = eps * (log_w - log_sum_exp(row));
            }
            let mut err = 0.0;
            for (j, gj) in g.iter_mut().enumerate() {
                let col = f.iter().enumerate().map(|(i, fi)| (fi - c.get(i, j)) / eps);
                let lse = log_sum_exp(col);
                // Column mass before the update, against 1/n.
                err += ((lse + *gj / eps).exp() - 1.0 / n as f64).abs();
                *gj = eps * (log_w - lse);
            }
            if err < tol {
                break;
            }
        }
        if eps <= epsilon {
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }

    // Round the plan onto the marginals.
    let target = 1.0 / n as f64;
    let mut plan: Vec<f64> = (0..n * n).map(|k| ((f[k / n] + g[k % n] - c.data[k]) / eps).exp()).collect();
    for i in 0..n {
        let r: f64 = plan[i * n..(i + 1) * n].iter().sum();
        if r > target {
            let s = target / r;
            plan[i * n..(i + 1) * n].iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..n {
        let col: f64 = (0..n).map(|i| plan[i * n + j]).sum();
        if col > target {
            let s = target / col;
            (0..n).for_each(|i| plan[i * n + j] *= s);
        }
    }
    let row_err: Vec<f64> = (0..n).map(|i| target - plan[i * n..(i + 1) * n].iter().sum::<f64>()).collect();
    let col_err: Vec<f64> = (0..n).map(|j| target - (0..n).map(|i| plan[i * n + j]).sum::<f64>()).collect();
    let mass: f64 = row_err.iter().sum();
    let mut upper = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut x = plan[i * n + j];
            if mass > 0.0 {
                x += row_err[i].max(0.0) * col_err[j].max(0.0) / mass;
            }
            upper += x * c.get(i, j);
        }
    }

    // c-transforms give a feasible dual pair.
    let fc: Vec<f64> = (0..n).map(|i| (0..n).map(|j| c.get(i, j) - g[j]).fold(f64::INFINITY, f64::min)).collect();
    let gc: Vec<f64> = (0..n).map(|j| (0..n).map(|i| c.get(i, j) - fc[i]).fold(f64::INFINITY, f64::min)).collect();
    let lower = (fc.iter().sum::<f64>() + gc.iter().sum::<f64>()) * target;
    Ok(EntropicBounds { upper, lower, epsilon: eps, iterations })
}
