//! Primal network simplex for dense transportation problems.
//!
//! Spanning-tree bookkeeping (thread, reverse thread, successor counts)
//! follows the classical strongly feasible tree method, with block search
//! pricing. The initial basis is the artificial star around an extra root.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;
const TREE: i8 = 0;
const LOWER: i8 = 1;

/// Optimal transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Total cost `sum pi_ij c_ij`.
    pub cost: f64,
    /// Nonzero entries `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

struct Solver {
    m: usize,
    n: usize,
    root: usize,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    // Pivot state.
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    next_arc: usize,
    block: usize,
    tolerance: f64,
}

impl Solver {
    fn real_arcs(&self) -> usize {
        self.m * self.n
    }

    fn source(&self, e: usize) -> usize {
        let r = self.real_arcs();
        if e < r {
            e / self.n
        } else if e - r < self.m {
            e - r
        } else {
            self.root
        }
    }

    fn target(&self, e: usize) -> usize {
        let r = self.real_arcs();
        if e < r {
            self.m + e % self.n
        } else if e - r < self.m {
            self.root
        } else {
            e - r
        }
    }

    fn new(a: &[f64], b: &[f64], cost: Vec<f64>) -> Self {
        let (m, n) = (a.len(), b.len());
        let nodes = m + n;
        let root = nodes;
        let arcs = m * n + nodes;
        let max_cost = cost.iter().fold(0.0f64, |x, c| x.max(c.abs()));
        let art = (max_cost + 1.0) * nodes as f64;
        let mut s = Solver {
            m,
            n,
            root,
            cost,
            flow: vec![0.0; arcs],
            state: vec![LOWER; arcs],
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            pred_dir: vec![UP; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![1; nodes + 1],
            last_succ: vec![0; nodes + 1],
            pi: vec![0.0; nodes + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            next_arc: 0,
            block: ((m * n) as f64).sqrt().ceil().max(10.0) as usize,
            tolerance: 1e-12 * (max_cost + 1.0),
        };
        s.cost.resize(arcs, art);
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        for u in 0..nodes {
            let e = m * n + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.last_succ[u] = u;
            s.state[e] = TREE;
            if u < m {
                s.pred_dir[u] = UP;
                s.pi[u] = -art;
                s.flow[e] = a[u];
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art;
                s.flow[e] = b[u - m];
            }
        }
        s
    }

    fn find_entering_arc(&mut self) -> bool {
        let total = self.real_arcs();
        let mut min = -self.tolerance;
        let mut found = false;
        let mut count = self.block;
        let mut e = self.next_arc;
        for _ in 0..total {
            if self.state[e] == LOWER {
                let (i, j) = (e / self.n, self.m + e % self.n);
                let c = self.cost[e] + self.pi[i] - self.pi[j];
                if c < min {
                    min = c;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            if e == total {
                e = 0;
            }
            count -= 1;
            if count == 0 {
                if found {
                    break;
                }
                count = self.block;
            }
        }
        self.next_arc = e;
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let d = if self.pred_dir[u] == UP { self.flow[self.pred[u]] } else { f64::INFINITY };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let d = if self.pred_dir[u] == DOWN { self.flow[self.pred[u]] } else { f64::INFINITY };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = LOWER;
    }

    fn update_tree(&mut self) {
        let (u_in, v_in, u_out, join) = (self.u_in, self.v_in, self.u_out, self.join);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { UP } else { DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { UP } else { DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma =
            self.pi[self.v_in] - self.pi[self.u_in] - f64::from(self.pred_dir[self.u_in]) * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}

/// Exact optimal transport between weights `a` and `b` (equal totals)
/// with row-major cost matrix `cost` (`a.len() x b.len()`).
pub fn solve_transport(a: &[f64], b: &[f64], cost: Vec<f64>) -> Result<TransportPlan> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport needs nonempty marginals"));
    }
    if cost.len() != m * n {
        return Err(Error::invalid(format!("cost matrix has {} entries, expected {}", cost.len(), m * n)));
    }
    if a.iter().chain(b).any(|w| !(*w >= 0.0) || !w.is_finite()) || cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("weights must be nonnegative and costs finite"));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1e-300) {
        return Err(Error::invalid(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    // Exact balance: rescale b onto a's total and absorb roundoff in its
    // largest entry.
    let mut b: Vec<f64> = b.iter().map(|w| w * sa / sb).collect();
    let big = (0..n).max_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap_or(0);
    let rest: f64 = b.iter().enumerate().filter(|(j, _)| *j != big).map(|(_, w)| w).sum();
    b[big] = (sa - rest).max(0.0);

    let mut s = Solver::new(a, &b, cost);
    let max_pivots = 50 * (m * n + m + n) + 1000;
    let mut pivots = 0;
    while s.find_entering_arc() {
        s.find_join_node();
        if !s.find_leaving_arc() || !s.delta.is_finite() {
            return Err(Error::Numerical("transport problem unbounded; costs must be bounded below".into()));
        }
        s.change_flow();
        s.update_tree();
        s.update_potential();
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NonConvergence { iterations: pivots, residual: f64::NAN });
        }
    }
    let artificial: f64 = s.flow[m * n..].iter().sum();
    if artificial > 1e-10 * sa.max(1e-300) {
        return Err(Error::Numerical(format!("transport LP left {artificial:e} on artificial arcs")));
    }
    let mut entries = Vec::new();
    let mut total = 0.0;
    for e in 0..m * n {
        let f = s.flow[e];
        if f > 0.0 {
            entries.push((e / n, e % n, f));
            total += f * s.cost[e];
        }
    }
    Ok(TransportPlan { cost: total, entries })
}
