//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α_i ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs are chosen by maximal violation for `i` and second-order
//! gain for `j`. The solver stops when the KKT gap `m(α) − M(α)` drops below
//! the tolerance or the iteration cap is hit.

use super::cache::RowCache;
use super::svm::Kernel;

const TAU: f64 = 1e-12;

pub(crate) struct Problem<'a> {
    /// `l × d` row-major features.
    pub x: &'a [f64],
    pub d: usize,
    /// Targets, each ±1.
    pub y: &'a [f64],
    pub kernel: Kernel,
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub cache_bytes: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) − rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Solver<'a> {
    p: &'a Problem<'a>,
    l: usize,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    diag: Vec<f64>,
    cache: RowCache,
}

impl<'a> Solver<'a> {
    fn kernel_row(&mut self, i: usize) -> std::sync::Arc<[f64]> {
        let (p, l) = (self.p, self.l);
        self.cache.get_or_insert_with(i, || {
            let xi = &p.x[i * p.d..(i + 1) * p.d];
            (0..l)
                .map(|k| p.kernel.eval(xi, &p.x[k * p.d..(k + 1) * p.d]))
                .collect()
        })
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.p.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Returns `None` once the KKT gap is within tolerance.
    fn select_pair(&mut self) -> Option<(usize, usize)> {
        let y = self.p.y;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_max_idx = None;
        for (t, &yt) in y.iter().enumerate() {
            let v = -yt * self.grad[t];
            let movable_up = if yt > 0.0 {
                !self.at_upper(t)
            } else {
                !self.at_lower(t)
            };
            if movable_up && v >= g_max {
                g_max = v;
                g_max_idx = Some(t);
            }
        }
        let i = g_max_idx?;
        let ki = self.kernel_row(i);

        let mut g_max2 = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut best_obj = f64::INFINITY;
        for j in 0..self.l {
            let movable_down = if y[j] > 0.0 {
                !self.at_lower(j)
            } else {
                !self.at_upper(j)
            };
            if !movable_down {
                continue;
            }
            let yg = y[j] * self.grad[j];
            g_max2 = g_max2.max(yg);
            let grad_diff = g_max + yg;
            if grad_diff > 0.0 {
                let quad = self.diag[i] + self.diag[j] - 2.0 * ki[j];
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    best_j = Some(j);
                }
            }
        }
        if g_max + g_max2 < self.p.tolerance {
            return None;
        }
        best_j.map(|j| (i, j))
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (y, c) = (self.p.y, self.p.c);
        let ki = self.kernel_row(i);
        let kj = self.kernel_row(j);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qij = y[i] * y[j] * ki[j];

        if y[i] != y[j] {
            let quad = (self.diag[i] + self.diag[j] + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (self.diag[i] + self.diag[j] - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for k in 0..self.l {
            self.grad[k] += y[k] * (y[i] * ki[k] * di + y[j] * kj[k] * dj);
        }
    }

    fn rho(&self) -> f64 {
        let y = self.p.y;
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut n_free, mut sum_free) = (0usize, 0.0);
        for (t, &yt) in y.iter().enumerate() {
            let yg = yt * self.grad[t];
            if self.at_upper(t) {
                if yt < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if yt > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

pub(crate) fn solve(p: &Problem<'_>) -> Solution {
    let l = p.y.len();
    let diag = (0..l)
        .map(|i| {
            let xi = &p.x[i * p.d..(i + 1) * p.d];
            p.kernel.eval(xi, xi)
        })
        .collect();
    let mut s = Solver {
        p,
        l,
        alpha: vec![0.0; l],
        grad: vec![-1.0; l],
        diag,
        cache: RowCache::with_budget(p.cache_bytes, l),
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < p.max_iterations {
        match s.select_pair() {
            None => {
                converged = true;
                break;
            }
            Some((i, j)) => {
                s.update_pair(i, j);
                iterations += 1;
            }
        }
    }
    if !converged && s.select_pair().is_none() {
        converged = true;
    }
    let rho = s.rho();
    Solution {
        alpha: s.alpha,
        rho,
        iterations,
        converged,
    }
}
