//! Sequential minimal optimisation for the common dual
//!
//! ```text
//! min  ½ aᵀQa + pᵀa   s.t.  sᵀa = const,  0 <= a_i <= u_i
//! ```
//!
//! with `Q_ij = s_i s_j K(x[idx_i], x[idx_j])` and `s_i = ±1`. SVC, the
//! one-class SVM and ε-SVR are all instances of this problem.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::KernelCache;
use super::SvmError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Stop once the maximal KKT violation pair is below this.
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { tol: 1e-3, max_iter: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: u64,
    /// Value of `½ aᵀQa + pᵀa` at the returned point.
    pub dual_objective: f64,
    /// Maximal violating-pair gap at termination.
    pub kkt_gap: f64,
}

#[derive(Debug)]
pub(crate) struct Problem<'a> {
    pub cache: KernelCache<'a>,
    /// Kernel sample behind each variable.
    pub idx: Vec<usize>,
    pub sign: Vec<f64>,
    pub p: Vec<f64>,
    pub upper: Vec<f64>,
    /// Feasible starting point.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// Value `ρ` such that the decision function is `Σ s_i a_i K(x_i, x) - ρ`.
    pub rho: f64,
    pub report: SolveReport,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.idx.len()
    }

    fn q_diag(&self, i: usize) -> f64 {
        self.cache.diag(self.idx[i])
    }

    fn q_column(&mut self, i: usize, out: &mut [f64]) {
        let si = self.sign[i];
        let k = self.cache.column(self.idx[i]);
        for ((o, &j), &sj) in out.iter_mut().zip(&self.idx).zip(&self.sign) {
            *o = si * sj * k[j];
        }
    }

    fn at_upper(&self, i: usize) -> bool {
        self.alpha[i] >= self.upper[i]
    }

    fn at_lower(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0
    }

    pub fn solve(mut self, params: &SolverParams) -> Result<Solution, SvmError> {
        let n = self.n();
        let mut grad = self.p.clone();
        let mut qi = alloc::vec![0.0; n];
        let mut qj = alloc::vec![0.0; n];
        for i in 0..n {
            if self.alpha[i] != 0.0 {
                let a = self.alpha[i];
                self.q_column(i, &mut qi);
                for (g, q) in grad.iter_mut().zip(&qi) {
                    *g += a * q;
                }
            }
        }

        let mut iterations = 0u64;
        let gap;
        loop {
            // i: maximal violator; j: largest second-order decrease with i
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..n {
                if self.sign[t] > 0.0 {
                    if !self.at_upper(t) && -grad[t] >= gmax {
                        gmax = -grad[t];
                        i_sel = Some(t);
                    }
                } else if !self.at_lower(t) && grad[t] >= gmax {
                    gmax = grad[t];
                    i_sel = Some(t);
                }
            }
            let Some(i) = i_sel else {
                gap = 0.0;
                break;
            };
            self.q_column(i, &mut qi);
            let qd_i = self.q_diag(i);
            let si = self.sign[i];

            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = None;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                let (grad_diff, quad) = if self.sign[t] > 0.0 {
                    if self.at_lower(t) {
                        continue;
                    }
                    gmax2 = gmax2.max(grad[t]);
                    (gmax + grad[t], qd_i + self.q_diag(t) - 2.0 * si * qi[t])
                } else {
                    if self.at_upper(t) {
                        continue;
                    }
                    gmax2 = gmax2.max(-grad[t]);
                    (gmax - grad[t], qd_i + self.q_diag(t) + 2.0 * si * qi[t])
                };
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
            let current_gap = gmax + gmax2;
            let Some(j) = j_sel.filter(|_| current_gap > params.tol) else {
                gap = current_gap.max(0.0);
                break;
            };
            if iterations >= params.max_iter {
                return Err(SvmError::NonConvergence { iterations });
            }
            iterations += 1;

            self.q_column(j, &mut qj);
            let (ci, cj) = (self.upper[i], self.upper[j]);
            let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
            let (mut ai, mut aj) = (old_i, old_j);
            if self.sign[i] != self.sign[j] {
                let mut quad = qd_i + self.q_diag(j) + 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
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
                if diff > ci - cj {
                    if ai > ci {
                        ai = ci;
                        aj = ci - diff;
                    }
                } else if aj > cj {
                    aj = cj;
                    ai = cj + diff;
                }
            } else {
                let mut quad = qd_i + self.q_diag(j) - 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > ci {
                    if ai > ci {
                        ai = ci;
                        aj = sum - ci;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > cj {
                    if aj > cj {
                        aj = cj;
                        ai = sum - cj;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            // rounding in `sum - c` can leave a variable a few ulps off its bound
            self.alpha[i] = snap(ai, ci);
            self.alpha[j] = snap(aj, cj);
            let (di, dj) = (ai - old_i, aj - old_j);
            for t in 0..n {
                grad[t] += qi[t] * di + qj[t] * dj;
            }
        }

        let rho = self.rho(&grad);
        let dual_objective = 0.5
            * self
                .alpha
                .iter()
                .zip(&grad)
                .zip(&self.p)
                .map(|((a, g), p)| a * (g + p))
                .sum::<f64>();
        Ok(Solution {
            alpha: self.alpha,
            rho,
            report: SolveReport { iterations, dual_objective, kkt_gap: gap },
        })
    }

    fn rho(&self, grad: &[f64]) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free = 0usize;
        let mut free_sum = 0.0;
        for i in 0..self.n() {
            let yg = self.sign[i] * grad[i];
            let positive = self.sign[i] > 0.0;
            if self.at_upper(i) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.at_lower(i) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        if free > 0 {
            free_sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else if lb.is_finite() {
            lb
        } else {
            0.0
        }
    }
}

fn snap(a: f64, upper: f64) -> f64 {
    let tol = 4.0 * f64::EPSILON * upper;
    if a <= tol {
        0.0
    } else if a >= upper - tol {
        upper
    } else {
        a
    }
}

