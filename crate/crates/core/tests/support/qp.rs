//! Reference solver for the kernel-machine duals: accelerated projected
//! gradient (FISTA with restarts) on
//!
//!   min ½ aᵀQa + pᵀa   s.t.  sᵀa = total,  0 <= a <= u
//!
//! The projection onto the feasible set is computed by bisection on the
//! multiplier of the equality constraint. The offset is recovered from the
//! KKT conditions. Nothing here shares code with the SMO solver.

#![allow(dead_code)]

use pdm_core::svm::KernelSpec;

pub struct QpSolution {
    pub objective: f64,
    pub alpha: Vec<f64>,
    /// `ρ` such that `f(x) = Σ s_i a_i K(x_i, x) - ρ`.
    pub rho: f64,
}

fn project(v: &[f64], s: &[f64], u: &[f64], total: f64, out: &mut [f64]) {
    let gap = |lam: f64| -> f64 {
        v.iter()
            .zip(s)
            .zip(u)
            .map(|((vi, si), ui)| si * (vi - lam * si).clamp(0.0, *ui))
            .sum::<f64>()
            - total
    };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + u.iter().fold(0.0f64, |m, x| m.max(*x)) + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    for (((o, vi), si), ui) in out.iter_mut().zip(v).zip(s).zip(u) {
        *o = (vi - lam * si).clamp(0.0, *ui);
    }
}

fn objective(q: &[Vec<f64>], p: &[f64], a: &[f64]) -> f64 {
    let mut obj = 0.0;
    for i in 0..a.len() {
        let qa: f64 = q[i].iter().zip(a).map(|(x, y)| x * y).sum();
        obj += 0.5 * a[i] * qa + p[i] * a[i];
    }
    obj
}

fn largest_eigenvalue(q: &[Vec<f64>]) -> f64 {
    let n = q.len();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = q.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

pub fn solve(q: &[Vec<f64>], p: &[f64], s: &[f64], u: &[f64], total: f64) -> QpSolution {
    let n = p.len();
    let step = 1.0 / (largest_eigenvalue(q) * 1.05 + 1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n).map(|i| q[i].iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + p[i]).collect()
    };
    let mut a = vec![0.0; n];
    project(&vec![0.0; n], s, u, total, &mut a);
    let mut y = a.clone();
    let mut next = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut t = 1.0f64;
    let mut f_prev = objective(q, p, &a);
    let mut quiet = 0;
    for _ in 0..200_000 {
        let g = grad(&y);
        for ((tr, yi), gi) in trial.iter_mut().zip(&y).zip(&g) {
            *tr = yi - step * gi;
        }
        project(&trial, s, u, total, &mut next);
        let f = objective(q, p, &next);
        if f > f_prev {
            // restart momentum
            t = 1.0;
            y.copy_from_slice(&a);
            continue;
        }
        let moved = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        for ((yi, x), prev) in y.iter_mut().zip(&next).zip(&a) {
            *yi = x + (t - 1.0) / t_next * (x - prev);
        }
        a.copy_from_slice(&next);
        t = t_next;
        f_prev = f;
        quiet = if moved < 1e-13 { quiet + 1 } else { 0 };
        if quiet >= 20 {
            break;
        }
    }
    let g = grad(&a);
    let margin = 1e-7;
    let (mut free_sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let yg = s[i] * g[i];
        let lower = a[i] <= margin * u[i];
        let upper = a[i] >= u[i] * (1.0 - margin);
        if !lower && !upper {
            free_sum += yg;
            free += 1;
        } else if (upper && s[i] > 0.0) || (lower && s[i] < 0.0) {
            lb = lb.max(yg);
        } else {
            ub = ub.min(yg);
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };
    QpSolution { objective: objective(q, p, &a), alpha: a, rho }
}

fn gram(kernel: KernelSpec, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|a| x.iter().map(|b| kernel.eval(a, b)).collect()).collect()
}

/// Oracle solution and the per-sample expansion coefficients.
pub struct Reference {
    pub objective: f64,
    pub coef: Vec<f64>,
    pub offset: f64,
    pub kernel: KernelSpec,
    pub x: Vec<Vec<f64>>,
}

impl Reference {
    pub fn decision(&self, z: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(&self.coef)
            .map(|(xi, c)| c * self.kernel.eval(xi, z))
            .sum::<f64>()
            + self.offset
    }
}

pub fn svc(x: &[Vec<f64>], y: &[f64], c: f64, kernel: KernelSpec) -> Reference {
    let k = gram(kernel, x);
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let sol = solve(&q, &vec![-1.0; n], y, &vec![c; n], 0.0);
    Reference {
        objective: sol.objective,
        coef: sol.alpha.iter().zip(y).map(|(a, y)| a * y).collect(),
        offset: -sol.rho,
        kernel,
        x: x.to_vec(),
    }
}

pub fn one_class(x: &[Vec<f64>], nu: f64, kernel: KernelSpec) -> Reference {
    let q = gram(kernel, x);
    let n = x.len();
    let sol = solve(&q, &vec![0.0; n], &vec![1.0; n], &vec![1.0 / (nu * n as f64); n], 1.0);
    Reference { objective: sol.objective, coef: sol.alpha, offset: -sol.rho, kernel, x: x.to_vec() }
}

pub fn svr(x: &[Vec<f64>], y: &[f64], c: f64, eps: f64, kernel: KernelSpec) -> Reference {
    let k = gram(kernel, x);
    let n = x.len();
    let s: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let q: Vec<Vec<f64>> = (0..2 * n)
        .map(|i| (0..2 * n).map(|j| s[i] * s[j] * k[i % n][j % n]).collect())
        .collect();
    let p: Vec<f64> = (0..2 * n).map(|i| if i < n { eps - y[i] } else { eps + y[i - n] }).collect();
    let sol = solve(&q, &p, &s, &vec![c; 2 * n], 0.0);
    Reference {
        objective: sol.objective,
        coef: (0..n).map(|i| sol.alpha[i] - sol.alpha[n + i]).collect(),
        offset: -sol.rho,
        kernel,
        x: x.to_vec(),
    }
}
