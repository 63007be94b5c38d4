use alloc::vec::Vec;

use super::kernel::KernelCache;
use super::smo::{Problem, Solution, SolverParams};
use super::{KernelSpec, MulticlassModel, SvmError, SvmKind, SvmModel};

fn check_samples(x: &[Vec<f64>]) -> Result<usize, SvmError> {
    let dim = x.first().ok_or(SvmError::EmptyInput)?.len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(SvmError::DimensionMismatch { expected: dim, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteFeature(i));
        }
    }
    Ok(dim)
}

fn check_common(kernel: &KernelSpec, params: &SolverParams) -> Result<(), SvmError> {
    if !kernel.is_valid() {
        return Err(SvmError::InvalidParam("kernel gamma must be positive"));
    }
    if !(params.tol > 0.0) {
        return Err(SvmError::InvalidParam("tolerance must be positive"));
    }
    Ok(())
}

/// Keeps the samples whose combined coefficient is non-zero.
fn build_model(
    kind: SvmKind,
    kernel: KernelSpec,
    x: &[Vec<f64>],
    dim: usize,
    per_sample: Vec<f64>,
    sol: &Solution,
) -> Result<SvmModel, SvmError> {
    let mut svs = Vec::new();
    let mut coeffs = Vec::new();
    for (row, c) in x.iter().zip(per_sample) {
        if c != 0.0 {
            svs.push(row.clone());
            coeffs.push(c);
        }
    }
    SvmModel::from_parts(kind, kernel, dim, svs, coeffs, -sol.rho, sol.report)
}

/// Soft-margin binary classifier; `y` holds `+1.0` / `-1.0`.
pub fn train_svc(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    kernel: KernelSpec,
    params: &SolverParams,
) -> Result<SvmModel, SvmError> {
    let dim = check_samples(x)?;
    check_common(&kernel, params)?;
    if y.len() != x.len() {
        return Err(SvmError::InvalidParam("one label per sample"));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidParam("labels must be +1 or -1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::InvalidParam("C must be positive"));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(SvmError::SingleClassInput);
    }
    let n = x.len();
    let sol = Problem {
        cache: KernelCache::new(kernel, x),
        idx: (0..n).collect(),
        sign: y.to_vec(),
        p: alloc::vec![-1.0; n],
        upper: alloc::vec![c; n],
        alpha: alloc::vec![0.0; n],
    }
    .solve(params)?;
    let coef = sol.alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    build_model(SvmKind::Svc, kernel, x, dim, coef, &sol)
}

/// One-class SVM with box `1/(νℓ)` and `Σα = 1`; `f(x) < 0` marks outliers.
pub fn train_one_class(x: &[Vec<f64>], nu: f64, kernel: KernelSpec, params: &SolverParams) -> Result<SvmModel, SvmError> {
    let dim = check_samples(x)?;
    check_common(&kernel, params)?;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(SvmError::InvalidNu(nu));
    }
    let n = x.len();
    if n < 2 {
        return Err(SvmError::InvalidParam("one-class training needs at least 2 samples"));
    }
    let bound = 1.0 / (nu * n as f64);
    // feasible start: fill variables at the bound until the mass reaches 1
    let mut alpha = alloc::vec![0.0; n];
    let mut left: f64 = 1.0;
    for a in alpha.iter_mut() {
        if left <= 0.0 {
            break;
        }
        *a = left.min(bound);
        left -= *a;
    }
    // tolerance is measured in units where every α is bounded by 1
    let scaled = SolverParams { tol: params.tol * bound, ..*params };
    let sol = Problem {
        cache: KernelCache::new(kernel, x),
        idx: (0..n).collect(),
        sign: alloc::vec![1.0; n],
        p: alloc::vec![0.0; n],
        upper: alloc::vec![bound; n],
        alpha,
    }
    .solve(&scaled)?;
    let coef = sol.alpha.clone();
    build_model(SvmKind::OneClass, kernel, x, dim, coef, &sol)
}

/// ε-insensitive support vector regression.
pub fn train_svr(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epsilon: f64,
    kernel: KernelSpec,
    params: &SolverParams,
) -> Result<SvmModel, SvmError> {
    let dim = check_samples(x)?;
    check_common(&kernel, params)?;
    if y.len() != x.len() {
        return Err(SvmError::InvalidParam("one target per sample"));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(SvmError::NonFiniteTarget(i));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::InvalidParam("C must be positive"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(SvmError::InvalidParam("epsilon must be non-negative"));
    }
    let n = x.len();
    // variables 0..n are α (sign +1), n..2n are α* (sign -1)
    let mut p = Vec::with_capacity(2 * n);
    p.extend(y.iter().map(|v| epsilon - v));
    p.extend(y.iter().map(|v| epsilon + v));
    let mut sign = alloc::vec![1.0; n];
    sign.extend(core::iter::repeat_n(-1.0, n));
    let sol = Problem {
        cache: KernelCache::new(kernel, x),
        idx: (0..2 * n).map(|k| k % n).collect(),
        sign,
        p,
        upper: alloc::vec![c; 2 * n],
        alpha: alloc::vec![0.0; 2 * n],
    }
    .solve(params)?;
    let coef = (0..n).map(|i| sol.alpha[i] - sol.alpha[n + i]).collect();
    build_model(SvmKind::Svr, kernel, x, dim, coef, &sol)
}

/// One-versus-rest classifiers, one per distinct label in ascending order.
pub fn train_multiclass(
    x: &[Vec<f64>],
    y: &[usize],
    c: f64,
    kernel: KernelSpec,
    params: &SolverParams,
) -> Result<MulticlassModel, SvmError> {
    if y.len() != x.len() {
        return Err(SvmError::InvalidParam("one label per sample"));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::TooFewClasses(classes.len()));
    }
    let mut models = Vec::with_capacity(classes.len());
    for &class in &classes {
        let target: Vec<f64> = y.iter().map(|&v| if v == class { 1.0 } else { -1.0 }).collect();
        models.push(train_svc(x, &target, c, kernel, params)?);
    }
    Ok(MulticlassModel { classes, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tight() -> SolverParams {
        SolverParams { tol: 1e-9, ..SolverParams::default() }
    }

    #[test]
    fn two_point_margin_midpoint() {
        let x = vec![vec![-1.0, 0.0], vec![3.0, 0.0]];
        let m = train_svc(&x, &[-1.0, 1.0], 1e3, KernelSpec::Linear, &tight()).unwrap();
        assert!(m.decision(&[1.0, 0.0]).unwrap().abs() < 1e-9);
        assert!((m.decision(&[3.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            train_svc(&x, &[1.0, 1.0], 1.0, KernelSpec::Linear, &tight()),
            Err(SvmError::SingleClassInput)
        );
        assert_eq!(
            train_one_class(&x, 1.0, KernelSpec::Linear, &tight()),
            Err(SvmError::InvalidNu(1.0))
        );
        let bad = vec![vec![f64::NAN], vec![1.0]];
        assert_eq!(
            train_svc(&bad, &[1.0, -1.0], 1.0, KernelSpec::Linear, &tight()),
            Err(SvmError::NonFiniteFeature(0))
        );
        assert_eq!(
            train_svr(&x, &[0.0, f64::INFINITY], 1.0, 0.1, KernelSpec::Linear, &tight()),
            Err(SvmError::NonFiniteTarget(1))
        );
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let params = SolverParams { tol: 1e-12, max_iter: 1 };
        assert!(matches!(
            train_svc(&x, &y, 10.0, KernelSpec::Rbf { gamma: 0.5 }, &params),
            Err(SvmError::NonConvergence { .. })
        ));
    }

    #[test]
    fn constant_target_regression() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.3]).collect();
        let m = train_svr(&x, &[2.5; 8], 1.0, 0.0, KernelSpec::Rbf { gamma: 1.0 }, &tight()).unwrap();
        for xi in &x {
            assert!((m.decision(xi).unwrap() - 2.5).abs() < 1e-6);
        }
    }
}
