#[path = "support/instances.rs"]
mod instances;
#[path = "support/qp.rs"]
mod qp;

use pdm_core::svm::{
    train_multiclass, train_one_class, train_svc, train_svr, KernelSpec, SolverParams, SvmModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn tight() -> SolverParams {
    SolverParams { tol: 1e-10, ..SolverParams::default() }
}

fn max_probe_gap(model: &SvmModel, reference: &qp::Reference, probes: &[Vec<f64>]) -> f64 {
    probes
        .iter()
        .chain(&reference.x)
        .map(|z| (model.decision(z).unwrap() - reference.decision(z)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn svc_matches_projected_gradient_oracle() {
    for seed in 0..40 {
        let inst = instances::instance(seed);
        let m = train_svc(&inst.x, &inst.labels, inst.c, inst.kernel, &tight()).unwrap();
        let r = qp::svc(&inst.x, &inst.labels, inst.c, inst.kernel);
        let d = (m.report().dual_objective - r.objective).abs();
        assert!(d < 1e-6, "seed {seed}: objective gap {d}");
        let g = max_probe_gap(&m, &r, &inst.probes);
        assert!(g < 1e-4, "seed {seed}: decision gap {g}");
    }
}

#[test]
fn one_class_matches_projected_gradient_oracle() {
    for seed in 100..140 {
        let inst = instances::instance(seed);
        let m = train_one_class(&inst.x, inst.nu, inst.kernel, &tight()).unwrap();
        let r = qp::one_class(&inst.x, inst.nu, inst.kernel);
        let d = (m.report().dual_objective - r.objective).abs();
        assert!(d < 1e-6, "seed {seed}: objective gap {d}");
        let g = max_probe_gap(&m, &r, &inst.probes);
        assert!(g < 1e-4, "seed {seed}: decision gap {g}");
    }
}

#[test]
fn svr_matches_projected_gradient_oracle() {
    for seed in 200..240 {
        let inst = instances::instance(seed);
        let m = train_svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel, &tight()).unwrap();
        let r = qp::svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel);
        let d = (m.report().dual_objective - r.objective).abs();
        assert!(d < 1e-6, "seed {seed}: objective gap {d}");
        let g = max_probe_gap(&m, &r, &inst.probes);
        assert!(g < 1e-4, "seed {seed}: decision gap {g}");
    }
}

#[test]
fn svr_without_free_vectors_matches_oracle_offset() {
    // every coefficient ends on a bound; one only up to rounding
    let inst = instances::instance(30_048);
    let m = train_svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel, &tight()).unwrap();
    assert!(m.dual_coeffs().iter().all(|c| c.abs() == inst.c));
    let r = qp::svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel);
    assert!(max_probe_gap(&m, &r, &inst.probes) < 1e-4);
}

#[test]
fn svc_rbf_twelve_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let y: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let kernel = KernelSpec::Rbf { gamma: 0.5 };
    let m = train_svc(&x, &y, 1.0, kernel, &tight()).unwrap();
    let r = qp::svc(&x, &y, 1.0, kernel);
    assert!((m.report().dual_objective - r.objective).abs() < 1e-6);
    let probes: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 5.0 - 2.0, 1.0 - i as f64 / 10.0]).collect();
    assert!(max_probe_gap(&m, &r, &probes) < 1e-4);
}

fn blob(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

#[test]
fn nu_bounds_outliers_and_support_vectors() {
    let n = 200;
    for seed in 0..5 {
        let x = blob(seed, n);
        for nu in [0.05, 0.1, 0.5] {
            let m = train_one_class(&x, nu, KernelSpec::Rbf { gamma: 0.5 }, &SolverParams::default()).unwrap();
            // points within the solver tolerance of the boundary are on it
            let band = m.report().kkt_gap;
            let outliers = x.iter().filter(|r| m.decision(r).unwrap() < -band).count() as f64 / n as f64;
            let svs = m.n_support() as f64 / n as f64;
            assert!(outliers <= nu + 1.0 / n as f64, "nu {nu}: outliers {outliers}");
            assert!(svs >= nu - 1.0 / n as f64, "nu {nu}: svs {svs}");
        }
    }
}

#[test]
fn tight_cluster_small_nu() {
    let x: Vec<Vec<f64>> = blob(3, 200).into_iter().map(|r| vec![r[0] * 0.01, r[1] * 0.01]).collect();
    let m = train_one_class(&x, 0.01, KernelSpec::Rbf { gamma: 1.0 }, &SolverParams::default()).unwrap();
    let band = m.report().kkt_gap;
    let inside = x.iter().filter(|r| m.decision(r).unwrap() >= -band).count();
    assert!(inside >= 198, "{inside}");
}

#[test]
fn far_point_scores_below_training_data() {
    let x = blob(4, 100);
    let m = train_one_class(&x, 0.1, KernelSpec::Rbf { gamma: 0.5 }, &SolverParams::default()).unwrap();
    let far = m.decision(&[40.0, -40.0]).unwrap();
    assert!((far - m.offset()).abs() < 1e-12);
    assert!(x.iter().all(|r| m.decision(r).unwrap() > far));
}

#[test]
fn epsilon_tube_on_linear_data() {
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0, ((i * 7) % 11) as f64 / 5.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - 0.5 * r[1] + 1.0).collect();
    let eps = 0.1;
    let m = train_svr(&x, &y, 10.0, eps, KernelSpec::Linear, &SolverParams { tol: 1e-8, ..Default::default() }).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert!((m.decision(r).unwrap() - t).abs() <= eps + 1e-6);
    }
    for (sv, c) in m.support_vectors().iter().zip(m.dual_coeffs()) {
        let residual = (m.decision(sv).unwrap() - y[x.iter().position(|r| r == sv).unwrap()]).abs();
        assert!(residual >= eps - 1e-6 || *c == 0.0, "inside-tube point with coefficient {c}");
    }
}

#[test]
fn duplicated_separable_dataset_keeps_decisions() {
    let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| if i < 5 { -1.0 } else { 1.0 }).collect();
    let mut x2 = x.clone();
    x2.extend(x.iter().cloned());
    let mut y2 = y.clone();
    y2.extend(&y);
    let kernel = KernelSpec::Rbf { gamma: 0.3 };
    let a = train_svc(&x, &y, 1e4, kernel, &tight()).unwrap();
    let b = train_svc(&x2, &y2, 1e4, kernel, &tight()).unwrap();
    for i in 0..40 {
        let z = [i as f64 / 4.0 - 0.5, (i % 5) as f64 / 2.0];
        assert!((a.decision(&z).unwrap() - b.decision(&z).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn free_support_vectors_sit_on_the_margin() {
    for seed in 0..10 {
        let inst = instances::instance(seed * 2 + 1);
        let m = train_svc(&inst.x, &inst.labels, inst.c, inst.kernel, &SolverParams::default()).unwrap();
        for (sv, coef) in m.support_vectors().iter().zip(m.dual_coeffs()) {
            if coef.abs() < inst.c * (1.0 - 1e-9) {
                let f = m.decision(sv).unwrap();
                assert!((f.abs() - 1.0).abs() < 2e-3, "seed {seed}: |f| = {}", f.abs());
            }
        }
    }
}

#[test]
fn two_class_one_vs_rest_is_antisymmetric() {
    let inst = instances::instance(5);
    let y: Vec<usize> = inst.labels.iter().map(|&v| if v > 0.0 { 1 } else { 0 }).collect();
    let m = train_multiclass(&inst.x, &y, 1.0, inst.kernel, &tight()).unwrap();
    for z in &inst.probes {
        let d = m.decisions(z).unwrap();
        assert!((d[0] + d[1]).abs() < 1e-6);
    }
}

#[test]
fn separated_clusters_score_their_own_class_highest() {
    let centres = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, c) in centres.iter().enumerate() {
        for _ in 0..15 {
            x.push(vec![
                c[0] + 0.5 * rng.sample::<f64, _>(StandardNormal),
                c[1] + 0.5 * rng.sample::<f64, _>(StandardNormal),
            ]);
            y.push(k);
        }
    }
    let m = train_multiclass(&x, &y, 1.0, KernelSpec::Rbf { gamma: 0.2 }, &SolverParams::default()).unwrap();
    for (r, k) in x.iter().zip(&y) {
        assert_eq!(m.predict(r).unwrap(), *k);
    }
    let single = train_multiclass(&x[..3].to_vec(), &[0, 1, 2], 1.0, KernelSpec::Linear, &SolverParams::default());
    assert_eq!(single.unwrap().models.len(), 3);
}

#[test]
fn model_serde_round_trip() {
    let inst = instances::instance(7);
    let m = train_svc(&inst.x, &inst.labels, inst.c, inst.kernel, &SolverParams::default()).unwrap();
    let json = serde_json::to_string(&m).unwrap();
    let back: SvmModel = serde_json::from_str(&json).unwrap();
    for z in &inst.probes {
        assert!((m.decision(z).unwrap() - back.decision(z).unwrap()).abs() <= 1e-12);
    }
}

/// Cholesky factorisation of `K + jitter·I`; fails on a negative pivot.
fn cholesky_ok(k: &[Vec<f64>], jitter: f64) -> bool {
    let n = k.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i][j] + if i == j { jitter } else { 0.0 };
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

fn samples() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), 2..15))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbf_gram_is_psd(x in samples(), gamma in 0.01f64..5.0) {
        let k = KernelSpec::Rbf { gamma };
        let gram: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| k.eval(a, b)).collect()).collect();
        for i in 0..x.len() {
            prop_assert_eq!(gram[i][i], 1.0);
            for j in 0..x.len() {
                prop_assert_eq!(gram[i][j], gram[j][i]);
            }
        }
        prop_assert!(cholesky_ok(&gram, 1e-9));
    }

    #[test]
    fn svc_kkt_residuals_within_tolerance(x in samples(), flip in prop::collection::vec(any::<bool>(), 15), c in 0.05f64..20.0) {
        let mut y: Vec<f64> = x.iter().zip(&flip).map(|(_, &f)| if f { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let tol = 1e-3;
        let m = train_svc(&x, &y, c, KernelSpec::Rbf { gamma: 0.5 }, &SolverParams { tol, ..Default::default() }).unwrap();
        let coef_of = |r: &Vec<f64>| -> f64 {
            m.support_vectors().iter().zip(m.dual_coeffs()).filter(|(sv, _)| *sv == r).map(|(_, c)| c.abs()).sum()
        };
        for (r, yi) in x.iter().zip(&y) {
            // duplicated points share their coefficient mass; skip them
            if x.iter().filter(|o| *o == r).count() > 1 {
                continue;
            }
            let margin = yi * m.decision(r).unwrap();
            let a = coef_of(r);
            if a == 0.0 {
                prop_assert!(margin >= 1.0 - tol);
            } else if a >= c * (1.0 - 1e-12) {
                prop_assert!(margin <= 1.0 + tol);
            } else {
                prop_assert!((margin - 1.0).abs() <= tol);
            }
        }
        let balance: f64 = m.dual_coeffs().iter().sum();
        prop_assert!(balance.abs() < 1e-9 * c.max(1.0) * x.len() as f64);
        prop_assert!(m.dual_coeffs().iter().all(|v| v.abs() <= c * (1.0 + 1e-12)));
    }

    #[test]
    fn decision_is_finite(x in samples(), probe in prop::collection::vec(-1e3f64..1e3, 4)) {
        let n = x.len();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = train_svc(&x, &y, 1.0, KernelSpec::Linear, &SolverParams::default()).unwrap();
        let z = &probe[..x[0].len()];
        prop_assert!(m.decision(z).unwrap().is_finite());
    }
}
