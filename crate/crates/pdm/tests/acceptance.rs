//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion other than a documented known failure
//! regresses.

#[path = "../../core/tests/support/instances.rs"]
mod instances;
mod common;
#[path = "../../core/tests/support/qp.rs"]
mod qp;

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use pdm_core::decision::{aggregate, ema_alpha, Aggregation};
use pdm_core::features::{bearing_frequencies, build_feature_matrix, BearingGeometry, FeatureMatrix};
use pdm_core::run_store::{generate_synthetic, GeneratorProfile, RunMeta};
use pdm_core::scoring::{f_score, final_score};
use pdm_core::svm::{train_one_class, train_svc, train_svr, KernelSpec, SolverParams, SvmModel};
use pdm_core::validation::{double_cv, plan_folds, Formulation, HyperGrid, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---- 1: scoring arithmetic ----------------------------------------------

/// (label, FP, TP, B, F, final) with C = 11, P = 28.
type Row = (&'static str, usize, usize, f64, f64, f64);

const FORMULATIONS: [Row; 11] = [
    ("univariate", 2, 8, 0.436, 0.894, 0.855),
    ("one-class", 16, 5, 0.257, 0.556, 0.531),
    ("binary 3d", 6, 9, 0.495, 0.840, 0.811),
    ("binary 5d", 5, 9, 0.526, 0.860, 0.831),
    ("binary 7d", 4, 9, 0.465, 0.880, 0.845),
    ("binary 10d", 2, 9, 0.500, 0.919, 0.883),
    ("multiclass 3", 5, 9, 0.493, 0.860, 0.829),
    ("multiclass 6", 5, 8, 0.468, 0.838, 0.807),
    ("rul", 32, 2, 0.141, 0.180, 0.177),
    ("life pct", 12, 6, 0.254, 0.657, 0.622),
    ("relu", 6, 10, 0.617, 0.858, 0.837),
];

const AGG: [&str; 8] = ["MA 12h", "EX 12h", "MA 24h", "EX 24h", "MA 48h", "EX 48h", "MA 5D", "EX 5D"];

type AggRow = (usize, usize, f64, f64, f64);

const BINARY: [AggRow; 8] = [
    (2, 10, 0.54, 0.94, 0.906),
    (2, 10, 0.546, 0.94, 0.906),
    (2, 9, 0.531, 0.919, 0.886),
    (2, 10, 0.54, 0.94, 0.906),
    (3, 11, 0.464, 0.937, 0.84),
    (4, 9, 0.532, 0.88, 0.85),
    (2, 7, 0.339, 0.863, 0.819),
    (0, 6, 0.265, 0.857, 0.806),
];

const RELU: [AggRow; 8] = [
    (5, 9, 0.438, 0.86, 0.824),
    (6, 8, 0.441, 0.819, 0.787),
    (6, 7, 0.423, 0.793, 0.762),
    (6, 8, 0.435, 0.819, 0.786),
    (6, 8, 0.458, 0.819, 0.788),
    (5, 8, 0.48, 0.838, 0.808),
    (2, 7, 0.42, 0.863, 0.825),
    (0, 7, 0.348, 0.897, 0.85),
];

const MULTICLASS: [AggRow; 8] = [
    (5, 8, 0.47, 0.838, 0.807),
    (5, 9, 0.472, 0.86, 0.827),
    (5, 9, 0.518, 0.86, 0.831),
    (5, 10, 0.525, 0.879, 0.848),
    (5, 8, 0.455, 0.838, 0.805),
    (5, 9, 0.478, 0.86, 0.827),
    (5, 8, 0.525, 0.838, 0.811),
    (3, 8, 0.433, 0.875, 0.838),
];

const UNIVARIATE: [AggRow; 8] = [
    (2, 9, 0.492, 0.919, 0.883),
    (2, 9, 0.492, 0.919, 0.883),
    (3, 9, 0.496, 0.9, 0.865),
    (3, 9, 0.489, 0.9, 0.864),
    (2, 8, 0.475, 0.894, 0.858),
    (4, 8, 0.465, 0.857, 0.824),
    (2, 7, 0.385, 0.863, 0.822),
    (0, 8, 0.297, 0.93, 0.875),
];

/// The binary MA 48h row lists a final score no B in [0, 1] can produce
/// from its FP/TP counts; it is reported rather than hidden.
const KNOWN_MISMATCH: &str = "binary MA 48h";

fn scoring_mismatches() -> (usize, Vec<String>) {
    let (c, p, beta, alpha, tol) = (11, 28, 0.5, 0.75, 1e-3 + 1e-9);
    let mut rows: Vec<(String, AggRow)> =
        FORMULATIONS.iter().map(|&(n, fp, tp, b, f, fin)| (n.to_string(), (fp, tp, b, f, fin))).collect();
    for (table, data) in [("binary", BINARY), ("relu", RELU), ("multiclass", MULTICLASS), ("univariate", UNIVARIATE)] {
        for (g, row) in AGG.iter().zip(data) {
            rows.push((format!("{table} {g}"), row));
        }
    }
    let mut bad = Vec::new();
    for (name, (fp, tp, b, f, fin)) in &rows {
        let got_f = f_score(*fp, *tp, c, p, beta).unwrap();
        let got_final = final_score(got_f, *b, alpha, c, p);
        if (got_f - f).abs() > tol || (got_final - fin).abs() > tol {
            bad.push(format!("{name}: F {got_f:.4} (table {f}), final {got_final:.4} (table {fin})"));
        }
    }
    (rows.len(), bad)
}

fn criterion_1() -> Outcome {
    let (n, bad) = scoring_mismatches();
    if bad.is_empty() {
        outcome(true, format!("{n} rows reproduce F and final to 0.001"))
    } else {
        outcome(false, format!("{}/{n} rows differ: {}", bad.len(), bad.join("; ")))
    }
}

/// Criterion 1 may only fail on the documented row.
fn criterion_1_expected() -> bool {
    let (_, bad) = scoring_mismatches();
    bad.len() == 1 && bad[0].starts_with(KNOWN_MISMATCH)
}

// ---- 2-4: solver ----------------------------------------------------------

fn tight() -> SolverParams {
    SolverParams { tol: 1e-10, ..SolverParams::default() }
}

fn decision_gap(model: &SvmModel, reference: &qp::Reference, probes: &[Vec<f64>]) -> f64 {
    probes
        .iter()
        .chain(&reference.x)
        .map(|z| (model.decision(z).unwrap() - reference.decision(z)).abs())
        .fold(0.0, f64::max)
}

fn criterion_2() -> Outcome {
    let n = 100;
    let mut worst = [(0.0f64, 0.0f64); 3];
    let mut kernels = BTreeSet::new();
    for i in 0..n {
        for (k, slot) in worst.iter_mut().enumerate() {
            let inst = instances::instance(10_000 * (k as u64 + 1) + i);
            kernels.insert(matches!(inst.kernel, KernelSpec::Linear));
            let (m, r) = match k {
                0 => (
                    train_svc(&inst.x, &inst.labels, inst.c, inst.kernel, &tight()),
                    qp::svc(&inst.x, &inst.labels, inst.c, inst.kernel),
                ),
                1 => (train_one_class(&inst.x, inst.nu, inst.kernel, &tight()), qp::one_class(&inst.x, inst.nu, inst.kernel)),
                _ => (
                    train_svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel, &tight()),
                    qp::svr(&inst.x, &inst.targets, inst.c, inst.epsilon, inst.kernel),
                ),
            };
            let Ok(m) = m else { return outcome(false, format!("instance {i} failed to train")) };
            slot.0 = slot.0.max((m.report().dual_objective - r.objective).abs());
            slot.1 = slot.1.max(decision_gap(&m, &r, &inst.probes));
        }
    }
    let pass = kernels.len() == 2 && worst.iter().all(|&(o, d)| o <= 1e-6 && d <= 1e-4);
    let names = ["SVC", "one-class", "SVR"];
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, (o, d))| format!("{n} objective {o:.1e}, decision {d:.1e}"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{n} instances each; {detail}"))
}

fn blob(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

fn criterion_3() -> Outcome {
    let n = 200;
    let slack = 1.0 / n as f64;
    for seed in 0..20 {
        let x = blob(1_000 + seed, n);
        for nu in [0.05, 0.1, 0.5] {
            let m = match train_one_class(&x, nu, KernelSpec::Rbf { gamma: 0.5 }, &SolverParams::default()) {
                Ok(m) => m,
                Err(e) => return outcome(false, format!("seed {seed}, nu {nu}: {e}")),
            };
            let band = m.report().kkt_gap;
            let outliers = x.iter().filter(|r| m.decision(r).unwrap() < -band).count() as f64 / n as f64;
            let svs = m.n_support() as f64 / n as f64;
            if outliers > nu + slack || svs < nu - slack {
                return outcome(false, format!("seed {seed}, nu {nu}: outliers {outliers}, SVs {svs}"));
            }
        }
    }
    outcome(true, "20 seeds x nu in {0.05, 0.1, 0.5}")
}

fn criterion_4() -> Outcome {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0, ((i * 7) % 11) as f64 / 5.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - 0.5 * r[1] + 1.0).collect();
    let eps = 0.1;
    let m = train_svr(&x, &y, 10.0, eps, KernelSpec::Linear, &SolverParams { tol: 1e-8, ..Default::default() }).unwrap();
    let mut worst = 0.0f64;
    let mut inside_nonzero = 0;
    for (r, t) in x.iter().zip(&y) {
        let residual = (m.decision(r).unwrap() - t).abs();
        worst = worst.max(residual);
        let coef = m.support_vectors().iter().position(|sv| sv == r).map_or(0.0, |k| m.dual_coeffs()[k]);
        if residual < eps - 1e-6 && coef != 0.0 {
            inside_nonzero += 1;
        }
    }
    outcome(
        worst <= eps + 1e-6 && inside_nonzero == 0,
        format!("max residual {worst:.6} (eps {eps}), {inside_nonzero} non-zero coefficients inside the tube"),
    )
}

// ---- 5: end-to-end on the synthetic corpus -------------------------------

fn corpus(seed: u64, c: usize, p: usize, profile: &GeneratorProfile) -> Vec<FeatureMatrix> {
    generate_synthetic(seed, c, p, profile)
        .unwrap()
        .runs()
        .iter()
        .map(|r| build_feature_matrix(r, &profile.geometry).unwrap())
        .collect()
}

fn criterion_5() -> Outcome {
    let features = corpus(7, 11, 28, &GeneratorProfile::default());
    let metas: Vec<RunMeta> = features.iter().map(|fm| fm.meta.clone()).collect();
    let plan = plan_folds(&metas, 11, 7).unwrap();
    let cfg = PipelineConfig::default();
    let run = |f: Formulation| double_cv(&features, &f, &HyperGrid::table4(&f), Aggregation::Identity, &cfg, &plan);
    let (binary, one_class) = match (run(Formulation::Binary { w_days: 10.0 }), run(Formulation::OneClass { healthy_days: 15.0 })) {
        (Ok(b), Ok(o)) => (b.report, o.report),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
    };
    // the best supervised score is at least the binary one
    let pass = binary.tp >= 8 && binary.fp <= 4 && one_class.final_score < binary.final_score;
    outcome(
        pass,
        format!(
            "binary 10d TP {}/11 FP {}/39 final {:.3}; one-class final {:.3}",
            binary.tp, binary.fp, binary.final_score, one_class.final_score
        ),
    )
}

// ---- 6-8 ----------------------------------------------------------------

fn naive_ma(h: &[f64], w: usize) -> Vec<f64> {
    (0..h.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(w);
            h[lo..=t].iter().sum::<f64>() / (t + 1 - lo) as f64
        })
        .collect()
}

/// Closed form `z_t = (1-a)^t h_0 + sum_k a (1-a)^(t-k) h_k`.
fn naive_ema(h: &[f64], a: f64) -> Vec<f64> {
    (0..h.len())
        .map(|t| {
            let mut z = (1.0 - a).powi(t as i32) * h[0];
            for (k, v) in h.iter().enumerate().take(t + 1).skip(1) {
                z += a * (1.0 - a).powi((t - k) as i32) * v;
            }
            z
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let a12 = ema_alpha(12, false);
    if (a12 - 2.0 / 13.0).abs() > 1e-12 {
        return outcome(false, format!("alpha(12) = {a12}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..400);
        let h: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for hours in [1, 12, 24, 48, 120] {
            for (g, reference) in [
                (Aggregation::Ma { hours }, naive_ma(&h, hours)),
                (Aggregation::Ema { hours, exact: false }, naive_ema(&h, 2.0 / (hours as f64 + 1.0))),
                (Aggregation::Ema { hours, exact: true }, naive_ema(&h, ema_alpha(hours, true))),
            ] {
                let z = aggregate(&h, &g).unwrap();
                for (a, b) in z.iter().zip(&reference) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("alpha(12) = 2/13; max deviation from naive references {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let g = BearingGeometry { n_balls: 8, shaft_hz: 125.0, pitch_diameter: 1.0, ball_diameter: 0.3, contact_angle: 0.0 };
    let f = bearing_frequencies(&g).unwrap();
    outcome(
        f.bpfo == 350.0 && f.bpfi == 650.0 && f.ftf == 43.75,
        format!("BPFO {} Hz, BPFI {} Hz, FTF {} Hz", f.bpfo, f.bpfi, f.ftf),
    )
}

fn criterion_8() -> Outcome {
    let profile = GeneratorProfile { run_days: (6.0, 8.0), degradation_days: (2.0, 3.0), ..GeneratorProfile::default() };
    let features = corpus(8, 4, 4, &profile);
    let metas: Vec<RunMeta> = features.iter().map(|fm| fm.meta.clone()).collect();
    let plan = plan_folds(&metas, 4, 8).unwrap();
    let cfg = PipelineConfig { k_features: 4, ..PipelineConfig::default() };
    let grid = HyperGrid { c: vec![0.1, 1.0], rbf: false, ..HyperGrid::default() };
    let r = double_cv(&features, &Formulation::Binary { w_days: 2.0 }, &grid, Aggregation::Identity, &cfg, &plan).unwrap();
    let mut fits = 0;
    for fold in &r.folds {
        let test: BTreeSet<&str> = fold.test_ids.iter().map(String::as_str).collect();
        let inner: BTreeSet<&str> = fold.inner_ids.iter().map(String::as_str).collect();
        if !test.is_disjoint(&inner) {
            return outcome(false, format!("fold {}: test and inner sets overlap", fold.fold));
        }
        let mut scalers = BTreeSet::new();
        for t in &fold.traces {
            if let Some(id) = t.train_ids.iter().chain(&t.heldout_id).find(|id| test.contains(id.as_str())) {
                return outcome(false, format!("fold {}: test run {id} seen by a fit", fold.fold));
            }
            let expected = inner.len() - usize::from(t.heldout_id.is_some());
            if t.train_ids.len() != expected {
                return outcome(false, format!("fold {}: fit on {} runs, expected {expected}", fold.fold, t.train_ids.len()));
            }
            scalers.insert(format!("{:?}", t.scaler_mean));
        }
        if fold.traces.is_empty() || scalers.len() != fold.traces.len() {
            return outcome(false, format!("fold {}: preprocessing not refit per split", fold.fold));
        }
        fits += fold.traces.len();
    }
    outcome(true, format!("{} folds, {fits} fits; no test run reached a fit, one scaler per split", r.folds.len()))
}

// ---- 9: determinism of the binary -----------------------------------------

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), common::SMALL_CONFIG);
    let out = dir.path().join("out");
    for stage in ["generate", "extract"] {
        common::ok(&common::pdm(Some(&cfg), &out, &[stage]));
    }
    let report = || {
        let o = common::pdm(Some(&cfg), &out, &["run"]);
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        fs::read(out.join("report.csv")).map_err(|e| e.to_string())
    };
    match (report(), report()) {
        (Ok(a), Ok(b)) => outcome(a == b && !a.is_empty(), format!("two runs, {} bytes, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut regressions = 0;
    for (id, check) in criteria {
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        if !o.pass && !(id == 1 && criterion_1_expected()) {
            regressions += 1;
        }
    }
    if regressions == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{regressions} criteria regressed");
        ExitCode::FAILURE
    }
}
