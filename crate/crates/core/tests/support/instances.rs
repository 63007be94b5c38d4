//! Seeded random problem instances for solver comparisons.

#![allow(dead_code)]

use pdm_core::svm::KernelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub targets: Vec<f64>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub probes: Vec<Vec<f64>>,
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=20);
    let d = rng.random_range(1..=5);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
    let mut labels: Vec<f64> = x
        .iter()
        .map(|r| if r[0] + 0.7 * normal(&mut rng) > 0.0 { 1.0 } else { -1.0 })
        .collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let targets = x
        .iter()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.3 * normal(&mut rng))
        .collect();
    let kernel = if seed % 2 == 0 {
        KernelSpec::Linear
    } else {
        KernelSpec::Rbf { gamma: rng.random_range(0.1..1.0) }
    };
    let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let nu = rng.random_range(0.1..0.9);
    let epsilon = rng.random_range(0.0..0.3);
    let probes = (0..25).map(|_| (0..d).map(|_| 1.5 * normal(&mut rng)).collect()).collect();
    Instance { x, labels, targets, kernel, c, nu, epsilon, probes }
}
