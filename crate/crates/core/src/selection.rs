//! Unsupervised feature ranking by prognostic relevance, followed by greedy
//! minimum-redundancy maximum-relevance selection.
//!
//! No function here takes labels: the only run-level information used is the
//! maintenance type, which decides whether a trajectory ends in a failure.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::stats;

/// Number of points each run trajectory is resampled to for trendability.
pub const TRENDABILITY_POINTS: usize = 100;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("need at least 2 corrective runs, got {0}")]
    TooFewRuns(usize),
    #[error("run `{0}` has no rows")]
    ZeroLengthRun(String),
    #[error("cannot select {k} features out of {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("feature matrices disagree on columns")]
    ColumnMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgScores {
    pub names: Vec<String>,
    pub monotonicity: Vec<f64>,
    pub trendability: Vec<f64>,
    pub prognosability: Vec<f64>,
    pub relevance: Vec<f64>,
}

impl ProgScores {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// `|#increases - #decreases| / (n - 1)` for one trajectory.
pub fn monotonicity_of(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mut balance: i64 = 0;
    for w in x.windows(2) {
        if w[1] > w[0] {
            balance += 1;
        } else if w[1] < w[0] {
            balance -= 1;
        }
    }
    balance.unsigned_abs() as f64 / (x.len() - 1) as f64
}

/// Linear resampling of `x` onto `m` equally spaced points of its lifetime.
pub fn resample(x: &[f64], m: usize) -> Vec<f64> {
    match x.len() {
        0 => Vec::new(),
        1 => alloc::vec![x[0]; m],
        n => (0..m)
            .map(|i| {
                let pos = if m == 1 { 0.0 } else { i as f64 * (n - 1) as f64 / (m - 1) as f64 };
                let lo = libm::floor(pos) as usize;
                let hi = (lo + 1).min(n - 1);
                let frac = pos - lo as f64;
                x[lo] + frac * (x[hi] - x[lo])
            })
            .collect(),
    }
}

/// `exp(-std(end) / mean|end - start|)`; 0 when no trajectory moves.
pub fn prognosability_of(trajectories: &[&[f64]]) -> f64 {
    let ends: Vec<f64> = trajectories.iter().map(|t| t[t.len() - 1]).collect();
    let spans: Vec<f64> = trajectories.iter().map(|t| (t[t.len() - 1] - t[0]).abs()).collect();
    let span = stats::mean(&spans);
    if !(span > 0.0) {
        return 0.0;
    }
    libm::exp(-stats::std_dev(&ends) / span)
}

/// Minimum absolute correlation between resampled trajectories over all pairs.
pub fn trendability_of(trajectories: &[&[f64]]) -> f64 {
    let resampled: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| resample(t, TRENDABILITY_POINTS))
        .collect();
    let mut min = 1.0f64;
    for i in 0..resampled.len() {
        for j in i + 1..resampled.len() {
            min = min.min(stats::pearson(&resampled[i], &resampled[j]).abs());
        }
    }
    min
}

fn check_columns(features: &[&FeatureMatrix]) -> Result<(), SelectionError> {
    if let Some(first) = features.first() {
        if features.iter().any(|fm| fm.names != first.names) {
            return Err(SelectionError::ColumnMismatch);
        }
    }
    Ok(())
}

/// Scores every column. Prognosability always uses corrective runs;
/// monotonicity and trendability use corrective runs only when
/// `corrective_only` is set, otherwise all runs.
pub fn prognostic_scores(
    features: &[&FeatureMatrix],
    corrective_only: bool,
) -> Result<ProgScores, SelectionError> {
    check_columns(features)?;
    if let Some(fm) = features.iter().find(|fm| fm.n_rows() == 0) {
        return Err(SelectionError::ZeroLengthRun(fm.run_id().into()));
    }
    let corrective: Vec<&FeatureMatrix> = features.iter().copied().filter(|fm| fm.meta.is_corrective()).collect();
    if corrective.len() < 2 {
        return Err(SelectionError::TooFewRuns(corrective.len()));
    }
    let pool: &[&FeatureMatrix] = if corrective_only { &corrective } else { features };
    let names = features[0].names.clone();
    let n = names.len();
    let mut scores = ProgScores {
        names,
        monotonicity: Vec::with_capacity(n),
        trendability: Vec::with_capacity(n),
        prognosability: Vec::with_capacity(n),
        relevance: Vec::with_capacity(n),
    };
    for c in 0..n {
        let pooled: Vec<Vec<f64>> = pool.iter().map(|fm| fm.column(c)).collect();
        let pooled_refs: Vec<&[f64]> = pooled.iter().map(Vec::as_slice).collect();
        let failing: Vec<Vec<f64>> = corrective.iter().map(|fm| fm.column(c)).collect();
        let failing_refs: Vec<&[f64]> = failing.iter().map(Vec::as_slice).collect();

        let mono = pooled_refs.iter().map(|t| monotonicity_of(t)).sum::<f64>() / pooled_refs.len() as f64;
        let trend = trendability_of(&pooled_refs);
        let prog = prognosability_of(&failing_refs);
        scores.monotonicity.push(mono);
        scores.trendability.push(trend);
        scores.prognosability.push(prog);
        scores.relevance.push((mono + trend + prog) / 3.0);
    }
    Ok(scores)
}

/// Symmetric matrix of absolute Pearson correlations between columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub names: Vec<String>,
    values: Vec<f64>,
}

impl Correlation {
    pub fn from_values(names: Vec<String>, values: Vec<f64>) -> Correlation {
        assert_eq!(values.len(), names.len() * names.len(), "correlation must be square");
        Correlation { names, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.names.len() + j]
    }
}

/// Absolute correlations over the pooled rows of all matrices, using every
/// `stride`-th row of each run.
pub fn correlation(features: &[&FeatureMatrix], stride: usize) -> Result<Correlation, SelectionError> {
    check_columns(features)?;
    let Some(first) = features.first() else {
        return Ok(Correlation::from_values(Vec::new(), Vec::new()));
    };
    let n = first.n_cols();
    let stride = stride.max(1);
    let mut columns: Vec<Vec<f64>> = alloc::vec![Vec::new(); n];
    for fm in features {
        for r in (0..fm.n_rows()).step_by(stride) {
            for (col, v) in columns.iter_mut().zip(fm.row(r)) {
                col.push(*v);
            }
        }
    }
    let mut values = alloc::vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let r = stats::pearson(&columns[i], &columns[j]).abs();
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(Correlation::from_values(first.names.clone(), values))
}

/// Greedy mRMR: the first pick maximises relevance, each later pick maximises
/// relevance minus its mean absolute correlation with the picks so far.
/// Equal gains go to the lexically smaller name.
pub fn select_features(scores: &ProgScores, corr: &Correlation, k: usize) -> Result<Vec<String>, SelectionError> {
    let n = scores.len();
    if k > n {
        return Err(SelectionError::KTooLarge { k, n });
    }
    // correlation index of each score column
    let to_corr: Vec<usize> = scores
        .names
        .iter()
        .map(|name| corr.names.iter().position(|c| c == name).ok_or(SelectionError::ColumnMismatch))
        .collect::<Result<_, _>>()?;

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = alloc::vec![false; n];
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..n).filter(|&c| !taken[c]) {
            let redundancy = if chosen.is_empty() {
                0.0
            } else {
                chosen.iter().map(|&s| corr.get(to_corr[c], to_corr[s])).sum::<f64>() / chosen.len() as f64
            };
            let gain = scores.relevance[c] - redundancy;
            let better = match best {
                None => true,
                Some((b, g)) => gain > g || (gain == g && scores.names[c] < scores.names[b]),
            };
            if better {
                best = Some((c, gain));
            }
        }
        let (c, _) = best.expect("k <= n leaves a candidate");
        taken[c] = true;
        chosen.push(c);
    }
    Ok(chosen.into_iter().map(|c| scores.names[c].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run_store::{Maintenance, RunMeta};
    use alloc::string::ToString;
    use alloc::vec;

    fn matrix(id: &str, corrective: bool, cols: &[(&str, Vec<f64>)]) -> FeatureMatrix {
        let n = cols[0].1.len();
        FeatureMatrix::from_columns(
            RunMeta {
                id: id.into(),
                maintenance: if corrective { Maintenance::Corrective } else { Maintenance::Preventive },
                duration_hours: n as f64,
            },
            (0..n).map(|h| h as f64).collect(),
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            &cols.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn increasing_feature_is_fully_monotone() {
        let a = matrix("a", true, &[("x", (0..30).map(|t| t as f64).collect())]);
        let b = matrix("b", true, &[("x", (0..50).map(|t| (t * t) as f64).collect())]);
        let s = prognostic_scores(&[&a, &b], true).unwrap();
        assert_eq!(s.monotonicity[0], 1.0);
        assert!(s.trendability[0] > 0.9);
    }

    #[test]
    fn identical_trajectories() {
        let x: Vec<f64> = (0..40).map(|t| libm::sin(t as f64 * 0.1) + t as f64 * 0.05).collect();
        let a = matrix("a", true, &[("x", x.clone())]);
        let b = matrix("b", true, &[("x", x)]);
        let s = prognostic_scores(&[&a, &b], true).unwrap();
        assert!((s.trendability[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.prognosability[0], 1.0);
    }

    #[test]
    fn resample_endpoints() {
        let r = resample(&[0.0, 10.0, 20.0], 5);
        assert_eq!(r, [0.0, 5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn errors() {
        let a = matrix("a", true, &[("x", vec![1.0, 2.0])]);
        let p = matrix("p", false, &[("x", vec![1.0, 2.0])]);
        assert_eq!(prognostic_scores(&[&a, &p], true), Err(SelectionError::TooFewRuns(1)));
        let s = ProgScores {
            names: vec!["x".into()],
            monotonicity: vec![1.0],
            trendability: vec![1.0],
            prognosability: vec![1.0],
            relevance: vec![1.0],
        };
        let c = Correlation::from_values(vec!["x".into()], vec![1.0]);
        assert_eq!(select_features(&s, &c, 2), Err(SelectionError::KTooLarge { k: 2, n: 1 }));
    }

    fn scores(names: &[&str], relevance: &[f64]) -> ProgScores {
        ProgScores {
            names: names.iter().map(|s| s.to_string()).collect(),
            monotonicity: relevance.to_vec(),
            trendability: relevance.to_vec(),
            prognosability: relevance.to_vec(),
            relevance: relevance.to_vec(),
        }
    }

    #[test]
    fn duplicate_loses_to_independent_feature() {
        // a and b are copies, c is independent and less relevant
        let s = scores(&["a", "b", "c"], &[0.8, 0.8, 0.5]);
        let corr = Correlation::from_values(
            s.names.clone(),
            vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        // second-step gains: b = 0.8 - 1 = -0.2, c = 0.5 - 0 = 0.5
        assert_eq!(select_features(&s, &corr, 2).unwrap(), ["a", "c"]);
        assert_eq!(select_features(&s, &corr, 1).unwrap(), ["a"]);
    }

    #[test]
    fn lexical_tie_break() {
        let s = scores(&["zeta", "alpha"], &[0.5, 0.5]);
        let corr = Correlation::from_values(s.names.clone(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(select_features(&s, &corr, 2).unwrap(), ["alpha", "zeta"]);
    }
}
