use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::run_store::RunMeta;

use super::ValidationError;

/// Assignment of run identifiers to outer folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Deals corrective runs (sorted by id) round-robin over the folds, then
/// the shuffled preventive runs, continuing from the next fold. Every fold
/// gets at least one corrective run.
pub fn plan_folds(runs: &[RunMeta], n_folds: usize, seed: u64) -> Result<FoldPlan, ValidationError> {
    let mut corrective: Vec<&str> = runs.iter().filter(|m| m.is_corrective()).map(|m| m.id.as_str()).collect();
    let mut preventive: Vec<&str> = runs.iter().filter(|m| !m.is_corrective()).map(|m| m.id.as_str()).collect();
    if n_folds == 0 || n_folds > corrective.len() {
        return Err(ValidationError::TooManyFolds { n_folds, corrective: corrective.len() });
    }
    corrective.sort_unstable();
    preventive.sort_unstable();
    preventive.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: Vec<Vec<String>> = alloc::vec![Vec::new(); n_folds];
    for (i, id) in corrective.iter().chain(&preventive).enumerate() {
        folds[i % n_folds].push(String::from(*id));
    }
    Ok(FoldPlan { seed, folds })
}
