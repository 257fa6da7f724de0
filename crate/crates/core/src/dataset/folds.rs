use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Fold index per position (positions index the label slice handed to
/// [`kfold_split`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Positions belonging to `fold`, ascending.
    pub fn test_positions(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_positions(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Positions are grouped by class, shuffled within each class, and the class
/// groups are dealt round-robin onto folds as one continuous sequence. Fold
/// sizes therefore differ by at most one, and so do the per-class counts.
pub fn kfold_split(labels: &[u32], k: usize, rng_seed: u64) -> Result<FoldAssignment> {
    let m = labels.len();
    if k < 2 {
        return Err(Error::config(format!("fold count must be at least 2, got {k}")));
    }
    if m < k {
        return Err(Error::contract(format!("{m} instances cannot fill {k} folds")));
    }
    let mut rng = seed::rng(rng_seed);
    let max_class = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max_class + 1];
    for (i, &l) in labels.iter().enumerate() {
        groups[l as usize].push(i);
    }
    let mut fold_of = vec![0; m];
    let mut next = 0;
    for group in &mut groups {
        group.shuffle(&mut rng);
        for &i in group.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
