//! Repeated stratified K-fold plans and stratified subsampling.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tabular::FeatureTable;

/// Assignment of every row to exactly one fold per repeat. Within each
/// repeat the folds partition the rows, and per-fold class counts differ
/// from perfect proportionality by at most one.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    folds: usize,
    repeats: usize,
    seed: u64,
    /// `assignment[repeat][row]` = fold index.
    assignment: Vec<Vec<u8>>,
}

impl FoldPlan {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_rows(&self) -> usize {
        self.assignment.first().map_or(0, Vec::len)
    }

    pub fn fold_of(&self, repeat: usize, row: usize) -> u8 {
        self.assignment[repeat][row]
    }

    /// Rows held out in `(repeat, fold)`, ascending.
    pub fn test_rows(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignment[repeat]
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rows trained on in `(repeat, fold)`: everything outside the fold.
    pub fn train_rows(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignment[repeat]
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Deal class members round-robin into `k` folds after a seeded shuffle.
/// Shared by the outer CV plan and the inner λ-selection folds.
pub(crate) fn deal_stratified_folds(labels: &[u8], k: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut assignment = vec![0u8; labels.len()];
    for class in [1u8, 0u8] {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for (i, &row) in members.iter().enumerate() {
            assignment[row] = (i % k) as u8;
        }
    }
    assignment
}

/// Build an `R`-repeat stratified `K`-fold plan. With K=10 every cycle
/// trains on 90% and tests on the held-out 10%, preserving the class ratio
/// to within one unit per fold.
pub fn make_fold_plan(table: &FeatureTable, k: usize, r: usize, seed: u64) -> Result<FoldPlan> {
    let labels = table
        .labels()
        .ok_or_else(|| Error::InvalidInput("fold plan needs a labelled table".into()))?;
    if k < 2 || k > u8::MAX as usize {
        return Err(Error::InvalidInput(format!("fold count {k} out of range [2, 255]")));
    }
    if r < 1 {
        return Err(Error::InvalidInput("repeat count must be >= 1".into()));
    }
    let (pos, neg) = table.class_counts()?;
    if pos < k || neg < k {
        return Err(Error::InvalidInput(format!(
            "class counts ({pos} positive, {neg} negative) must each be >= {k} folds"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment =
        (0..r).map(|_| deal_stratified_folds(labels, k, &mut rng)).collect();
    Ok(FoldPlan { folds: k, repeats: r, seed, assignment })
}

/// Draw `n_positives` positives and `round(n_positives·neg/pos)` negatives
/// without replacement, preserving the class ratio within rounding. The
/// returned table is a seeded permutation of the selected rows.
pub fn stratified_subsample(
    table: &FeatureTable,
    n_positives: usize,
    seed: u64,
) -> Result<FeatureTable> {
    let labels = table
        .labels()
        .ok_or_else(|| Error::InvalidInput("subsampling needs a labelled table".into()))?;
    let (pos, neg) = table.class_counts()?;
    if n_positives == 0 || n_positives > pos {
        return Err(Error::InvalidInput(format!(
            "requested {n_positives} positives, available {pos}"
        )));
    }
    if pos == 0 {
        return Err(Error::InvalidInput("table has no positive rows".into()));
    }
    let n_negatives = ((n_positives as f64) * (neg as f64) / (pos as f64)).round() as usize;
    if n_negatives > neg {
        return Err(Error::InvalidInput(format!(
            "class ratio demands {n_negatives} negatives, available {neg}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    pos_rows.shuffle(&mut rng);
    neg_rows.shuffle(&mut rng);
    let mut rows = pos_rows[..n_positives].to_vec();
    rows.extend_from_slice(&neg_rows[..n_negatives]);
    table.select_rows(&rows)
}
