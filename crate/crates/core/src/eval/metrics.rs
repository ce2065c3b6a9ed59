//! Discrimination and calibration metrics.

use crate::error::{Error, Result};

/// Area under the ROC curve in the rank (Mann–Whitney) form:
/// `(#concordant pairs + 0.5·#tied pairs) / (n₊·n₋)`.
///
/// Pairs are counted exactly as integers over score tie-groups, so the result
/// matches the all-pairs definition bit for bit.
pub fn auc_roc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_labels(labels, scores.len())?;
    if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score at index {bad}")));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes present".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_unstable_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    let mut concordant = 0u64;
    let mut tied = 0u64;
    let mut negatives_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_pos = 0u64;
        let mut group_neg = 0u64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            match labels[order[j]] {
                1 => group_pos += 1,
                _ => group_neg += 1,
            }
            j += 1;
        }
        concordant += group_pos * negatives_below;
        tied += group_pos * group_neg;
        negatives_below += group_neg;
        i = j;
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / (n_pos as f64 * n_neg as f64))
}

/// Mean squared error of predicted probabilities: `mean((p − y)²)`.
pub fn brier_score(labels: &[u8], probs: &[f64]) -> Result<f64> {
    check_labels(labels, probs.len())?;
    if labels.is_empty() {
        return Err(Error::InvalidInput("Brier score of an empty set".into()));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("probability {p} at index {i} is outside [0, 1]")));
        }
    }
    let sum: f64 =
        labels.iter().zip(probs).map(|(&y, &p)| (p - y as f64) * (p - y as f64)).sum();
    Ok(sum / labels.len() as f64)
}

fn check_labels(labels: &[u8], n_scores: usize) -> Result<()> {
    if labels.len() != n_scores {
        return Err(Error::InvalidInput(format!(
            "{} labels but {n_scores} scores",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().position(|&y| y > 1) {
        return Err(Error::InvalidInput(format!("non-binary label at index {bad}")));
    }
    Ok(())
}
