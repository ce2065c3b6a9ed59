//! Jenks natural-breaks classification: an exact dynamic program over sorted
//! values minimising the total within-class sum of squared deviations, plus
//! the five-level susceptibility class assignment.

use crate::error::{Error, Result};

/// Optimal 1-D classification into `n_classes` contiguous groups. Returns
/// the `n_classes − 1` thresholds, each the largest member of its class
/// (the last class has no upper threshold).
pub fn jenks_breaks(values: &[f64], n_classes: usize) -> Result<Vec<f64>> {
    if n_classes < 2 {
        return Err(Error::InvalidInput("need at least 2 classes".into()));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at index {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if distinct < n_classes {
        return Err(Error::InvalidInput(format!(
            "{distinct} distinct values cannot fill {n_classes} classes"
        )));
    }

    // Prefix sums allow O(1) within-class SSD over [i, j).
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        sum[i + 1] = sum[i] + v;
        sum_sq[i + 1] = sum_sq[i] + v * v;
    }
    let ssd = |i: usize, j: usize| -> f64 {
        let s = sum[j] - sum[i];
        sum_sq[j] - sum_sq[i] - s * s / (j - i) as f64
    };

    // dp[j] = min cost of splitting the first j values into the current
    // number of classes; choice[k][j] = start index of the last class.
    let mut dp: Vec<f64> = (0..=n).map(|j| if j == 0 { 0.0 } else { ssd(0, j) }).collect();
    let mut choice = vec![vec![0usize; n + 1]; n_classes + 1];
    for k in 2..=n_classes {
        let mut next = vec![f64::INFINITY; n + 1];
        for j in k..=n {
            let mut best = f64::INFINITY;
            let mut best_i = k - 1;
            for i in (k - 1)..j {
                let cost = dp[i] + ssd(i, j);
                if cost < best {
                    best = cost;
                    best_i = i;
                }
            }
            next[j] = best;
            choice[k][j] = best_i;
        }
        dp = next;
    }

    // Recover class boundaries right to left.
    let mut ends = vec![0usize; n_classes + 1];
    ends[n_classes] = n;
    for k in (2..=n_classes).rev() {
        ends[k - 1] = choice[k][ends[k]];
    }
    Ok((1..n_classes).map(|k| sorted[ends[k] - 1]).collect())
}

/// Total within-class SSD of the partition `jenks_breaks` would report, for
/// oracle comparisons.
pub fn jenks_total_ssd(values: &[f64], breaks: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut total = 0.0;
    let mut start = 0;
    let mut bounds: Vec<f64> = breaks.to_vec();
    bounds.push(f64::INFINITY);
    for bound in bounds {
        let mut end = start;
        while end < sorted.len() && sorted[end] <= bound {
            end += 1;
        }
        if end > start {
            let slice = &sorted[start..end];
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            total += slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        start = end;
    }
    total
}

// ── Susceptibility classes ───────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SusceptibilityClass {
    VeryLow,
    Low,
    Moderate,
    High,
    VeryHigh,
}

impl SusceptibilityClass {
    pub const ALL: [SusceptibilityClass; 5] = [
        SusceptibilityClass::VeryLow,
        SusceptibilityClass::Low,
        SusceptibilityClass::Moderate,
        SusceptibilityClass::High,
        SusceptibilityClass::VeryHigh,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SusceptibilityClass::VeryLow => "very low",
            SusceptibilityClass::Low => "low",
            SusceptibilityClass::Moderate => "moderate",
            SusceptibilityClass::High => "high",
            SusceptibilityClass::VeryHigh => "very high",
        }
    }
}

impl std::fmt::Display for SusceptibilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Assign five susceptibility levels from four ascending thresholds.
/// Class k covers `threshold[k−1] < value ≤ threshold[k]` with −∞ below the
/// first and +∞ above the last, so a value exactly on a threshold falls in
/// the lower class. Fixed thresholds can be projected onto any paradigm's
/// outputs for unbiased map comparison.
pub fn classify_susceptibility(
    lsi: &[f64],
    thresholds: &[f64],
) -> Result<Vec<SusceptibilityClass>> {
    if thresholds.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "expected 4 thresholds for 5 classes, got {}",
            thresholds.len()
        )));
    }
    for w in thresholds.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidInput(format!(
                "thresholds must be strictly ascending: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidInput("thresholds must lie within [0, 1]".into()));
    }
    lsi.iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite susceptibility value {v}")));
            }
            let k = thresholds.iter().filter(|&&t| v > t).count();
            Ok(SusceptibilityClass::ALL[k])
        })
        .collect()
}
