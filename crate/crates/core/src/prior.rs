//! Pixel-level geomorphic prior and its slope-unit aggregation.
//!
//! The prior chain: log-transformed contributing area `A`, mean upslope
//! gradient `β`, the empirical joint CDF of `(A, β)` over the study-area
//! population (each cell's prior is the fraction of population cells it
//! dominates on both axes, self-inclusive), masking of sub-threshold and
//! channel-buffer cells to zero, and per-slope-unit maximum aggregation into
//! the `gpk` feature consumed by the classifier stage.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{auc_roc, brier_score};
use crate::pipeline::HydroProducts;
use crate::raster::{buffer_mask, exterior_mask, CellMask, Grid};

// ── Parameters ───────────────────────────────────────────────────────────────

/// Tunable knobs of the prior chain. Slope threshold and buffer width are the
/// two parameters the sensitivity search optimises; stream threshold and
/// fill epsilon stay fixed per study area.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphometricParams {
    pub slope_threshold_deg: f64,
    pub buffer_width_m: f64,
    pub stream_threshold_cells: usize,
    pub epsilon_m: f64,
}

impl MorphometricParams {
    pub fn new(
        slope_threshold_deg: f64,
        buffer_width_m: f64,
        stream_threshold_cells: usize,
    ) -> Result<Self> {
        let params = MorphometricParams {
            slope_threshold_deg,
            buffer_width_m,
            stream_threshold_cells,
            epsilon_m: 1e-5,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope_threshold_deg >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "slope threshold must be >= 0, got {}",
                self.slope_threshold_deg
            )));
        }
        if !(self.buffer_width_m >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "buffer width must be >= 0, got {}",
                self.buffer_width_m
            )));
        }
        if !(self.epsilon_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "fill epsilon must be > 0, got {}",
                self.epsilon_m
            )));
        }
        Ok(())
    }
}

/// Pixel prior plus the mask of cells that entered the joint-CDF population.
/// After masking, population cells hold values in (0, 1], excluded valid
/// cells hold 0, and only exterior background is NoData.
#[derive(Debug, Clone)]
pub struct PriorField {
    pub prior: Grid,
    pub population_mask: CellMask,
}

// ── A and β ──────────────────────────────────────────────────────────────────

/// Contributing area in natural-log form: `A = ln((Facc + 1)·r²)`, with `r²`
/// the cell area in m². NoData propagates.
pub fn drainage_area_log(facc: &Grid, cellsize: f64) -> Result<Grid> {
    if !(cellsize > 0.0) {
        return Err(Error::InvalidInput(format!("cellsize must be > 0, got {cellsize}")));
    }
    let cell_area = cellsize * cellsize;
    let mut values = Vec::with_capacity(facc.len());
    for i in 0..facc.len() {
        if !facc.is_valid_idx(i) {
            values.push(facc.nodata_value());
            continue;
        }
        let f = facc.values()[i];
        if f < 0.0 {
            let (r, c) = facc.row_col(i);
            return Err(Error::InvalidInput(format!(
                "negative flow accumulation {f} at cell ({r}, {c})"
            )));
        }
        values.push(((f + 1.0) * cell_area).ln());
    }
    facc.with_values(values)
}

/// Mean slope over the upslope contributing set including the cell itself:
/// `β = (Facc_S + S) / (Facc + 1)` in degrees, where `Facc_S` is the
/// slope-weighted accumulation. NoData when any input is NoData.
pub fn mean_upslope_gradient(
    facc: &Grid,
    facc_weighted_by_slope: &Grid,
    slope: &Grid,
) -> Result<Grid> {
    facc.check_geometry(facc_weighted_by_slope, "mean_upslope_gradient")?;
    facc.check_geometry(slope, "mean_upslope_gradient")?;
    let mut values = Vec::with_capacity(facc.len());
    for i in 0..facc.len() {
        if facc.is_valid_idx(i) && facc_weighted_by_slope.is_valid_idx(i) && slope.is_valid_idx(i) {
            let beta =
                (facc_weighted_by_slope.values()[i] + slope.values()[i]) / (facc.values()[i] + 1.0);
            values.push(beta);
        } else {
            values.push(facc.nodata_value());
        }
    }
    facc.with_values(values)
}

// ── Joint CDF ────────────────────────────────────────────────────────────────

struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks ≤ `rank`.
    fn prefix(&self, rank: usize) -> u64 {
        let mut i = rank + 1;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        sum
    }
}

/// For each pair `(a_i, b_i)`, the number of pairs `(a_j, b_j)` with
/// `a_j ≤ a_i` and `b_j ≤ b_i` (self-inclusive, ties inclusive on both axes).
///
/// Sorts by `a`, then counts with a Fenwick tree over dense `b` ranks.
/// Blocks of equal `a` are inserted whole before any member is queried, so
/// tie inclusion is exact: the counts equal the all-pairs definition integer
/// for integer. O(n log n).
pub fn dominance_counts(pairs: &[(f64, f64)]) -> Vec<u64> {
    let n = pairs.len();
    let mut b_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    b_sorted.sort_unstable_by(f64::total_cmp);
    b_sorted.dedup();
    let rank_of = |b: f64| b_sorted.partition_point(|&x| x < b);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&i, &j| pairs[i as usize].0.total_cmp(&pairs[j as usize].0));

    let mut counts = vec![0u64; n];
    let mut fenwick = Fenwick::new(b_sorted.len());
    let mut i = 0;
    while i < n {
        let a_block = pairs[order[i] as usize].0;
        let mut j = i;
        while j < n && pairs[order[j] as usize].0 == a_block {
            j += 1;
        }
        for k in i..j {
            fenwick.add(rank_of(pairs[order[k] as usize].1));
        }
        for k in i..j {
            let idx = order[k] as usize;
            counts[idx] = fenwick.prefix(rank_of(pairs[idx].1));
        }
        i = j;
    }
    counts
}

/// Empirical joint CDF of `(A, β)` evaluated at each population cell's own
/// coordinates: `prior(i) = |{j : A_j ≤ A_i ∧ β_j ≤ β_i}| / |population|`.
/// Non-population cells are left at 0 for the masking stage to finalise.
pub fn joint_cdf(a: &Grid, beta: &Grid, population: &CellMask) -> Result<PriorField> {
    a.check_geometry(beta, "joint_cdf")?;
    a.check_mask_geometry(population, "joint_cdf")?;

    let cells: Vec<usize> = population.iter_set().collect();
    if cells.is_empty() {
        return Err(Error::InvalidInput("joint CDF population is empty".into()));
    }
    let mut pairs = Vec::with_capacity(cells.len());
    for &idx in &cells {
        let (av, bv) = (a.values()[idx], beta.values()[idx]);
        if !a.is_valid_idx(idx) || !beta.is_valid_idx(idx) || !av.is_finite() || !bv.is_finite() {
            let (r, c) = a.row_col(idx);
            return Err(Error::InvalidInput(format!(
                "population cell ({r}, {c}) has non-finite A or beta"
            )));
        }
        pairs.push((av, bv));
    }

    let counts = dominance_counts(&pairs);
    let n = pairs.len() as f64;
    let mut values = vec![0.0; a.len()];
    for (&idx, &count) in cells.iter().zip(&counts) {
        values[idx] = count as f64 / n;
    }
    Ok(PriorField { prior: a.with_values(values)?, population_mask: population.clone() })
}

// ── Masking ──────────────────────────────────────────────────────────────────

/// Finalise the prior field for continuous coverage: population cells keep
/// their JCDF value, exterior background becomes NoData, and every other cell
/// (below the slope threshold, inside a channel buffer, an internal data
/// hole, or otherwise outside the population) becomes exactly 0.
pub fn apply_prior_masks(
    field: &PriorField,
    slope: &Grid,
    params: &MorphometricParams,
    stream_buffer: &CellMask,
    exterior: &CellMask,
) -> Result<PriorField> {
    params.validate()?;
    field.prior.check_geometry(slope, "apply_prior_masks")?;
    field.prior.check_mask_geometry(stream_buffer, "apply_prior_masks buffer")?;
    field.prior.check_mask_geometry(exterior, "apply_prior_masks exterior")?;
    field.prior.check_mask_geometry(&field.population_mask, "apply_prior_masks population")?;

    let nodata = field.prior.nodata_value();
    let mut values = Vec::with_capacity(field.prior.len());
    for idx in 0..field.prior.len() {
        if field.population_mask.get_idx(idx) {
            let ok = slope.is_valid_idx(idx)
                && slope.values()[idx] >= params.slope_threshold_deg
                && !stream_buffer.get_idx(idx)
                && !exterior.get_idx(idx);
            if !ok {
                let (r, c) = field.prior.row_col(idx);
                return Err(Error::InvalidInput(format!(
                    "population cell ({r}, {c}) violates the masking rules it should predate"
                )));
            }
            values.push(field.prior.values()[idx]);
        } else if exterior.get_idx(idx) {
            values.push(nodata);
        } else {
            values.push(0.0);
        }
    }
    Ok(PriorField {
        prior: field.prior.with_values(values)?,
        population_mask: field.population_mask.clone(),
    })
}

// ── Slope-unit aggregation ───────────────────────────────────────────────────

/// Per-slope-unit prior: each unit takes the maximum pixel prior among its
/// cells (instability is governed by the most critical location, so a mean
/// would understate unit-level susceptibility).
#[derive(Debug, Clone)]
pub struct SuAggregate {
    /// `(su_id, gpk)` sorted by id.
    pub rows: Vec<(u32, f64)>,
    /// Units whose every cell is exterior NoData, dropped from `rows`.
    pub dropped: Vec<u32>,
}

/// Maximum prior per slope unit. `su_labels` holds positive integer ids;
/// 0 or NoData marks cells outside all units. Masked-to-zero cells contribute
/// 0; exterior NoData cells contribute nothing.
pub fn aggregate_prior_to_su(field: &PriorField, su_labels: &Grid) -> Result<SuAggregate> {
    field.prior.check_geometry(su_labels, "aggregate_prior_to_su")?;

    let mut best: std::collections::BTreeMap<u32, Option<f64>> = std::collections::BTreeMap::new();
    for idx in 0..su_labels.len() {
        if !su_labels.is_valid_idx(idx) {
            continue;
        }
        let raw = su_labels.values()[idx];
        if raw == 0.0 {
            continue;
        }
        if raw < 0.0 || raw.fract() != 0.0 || raw > u32::MAX as f64 {
            let (r, c) = su_labels.row_col(idx);
            return Err(Error::InvalidInput(format!(
                "slope-unit label {raw} at cell ({r}, {c}) is not a positive integer"
            )));
        }
        let id = raw as u32;
        let entry = best.entry(id).or_insert(None);
        if field.prior.is_valid_idx(idx) {
            let p = field.prior.values()[idx];
            *entry = Some(entry.map_or(p, |cur| cur.max(p)));
        }
    }
    if best.is_empty() {
        return Err(Error::InvalidInput("no slope-unit ids present in label grid".into()));
    }

    let mut rows = Vec::with_capacity(best.len());
    let mut dropped = Vec::new();
    for (id, gpk) in best {
        match gpk {
            Some(v) => rows.push((id, v)),
            None => dropped.push(id),
        }
    }
    Ok(SuAggregate { rows, dropped })
}

// ── Sensitivity search ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRecord {
    pub slope_threshold_deg: f64,
    pub buffer_width_m: f64,
    pub auc: f64,
    pub brier: f64,
}

#[derive(Debug, Clone)]
pub struct SensitivityResult {
    /// One record per successful (threshold, buffer) pair, in grid order
    /// (thresholds outer, buffers inner).
    pub records: Vec<SensitivityRecord>,
    /// Failed pairs with the error text; recorded, never fatal.
    pub failures: Vec<(f64, f64, String)>,
    /// Lexicographic optimum: maximum AUC, then minimum Brier.
    pub best: SensitivityRecord,
}

/// Intermediate products shared across every parameter pair: the hydrology
/// stack is independent of the slope threshold and buffer width, so it is
/// computed once and only the population/JCDF/aggregation stages re-run.
pub struct PriorStack {
    pub hydro: HydroProducts,
    pub a: Grid,
    pub beta: Grid,
    pub exterior: CellMask,
}

impl PriorStack {
    pub fn build(dem: &Grid, stream_threshold_cells: usize, epsilon_m: f64) -> Result<Self> {
        let hydro = HydroProducts::compute(dem, epsilon_m, stream_threshold_cells)?;
        let a = drainage_area_log(&hydro.facc, dem.cellsize())?;
        let beta = mean_upslope_gradient(&hydro.facc, &hydro.facc_weighted, &hydro.slope)?;
        let exterior = exterior_mask(&hydro.slope.valid_mask());
        Ok(PriorStack { hydro, a, beta, exterior })
    }

    /// Full prior chain for one (slope threshold, buffer width) pair.
    pub fn prior_field(&self, params: &MorphometricParams) -> Result<PriorField> {
        params.validate()?;
        let buffer = buffer_mask(
            &self.hydro.streams,
            params.buffer_width_m,
            self.hydro.slope.cellsize(),
        )?;
        let mut population = CellMask::empty(self.a.ncols(), self.a.nrows());
        for idx in 0..self.a.len() {
            let in_population = self.a.is_valid_idx(idx)
                && self.beta.is_valid_idx(idx)
                && self.hydro.slope.is_valid_idx(idx)
                && self.hydro.slope.values()[idx] >= params.slope_threshold_deg
                && !buffer.get_idx(idx)
                && !self.exterior.get_idx(idx);
            population.set_idx(idx, in_population);
        }
        // Nothing exceeds the threshold (a flat scene, say): the prior is
        // identically zero rather than an error.
        let field = if population.count() == 0 {
            PriorField {
                prior: self.a.with_values(vec![0.0; self.a.len()])?,
                population_mask: population,
            }
        } else {
            joint_cdf(&self.a, &self.beta, &population)?
        };
        apply_prior_masks(&field, &self.hydro.slope, params, &buffer, &self.exterior)
    }

    /// Prior chain plus slope-unit aggregation.
    pub fn gpk(&self, params: &MorphometricParams, su_labels: &Grid) -> Result<SuAggregate> {
        let field = self.prior_field(params)?;
        aggregate_prior_to_su(&field, su_labels)
    }
}

/// Grid search over slope thresholds × buffer widths: each pair runs the full
/// prior chain, aggregates to slope units, and scores the resulting gpk
/// directly against the binary truth labels with AUC and Brier. The optimum
/// is lexicographic (max AUC, then min Brier; remaining ties keep the
/// earliest pair in grid order).
pub fn sensitivity_search(
    dem: &Grid,
    su_labels: &Grid,
    su_truth: &[(u32, u8)],
    slope_thresholds: &[f64],
    buffer_widths: &[f64],
    fixed: &MorphometricParams,
) -> Result<SensitivityResult> {
    if slope_thresholds.is_empty() || buffer_widths.is_empty() {
        return Err(Error::InvalidInput("sensitivity search needs non-empty parameter lists".into()));
    }
    if su_truth.iter().any(|&(_, y)| y > 1) {
        return Err(Error::InvalidInput("truth labels must be 0 or 1".into()));
    }
    let truth: std::collections::HashMap<u32, u8> = su_truth.iter().copied().collect();
    if truth.len() != su_truth.len() {
        return Err(Error::InvalidInput("duplicate su_id in truth table".into()));
    }

    let stack = PriorStack::build(dem, fixed.stream_threshold_cells, fixed.epsilon_m)?;

    let pairs: Vec<(f64, f64)> = slope_thresholds
        .iter()
        .flat_map(|&t| buffer_widths.iter().map(move |&b| (t, b)))
        .collect();

    let outcomes: Vec<std::result::Result<SensitivityRecord, (f64, f64, String)>> = pairs
        .par_iter()
        .map(|&(t, b)| {
            let params = MorphometricParams {
                slope_threshold_deg: t,
                buffer_width_m: b,
                stream_threshold_cells: fixed.stream_threshold_cells,
                epsilon_m: fixed.epsilon_m,
            };
            let run = || -> Result<SensitivityRecord> {
                let agg = stack.gpk(&params, su_labels)?;
                let mut labels = Vec::new();
                let mut scores = Vec::new();
                for &(id, gpk) in &agg.rows {
                    if let Some(&y) = truth.get(&id) {
                        labels.push(y);
                        scores.push(gpk);
                    }
                }
                let auc = auc_roc(&labels, &scores)?;
                let brier = brier_score(&labels, &scores)?;
                Ok(SensitivityRecord { slope_threshold_deg: t, buffer_width_m: b, auc, brier })
            };
            run().map_err(|e| (t, b, e.to_string()))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(fail) => failures.push(fail),
        }
    }
    let best = records
        .iter()
        .cloned()
        .reduce(|best, rec| {
            if rec.auc > best.auc || (rec.auc == best.auc && rec.brier < best.brier) {
                rec
            } else {
                best
            }
        })
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "every sensitivity pair failed; first failure: {}",
                failures
                    .first()
                    .map(|(t, b, e)| format!("({t}, {b}): {e}"))
                    .unwrap_or_default()
            ))
        })?;

    Ok(SensitivityResult { records, failures, best })
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid_from(values: Vec<f64>, ncols: usize, nrows: usize) -> Grid {
        Grid::new(ncols, nrows, 0.0, 0.0, 10.0, -9999.0, values).unwrap()
    }

    fn full_mask(ncols: usize, nrows: usize) -> CellMask {
        CellMask::from_bits(ncols, nrows, vec![true; ncols * nrows]).unwrap()
    }

    #[test]
    fn drainage_area_log_headwater_and_channel() {
        // Facc 0 at r=10 → ln(100); Facc 99 → ln(10000).
        let facc = grid_from(vec![0.0, 99.0], 2, 1);
        let a = drainage_area_log(&facc, 10.0).unwrap();
        assert!((a.get(0, 0) - 100.0f64.ln()).abs() < 1e-12);
        assert!((a.get(0, 1) - 10000.0f64.ln()).abs() < 1e-12);
        assert!((a.get(0, 0) - 4.605170).abs() < 1e-6);
        assert!((a.get(0, 1) - 9.210340).abs() < 1e-6);
    }

    #[test]
    fn drainage_area_log_monotone_in_facc() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..500.0)).collect();
        let facc = grid_from(values.clone(), 8, 8);
        let a = drainage_area_log(&facc, 25.0).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                if values[i] > values[j] {
                    assert!(a.values()[i] > a.values()[j]);
                }
            }
        }
    }

    #[test]
    fn drainage_area_log_rejects_negative() {
        let facc = grid_from(vec![-1.0], 1, 1);
        assert!(matches!(drainage_area_log(&facc, 10.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mean_upslope_gradient_headwater_is_own_slope() {
        let facc = grid_from(vec![0.0], 1, 1);
        let facc_w = grid_from(vec![0.0], 1, 1);
        let slope = grid_from(vec![20.0], 1, 1);
        let beta = mean_upslope_gradient(&facc, &facc_w, &slope).unwrap();
        assert_eq!(beta.get(0, 0), 20.0);
    }

    #[test]
    fn mean_upslope_gradient_two_cell_chain() {
        // Upstream slope 10°, downstream slope 20°: downstream has Facc=1,
        // slope-weighted Facc=10 → β = (10+20)/2 = 15°.
        let facc = grid_from(vec![0.0, 1.0], 2, 1);
        let facc_w = grid_from(vec![0.0, 10.0], 2, 1);
        let slope = grid_from(vec![10.0, 20.0], 2, 1);
        let beta = mean_upslope_gradient(&facc, &facc_w, &slope).unwrap();
        assert_eq!(beta.get(0, 0), 10.0);
        assert_eq!(beta.get(0, 1), 15.0);
    }

    #[test]
    fn mean_upslope_gradient_geometry_mismatch() {
        let facc = grid_from(vec![0.0], 1, 1);
        let other = grid_from(vec![0.0, 0.0], 2, 1);
        assert!(matches!(
            mean_upslope_gradient(&facc, &other, &facc),
            Err(Error::GeometryMismatch(_))
        ));
    }

    fn dominance_oracle(pairs: &[(f64, f64)]) -> Vec<u64> {
        pairs
            .iter()
            .map(|&(a, b)| {
                pairs.iter().filter(|&&(aj, bj)| aj <= a && bj <= b).count() as u64
            })
            .collect()
    }

    #[test]
    fn joint_cdf_identical_pairs_all_one() {
        let a = grid_from(vec![3.0; 9], 3, 3);
        let beta = grid_from(vec![15.0; 9], 3, 3);
        let field = joint_cdf(&a, &beta, &full_mask(3, 3)).unwrap();
        for v in field.prior.values() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn joint_cdf_chain_dominance() {
        let a = grid_from(vec![1.0, 2.0, 3.0], 3, 1);
        let beta = grid_from(vec![5.0, 6.0, 7.0], 3, 1);
        let field = joint_cdf(&a, &beta, &full_mask(3, 1)).unwrap();
        let want = [1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (got, want) in field.prior.values().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn dominance_counts_match_all_pairs_oracle_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            // Coarse quantisation injects plenty of exact ties on both axes.
            let n = rng.random_range(1..400);
            let pairs: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    (
                        (rng.random_range(0..20) as f64) * 0.5,
                        (rng.random_range(0..15) as f64) * 1.5,
                    )
                })
                .collect();
            assert_eq!(dominance_counts(&pairs), dominance_oracle(&pairs));
        }
    }

    #[test]
    fn dominance_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.0..40.0)))
            .collect();
        let transformed: Vec<(f64, f64)> =
            pairs.iter().map(|&(a, b)| (a.exp(), b.powi(3))).collect();
        assert_eq!(dominance_counts(&pairs), dominance_counts(&transformed));
    }

    #[test]
    fn joint_cdf_is_monotone_in_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a_vals: Vec<f64> = (0..49).map(|_| rng.random_range(0.0..10.0)).collect();
        let b_vals: Vec<f64> = (0..49).map(|_| rng.random_range(0.0..10.0)).collect();
        let a = grid_from(a_vals.clone(), 7, 7);
        let beta = grid_from(b_vals.clone(), 7, 7);
        let field = joint_cdf(&a, &beta, &full_mask(7, 7)).unwrap();
        let p = field.prior.values();
        for i in 0..49 {
            for j in 0..49 {
                if a_vals[i] >= a_vals[j] && b_vals[i] >= b_vals[j] {
                    assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn joint_cdf_rejects_empty_population() {
        let a = grid_from(vec![1.0], 1, 1);
        let empty = CellMask::empty(1, 1);
        assert!(matches!(joint_cdf(&a, &a, &empty), Err(Error::InvalidInput(_))));
    }

    fn toy_field() -> (PriorField, Grid) {
        // 4x4: column 0 below slope threshold, column 1 buffered,
        // cell (0,3) exterior NoData, rest population.
        let ncols = 4;
        let nrows = 4;
        let mut population = CellMask::empty(ncols, nrows);
        let mut prior_values = vec![0.0; 16];
        for r in 0..nrows {
            for c in 2..ncols {
                if (r, c) == (0, 3) {
                    continue;
                }
                population.set(r, c, true);
                prior_values[r * ncols + c] = 0.25 + 0.05 * (r * ncols + c) as f64 / 16.0;
            }
        }
        let prior = grid_from(prior_values, ncols, nrows);
        let slope_values: Vec<f64> = (0..16)
            .map(|i| if i % 4 == 0 { 9.9 } else { 25.0 })
            .collect();
        let slope = grid_from(slope_values, 4, 4);
        (PriorField { prior, population_mask: population }, slope)
    }

    #[test]
    fn masks_zero_and_nodata_rules() {
        let (field, slope) = toy_field();
        let params = MorphometricParams::new(10.0, 40.0, 5).unwrap();
        let mut buffer = CellMask::empty(4, 4);
        for r in 0..4 {
            buffer.set(r, 1, true);
        }
        let mut exterior = CellMask::empty(4, 4);
        exterior.set(0, 3, true);

        let masked = apply_prior_masks(&field, &slope, &params, &buffer, &exterior).unwrap();
        for r in 0..4 {
            assert_eq!(masked.prior.get(r, 0), 0.0, "slope 9.9 under 10 threshold");
            assert_eq!(masked.prior.get(r, 1), 0.0, "buffered cell");
        }
        assert!(!masked.prior.is_valid(0, 3), "exterior is NoData");
        for r in 1..4 {
            assert_eq!(masked.prior.get(r, 3), field.prior.get(r, 3), "population untouched");
        }
        // Masking never raises a value.
        for i in 0..16 {
            if masked.prior.is_valid_idx(i) {
                assert!(masked.prior.values()[i] <= field.prior.values()[i] + 1e-15);
            }
        }
    }

    #[test]
    fn masks_leave_nodata_only_on_exterior() {
        let (field, slope) = toy_field();
        let params = MorphometricParams::new(10.0, 40.0, 5).unwrap();
        let buffer = CellMask::empty(4, 4);
        let mut exterior = CellMask::empty(4, 4);
        exterior.set(0, 3, true);
        let masked = apply_prior_masks(&field, &slope, &params, &buffer, &exterior).unwrap();
        for i in 0..16 {
            assert_eq!(!masked.prior.is_valid_idx(i), exterior.get_idx(i));
        }
    }

    #[test]
    fn aggregate_takes_max_per_unit() {
        let prior = grid_from(vec![0.2, 0.5, 0.3, 0.0], 4, 1);
        let labels = grid_from(vec![1.0, 1.0, 1.0, 2.0], 4, 1);
        let field = PriorField { prior, population_mask: full_mask(4, 1) };
        let agg = aggregate_prior_to_su(&field, &labels).unwrap();
        assert_eq!(agg.rows, vec![(1, 0.5), (2, 0.0)]);
        assert!(agg.dropped.is_empty());
    }

    #[test]
    fn aggregate_drops_all_exterior_unit() {
        let mut prior = grid_from(vec![0.2, 0.4, 0.0, 0.0], 4, 1);
        prior.set(0, 2, -9999.0);
        prior.set(0, 3, -9999.0);
        let labels = grid_from(vec![1.0, 1.0, 2.0, 2.0], 4, 1);
        let field = PriorField { prior, population_mask: CellMask::empty(4, 1) };
        let agg = aggregate_prior_to_su(&field, &labels).unwrap();
        assert_eq!(agg.rows, vec![(1, 0.4)]);
        assert_eq!(agg.dropped, vec![2]);
    }

    #[test]
    fn aggregate_matches_groupby_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 12 * 12;
        let prior_vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let label_vals: Vec<f64> = (0..n).map(|_| rng.random_range(0..7) as f64).collect();
        let prior = grid_from(prior_vals.clone(), 12, 12);
        let labels = grid_from(label_vals.clone(), 12, 12);
        let field = PriorField { prior, population_mask: full_mask(12, 12) };
        let agg = aggregate_prior_to_su(&field, &labels).unwrap();

        let mut oracle: std::collections::BTreeMap<u32, f64> = Default::default();
        for i in 0..n {
            let id = label_vals[i] as u32;
            if id > 0 {
                let e = oracle.entry(id).or_insert(f64::NEG_INFINITY);
                *e = e.max(prior_vals[i]);
            }
        }
        let expect: Vec<(u32, f64)> = oracle.into_iter().collect();
        assert_eq!(agg.rows, expect);
    }

    #[test]
    fn aggregate_rejects_label_free_grid() {
        let prior = grid_from(vec![0.1; 4], 2, 2);
        let labels = grid_from(vec![0.0; 4], 2, 2);
        let field = PriorField { prior, population_mask: full_mask(2, 2) };
        assert!(matches!(
            aggregate_prior_to_su(&field, &labels),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gpk_bounds_and_dominates_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10 * 10;
        let prior_vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let label_vals: Vec<f64> = (0..n).map(|_| rng.random_range(1..5) as f64).collect();
        let prior = grid_from(prior_vals.clone(), 10, 10);
        let labels = grid_from(label_vals.clone(), 10, 10);
        let field = PriorField { prior, population_mask: full_mask(10, 10) };
        let agg = aggregate_prior_to_su(&field, &labels).unwrap();
        let gpk: std::collections::HashMap<u32, f64> = agg.rows.iter().copied().collect();
        for i in 0..n {
            let id = label_vals[i] as u32;
            let g = gpk[&id];
            assert!((0.0..=1.0).contains(&g));
            assert!(g >= prior_vals[i]);
        }
    }
}
