//! Synthetic scenes with a planted geomorphic signal: DEMs, contiguous
//! slope-unit partitions, and logistic inventories driven by the gpk column.
//! These stand in for external benchmark datasets in tests and experiments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::seeding::derive_seed;
use crate::tabular::FeatureTable;

// ── DEM generation ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub enum DemKind {
    /// `z = gx·x + gy·y` (x east, y north, metres).
    Plane { gx: f64, gy: f64 },
    /// `z = apex − gradient·distance_to_centre`.
    Cone { apex: f64, gradient: f64 },
    /// Sum of seeded Gaussian bumps.
    GaussianHills { hills: usize, amplitude: f64, sigma_m: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemSpec {
    pub kind: DemKind,
    /// Square grid edge length in cells; at least 16.
    pub size: usize,
    pub cellsize: f64,
    /// White-noise standard deviation added to every cell (0 = none).
    pub noise_sd: f64,
    pub seed: u64,
}

/// Deterministic synthetic DEM from the spec and seed.
pub fn generate_dem(spec: &DemSpec) -> Result<Grid> {
    if spec.size < 16 {
        return Err(Error::InvalidInput(format!("DEM size {} is below 16", spec.size)));
    }
    if !(spec.cellsize > 0.0) {
        return Err(Error::InvalidInput(format!("cellsize must be > 0, got {}", spec.cellsize)));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sd must be >= 0, got {}", spec.noise_sd)));
    }
    let n = spec.size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(n * n);

    match &spec.kind {
        DemKind::Plane { gx, gy } => {
            for r in 0..n {
                for c in 0..n {
                    let x = c as f64 * spec.cellsize;
                    let y = (n - 1 - r) as f64 * spec.cellsize;
                    values.push(gx * x + gy * y);
                }
            }
        }
        DemKind::Cone { apex, gradient } => {
            let mid = (n - 1) as f64 / 2.0;
            for r in 0..n {
                for c in 0..n {
                    let dx = (c as f64 - mid) * spec.cellsize;
                    let dy = (r as f64 - mid) * spec.cellsize;
                    values.push(apex - gradient * (dx * dx + dy * dy).sqrt());
                }
            }
        }
        DemKind::GaussianHills { hills, amplitude, sigma_m } => {
            if *hills == 0 || !(*amplitude > 0.0) || !(*sigma_m > 0.0) {
                return Err(Error::InvalidInput(
                    "gaussian hills need hills >= 1, amplitude > 0, sigma > 0".into(),
                ));
            }
            let extent = n as f64 * spec.cellsize;
            let bumps: Vec<(f64, f64, f64, f64)> = (0..*hills)
                .map(|_| {
                    let cx = rng.random_range(0.0..extent);
                    let cy = rng.random_range(0.0..extent);
                    let amp = amplitude * rng.random_range(0.5..1.0);
                    let sigma = sigma_m * rng.random_range(0.6..1.0);
                    (cx, cy, amp, sigma)
                })
                .collect();
            for r in 0..n {
                for c in 0..n {
                    let x = c as f64 * spec.cellsize;
                    let y = (n - 1 - r) as f64 * spec.cellsize;
                    let z: f64 = bumps
                        .iter()
                        .map(|&(cx, cy, amp, sigma)| {
                            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                            amp * (-d2 / (2.0 * sigma * sigma)).exp()
                        })
                        .sum();
                    values.push(z);
                }
            }
        }
    }

    if spec.noise_sd > 0.0 {
        for v in values.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sd * eps;
        }
    }
    Grid::new(n, n, 0.0, 0.0, spec.cellsize, -9999.0, values)
}

// ── Slope-unit generation ────────────────────────────────────────────────────

/// Partition the valid cells into roughly `target_units` contiguous units by
/// multi-source region growing from spatially stratified seed cells (one
/// seed per block of a jittered lattice). Any valid cell the growth cannot
/// reach seeds a fresh unit, so coverage is total and labels stay contiguous
/// from 1.
pub fn generate_su_labels(dem: &Grid, target_units: usize, seed: u64) -> Result<Grid> {
    if target_units < 2 {
        return Err(Error::InvalidInput("need at least 2 slope units".into()));
    }
    let (ncols, nrows) = (dem.ncols(), dem.nrows());
    let valid_cells: Vec<usize> = (0..dem.len()).filter(|&i| dem.is_valid_idx(i)).collect();
    if valid_cells.len() < target_units {
        return Err(Error::InvalidInput(format!(
            "{} valid cells cannot form {target_units} units",
            valid_cells.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // One seed per block of a ⌈√M⌉×⌈√M⌉ lattice, jittered within the block.
    let side = (target_units as f64).sqrt().ceil() as usize;
    let mut seeds = Vec::with_capacity(target_units);
    let mut taken = vec![false; dem.len()];
    for b in 0..side * side {
        if seeds.len() == target_units {
            break;
        }
        let (br, bc) = (b / side, b % side);
        let r0 = br * nrows / side;
        let r1 = ((br + 1) * nrows / side).max(r0 + 1).min(nrows);
        let c0 = bc * ncols / side;
        let c1 = ((bc + 1) * ncols / side).max(c0 + 1).min(ncols);
        let block: Vec<usize> = (r0..r1)
            .flat_map(|r| (c0..c1).map(move |c| r * ncols + c))
            .filter(|&i| dem.is_valid_idx(i) && !taken[i])
            .collect();
        if block.is_empty() {
            continue; // all-NoData block; topped up below
        }
        let cell = block[rng.random_range(0..block.len())];
        seeds.push(cell);
        taken[cell] = true;
    }
    if seeds.len() < target_units {
        let mut pool: Vec<usize> = valid_cells.iter().copied().filter(|&c| !taken[c]).collect();
        pool.shuffle(&mut rng);
        for cell in pool {
            if seeds.len() == target_units {
                break;
            }
            taken[cell] = true;
            seeds.push(cell);
        }
    }

    let mut labels = vec![0u32; dem.len()];
    let mut queue = std::collections::VecDeque::new();
    for (unit, &cell) in seeds.iter().enumerate() {
        labels[cell] = unit as u32 + 1;
        queue.push_back(cell);
    }
    let mut next_label = seeds.len() as u32;
    let mut cursor = 0;
    loop {
        grow(dem, &mut labels, &mut queue, &mut rng);
        // Unreached pocket (separated by NoData): open a new unit there.
        while cursor < valid_cells.len() && labels[valid_cells[cursor]] != 0 {
            cursor += 1;
        }
        if cursor == valid_cells.len() {
            break;
        }
        next_label += 1;
        labels[valid_cells[cursor]] = next_label;
        queue.push_back(valid_cells[cursor]);
    }

    let values = (0..dem.len())
        .map(|i| if dem.is_valid_idx(i) { labels[i] as f64 } else { dem.nodata_value() })
        .collect();
    dem.with_values(values)
}

/// 4-connected BFS growth; the frontier order is shuffled per step so unit
/// boundaries look irregular while staying seed-deterministic.
fn grow(
    dem: &Grid,
    labels: &mut [u32],
    queue: &mut std::collections::VecDeque<usize>,
    rng: &mut ChaCha8Rng,
) {
    let (ncols, nrows) = (dem.ncols(), dem.nrows());
    while !queue.is_empty() {
        // Drain one frontier generation, visit it in shuffled order.
        let mut frontier: Vec<usize> = queue.drain(..).collect();
        frontier.shuffle(rng);
        for idx in frontier {
            let label = labels[idx];
            let (r, c) = (idx / ncols, idx % ncols);
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= nrows as isize || nc >= ncols as isize {
                    continue;
                }
                let j = nr as usize * ncols + nc as usize;
                if labels[j] == 0 && dem.is_valid_idx(j) {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
    }
}

// ── Inventory generation ─────────────────────────────────────────────────────

/// Generating weights recorded for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryTruth {
    /// Weight on gpk first, then one per nuisance column.
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Labelled feature table with standard-normal nuisance columns and labels
/// drawn from `Bernoulli(sigmoid(intercept + w·[gpk, nuisance…]))`.
///
/// Per-row randomness is keyed by `(seed, su_id)`, not row position, so
/// permuting the gpk rows permutes the output rows unchanged.
pub fn generate_inventory(
    gpk: &[(u32, f64)],
    nuisance_covariates: usize,
    signal_weights: &[f64],
    intercept: f64,
    seed: u64,
) -> Result<(FeatureTable, InventoryTruth)> {
    if signal_weights.len() != 1 + nuisance_covariates {
        return Err(Error::InvalidInput(format!(
            "{} weights for gpk + {nuisance_covariates} nuisance columns",
            signal_weights.len()
        )));
    }
    let n = gpk.len();
    let mut su_ids = Vec::with_capacity(n);
    let mut gpk_col = Vec::with_capacity(n);
    let mut nuisance: Vec<Vec<f64>> = vec![Vec::with_capacity(n); nuisance_covariates];
    let mut labels = Vec::with_capacity(n);

    for &(id, g) in gpk {
        let mut row_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x696e76, id as u64));
        let mut eta = intercept + signal_weights[0] * g;
        for (k, col) in nuisance.iter_mut().enumerate() {
            let v: f64 = row_rng.sample(StandardNormal);
            col.push(v);
            eta += signal_weights[k + 1] * v;
        }
        let p = 1.0 / (1.0 + (-eta).exp());
        let u: f64 = row_rng.random_range(0.0..1.0);
        labels.push(u8::from(u < p));
        su_ids.push(id);
        gpk_col.push(g);
    }

    let mut names = vec!["gpk".to_string()];
    let mut columns = vec![gpk_col];
    for (k, col) in nuisance.into_iter().enumerate() {
        names.push(format!("nuisance_{}", k + 1));
        columns.push(col);
    }
    let table = FeatureTable::new(su_ids, names, columns, Some(labels))?;
    Ok((table, InventoryTruth { weights: signal_weights.to_vec(), intercept }))
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc_roc;
    use crate::hydrology::{d8_flow_direction, D8_OFFSETS};
    use crate::terrain::slope_degrees;

    #[test]
    fn plane_dem_matches_analytic_slope() {
        let spec = DemSpec {
            kind: DemKind::Plane { gx: 0.1, gy: 0.0 },
            size: 24,
            cellsize: 10.0,
            noise_sd: 0.0,
            seed: 1,
        };
        let dem = generate_dem(&spec).unwrap();
        let slope = slope_degrees(&dem);
        let expected = 0.1f64.atan().to_degrees();
        for r in 1..23 {
            for c in 1..23 {
                assert!((slope.get(r, c) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cone_flow_points_radially_outward() {
        let spec = DemSpec {
            kind: DemKind::Cone { apex: 100.0, gradient: 0.2 },
            size: 33,
            cellsize: 10.0,
            noise_sd: 0.0,
            seed: 2,
        };
        let dem = generate_dem(&spec).unwrap();
        let flow = d8_flow_direction(&dem).unwrap();
        let mid = 16.0;
        for r in 1..32 {
            for c in 1..32 {
                if (r, c) == (16, 16) {
                    continue;
                }
                let idx = r * 33 + c;
                let code = flow.dir_idx(idx);
                if code == 0 {
                    continue;
                }
                let k = code.trailing_zeros() as usize;
                let (dr, dc) = D8_OFFSETS[k];
                // Step azimuth must be within 22.5° of the outward radial.
                let radial = (c as f64 - mid).atan2(-(r as f64 - mid));
                let step = (dc as f64).atan2(-(dr as f64));
                let mut diff = (radial - step).abs().to_degrees();
                if diff > 180.0 {
                    diff = 360.0 - diff;
                }
                assert!(diff <= 22.5 + 1e-9, "cell ({r},{c}): radial-step gap {diff}°");
            }
        }
    }

    #[test]
    fn dem_generation_is_deterministic() {
        let spec = DemSpec {
            kind: DemKind::GaussianHills { hills: 12, amplitude: 60.0, sigma_m: 150.0 },
            size: 32,
            cellsize: 10.0,
            noise_sd: 0.5,
            seed: 7,
        };
        assert_eq!(generate_dem(&spec).unwrap(), generate_dem(&spec).unwrap());
    }

    #[test]
    fn size_below_16_rejected() {
        let spec = DemSpec {
            kind: DemKind::Plane { gx: 0.1, gy: 0.0 },
            size: 15,
            cellsize: 10.0,
            noise_sd: 0.0,
            seed: 0,
        };
        assert!(generate_dem(&spec).is_err());
    }

    fn hills_dem(seed: u64) -> Grid {
        generate_dem(&DemSpec {
            kind: DemKind::GaussianHills { hills: 10, amplitude: 50.0, sigma_m: 120.0 },
            size: 48,
            cellsize: 10.0,
            noise_sd: 0.2,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn su_labels_cover_every_valid_cell_once() {
        let mut dem = hills_dem(3);
        // NoData pocket to exercise the unreached-region path.
        for r in 20..26 {
            for c in 20..26 {
                dem.set(r, c, dem.nodata_value());
            }
        }
        let labels = generate_su_labels(&dem, 30, 5).unwrap();
        let mut max_label = 0u32;
        for i in 0..dem.len() {
            if dem.is_valid_idx(i) {
                let v = labels.values()[i];
                assert!(v >= 1.0, "unlabelled valid cell {i}");
                max_label = max_label.max(v as u32);
            } else {
                assert!(!labels.is_valid_idx(i));
            }
        }
        // Labels contiguous 1..=M.
        let mut seen = vec![false; max_label as usize + 1];
        for i in 0..dem.len() {
            if labels.is_valid_idx(i) {
                seen[labels.values()[i] as usize] = true;
            }
        }
        assert!(seen[1..].iter().all(|&s| s), "label gap below {max_label}");
    }

    #[test]
    fn su_units_are_4_connected() {
        let dem = hills_dem(4);
        let labels = generate_su_labels(&dem, 25, 9).unwrap();
        let ncols = dem.ncols();
        let mut max_label = 0u32;
        for i in 0..labels.len() {
            if labels.is_valid_idx(i) {
                max_label = max_label.max(labels.values()[i] as u32);
            }
        }
        for unit in 1..=max_label {
            let members: Vec<usize> = (0..labels.len())
                .filter(|&i| labels.is_valid_idx(i) && labels.values()[i] as u32 == unit)
                .collect();
            assert!(!members.is_empty());
            // Flood fill from the first member must reach all of them.
            let mut reached = std::collections::HashSet::new();
            let mut queue = std::collections::VecDeque::from([members[0]]);
            reached.insert(members[0]);
            while let Some(idx) = queue.pop_front() {
                let (r, c) = (idx / ncols, idx % ncols);
                for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= dem.nrows() as isize || nc >= ncols as isize {
                        continue;
                    }
                    let j = nr as usize * ncols + nc as usize;
                    if labels.is_valid_idx(j)
                        && labels.values()[j] as u32 == unit
                        && reached.insert(j)
                    {
                        queue.push_back(j);
                    }
                }
            }
            assert_eq!(reached.len(), members.len(), "unit {unit} disconnected");
        }
    }

    #[test]
    fn plane_with_two_units_splits_contiguously() {
        let dem = generate_dem(&DemSpec {
            kind: DemKind::Plane { gx: 0.05, gy: 0.0 },
            size: 16,
            cellsize: 10.0,
            noise_sd: 0.0,
            seed: 0,
        })
        .unwrap();
        let labels = generate_su_labels(&dem, 2, 1).unwrap();
        let distinct: std::collections::HashSet<u64> =
            labels.values().iter().map(|&v| v as u64).collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn inventory_base_rate_near_half_with_zero_weights() {
        let gpk: Vec<(u32, f64)> = (1..=2000).map(|i| (i, (i % 100) as f64 / 100.0)).collect();
        let (table, truth) = generate_inventory(&gpk, 2, &[0.0, 0.0, 0.0], 0.0, 11).unwrap();
        assert_eq!(truth.weights, vec![0.0, 0.0, 0.0]);
        let (pos, _) = table.class_counts().unwrap();
        let rate = pos as f64 / table.n_rows() as f64;
        assert!((rate - 0.5).abs() <= 0.05, "rate {rate}");
    }

    #[test]
    fn strong_gpk_weight_makes_gpk_predictive() {
        // Uniform gpk with logistic weight 8 centres the odds on ±4 and
        // yields ranking AUC ≈ 0.90 (weight 4 only reaches ≈ 0.78).
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 400);
            let gpk: Vec<(u32, f64)> =
                (1..=2000).map(|i| (i, rng.random_range(0.0..1.0))).collect();
            let (table, _) = generate_inventory(&gpk, 0, &[8.0], -4.0, seed).unwrap();
            let auc =
                auc_roc(table.labels().unwrap(), table.column("gpk").unwrap()).unwrap();
            assert!(auc >= 0.85, "seed {seed}: AUC {auc}");
        }
    }

    #[test]
    fn inventory_deterministic_and_exchangeable() {
        let gpk: Vec<(u32, f64)> = (1..=50).map(|i| (i, i as f64 / 50.0)).collect();
        let (a, _) = generate_inventory(&gpk, 3, &[2.0, 0.5, -0.5, 0.0], -1.0, 9).unwrap();
        let (b, _) = generate_inventory(&gpk, 3, &[2.0, 0.5, -0.5, 0.0], -1.0, 9).unwrap();
        assert_eq!(a, b);

        let mut reversed = gpk.clone();
        reversed.reverse();
        let (c, _) = generate_inventory(&reversed, 3, &[2.0, 0.5, -0.5, 0.0], -1.0, 9).unwrap();
        for (i, &(id, _)) in reversed.iter().enumerate() {
            let j = a.su_ids().iter().position(|&x| x == id).unwrap();
            assert_eq!(c.labels().unwrap()[i], a.labels().unwrap()[j]);
            assert_eq!(c.column("nuisance_2").unwrap()[i], a.column("nuisance_2").unwrap()[j]);
        }
    }

    #[test]
    fn weight_length_must_match() {
        let gpk = vec![(1u32, 0.5)];
        assert!(generate_inventory(&gpk, 2, &[1.0], 0.0, 0).is_err());
    }
}
