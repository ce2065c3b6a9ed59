//! Hydrological conditioning and D8 flow routing.
//!
//! `fill_depressions` produces a drainage-conditioned DEM via priority-flood
//! with an epsilon gradient, `d8_flow_direction` assigns each cell its single
//! steepest-descent receiver, and `flow_accumulation` counts (or weight-sums)
//! the upstream cells draining through each cell in topological order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::raster::{CellMask, Grid};

/// D8 neighbour offsets `(Δrow, Δcol)` in clockwise code order starting East.
/// Index `k` carries direction code `1 << k` (ESRI convention: 1=E, 2=SE,
/// 4=S, 8=SW, 16=W, 32=NW, 64=N, 128=NE).
pub const D8_OFFSETS: [(isize, isize); 8] = [
    (0, 1),   // 1: E
    (1, 1),   // 2: SE
    (1, 0),   // 4: S
    (1, -1),  // 8: SW
    (0, -1),  // 16: W
    (-1, -1), // 32: NW
    (-1, 0),  // 64: N
    (-1, 1),  // 128: NE
];

/// Center-to-center distance to each D8 neighbour in cell units.
pub const D8_DISTANCE: [f64; 8] = [
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
];

// ── FlowField ────────────────────────────────────────────────────────────────

/// Per-cell D8 direction codes plus a topological order of the flow DAG
/// (every cell precedes its receiver). Code 0 marks an outlet: a valid cell
/// with no lower valid neighbour, which after epsilon-filling occurs only on
/// the raster border or beside NoData.
#[derive(Debug, Clone)]
pub struct FlowField {
    ncols: usize,
    nrows: usize,
    xllcorner: f64,
    yllcorner: f64,
    cellsize: f64,
    nodata: f64,
    dirs: Vec<u8>,
    valid: Vec<bool>,
    topo_order: Vec<usize>,
}

impl FlowField {
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    #[inline]
    pub fn is_valid_idx(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn valid_count(&self) -> usize {
        self.topo_order.len()
    }

    /// D8 code of a valid cell (0 = outlet).
    #[inline]
    pub fn dir_idx(&self, idx: usize) -> u8 {
        self.dirs[idx]
    }

    /// Receiver cell index, or None for outlets and invalid cells.
    #[inline]
    pub fn receiver(&self, idx: usize) -> Option<usize> {
        let code = self.dirs[idx];
        if code == 0 || !self.valid[idx] {
            return None;
        }
        let k = code.trailing_zeros() as usize;
        let (dr, dc) = D8_OFFSETS[k];
        let r = (idx / self.ncols) as isize + dr;
        let c = (idx % self.ncols) as isize + dc;
        debug_assert!(r >= 0 && c >= 0 && r < self.nrows as isize && c < self.ncols as isize);
        Some(r as usize * self.ncols + c as usize)
    }

    /// Valid cell indices ordered so that every donor precedes its receiver.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Direction codes as a grid (NoData on invalid cells), for debugging and
    /// the `flowdir.asc` stage output.
    pub fn to_code_grid(&self) -> Grid {
        let values = self
            .dirs
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { d as f64 } else { self.nodata })
            .collect();
        Grid::new(
            self.ncols,
            self.nrows,
            self.xllcorner,
            self.yllcorner,
            self.cellsize,
            self.nodata,
            values,
        )
        .expect("shape preserved")
    }

    fn grid_with(&self, values: Vec<f64>) -> Grid {
        Grid::new(
            self.ncols,
            self.nrows,
            self.xllcorner,
            self.yllcorner,
            self.cellsize,
            self.nodata,
            values,
        )
        .expect("shape preserved")
    }

    fn check_companion(&self, grid: &Grid, what: &str) -> Result<()> {
        if grid.ncols() == self.ncols
            && grid.nrows() == self.nrows
            && grid.xllcorner() == self.xllcorner
            && grid.yllcorner() == self.yllcorner
            && grid.cellsize() == self.cellsize
        {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: grid {}x{} does not match flow field {}x{}",
                grid.ncols(),
                grid.nrows(),
                self.ncols,
                self.nrows
            )))
        }
    }
}

// ── Depression filling ───────────────────────────────────────────────────────

#[derive(PartialEq)]
struct HeapKey(f64, u64, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
            .then_with(|| self.2.cmp(&other.2))
    }
}

/// Priority-flood depression filling with an epsilon gradient.
///
/// Seeds the queue with every data-region edge cell (raster border or beside
/// NoData) and floods inward from the lowest seed. A cell lower than the
/// surface it is reached from is raised to that surface plus `epsilon`, so
/// every valid cell ends up with a strictly descending 8-neighbour path to an
/// edge cell and no flats remain. Cells that already drain are unchanged.
pub fn fill_depressions(dem: &Grid, epsilon: f64) -> Result<Grid> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
    }
    let (ncols, nrows) = (dem.ncols(), dem.nrows());
    let n = dem.len();
    let mut filled: Vec<f64> = dem.values().to_vec();
    let mut visited = vec![false; n];
    let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();
    let mut seq = 0u64;

    let mut any_valid = false;
    for idx in 0..n {
        if !dem.is_valid_idx(idx) {
            continue;
        }
        any_valid = true;
        if is_edge_cell(dem, idx) {
            visited[idx] = true;
            heap.push(Reverse(HeapKey(filled[idx], seq, idx)));
            seq += 1;
        }
    }
    if !any_valid {
        return Err(Error::InvalidInput("DEM has no valid cells".into()));
    }

    while let Some(Reverse(HeapKey(elev, _, idx))) = heap.pop() {
        let (r, c) = (idx / ncols, idx % ncols);
        for &(dr, dc) in &D8_OFFSETS {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= nrows as isize || nc >= ncols as isize {
                continue;
            }
            let j = nr as usize * ncols + nc as usize;
            if visited[j] || !dem.is_valid_idx(j) {
                continue;
            }
            visited[j] = true;
            if filled[j] <= elev {
                filled[j] = elev + epsilon;
            }
            heap.push(Reverse(HeapKey(filled[j], seq, j)));
            seq += 1;
        }
    }

    dem.with_values(filled)
}

/// Valid cell on the raster border or 8-adjacent to an invalid cell — the
/// cells water can leave the data region through.
fn is_edge_cell(grid: &Grid, idx: usize) -> bool {
    let (ncols, nrows) = (grid.ncols(), grid.nrows());
    let (r, c) = (idx / ncols, idx % ncols);
    if r == 0 || c == 0 || r == nrows - 1 || c == ncols - 1 {
        return true;
    }
    D8_OFFSETS.iter().any(|&(dr, dc)| {
        let (nr, nc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
        !grid.is_valid(nr, nc)
    })
}

// ── Flow direction ───────────────────────────────────────────────────────────

/// D8 flow directions over a depression-filled DEM.
///
/// Each valid cell points to the 8-neighbour with the maximum positive
/// drop/distance (diagonal distance √2·cellsize); ties take the first code in
/// clockwise order starting East. A cell with no lower valid neighbour is an
/// outlet (code 0) when it sits on the data-region edge; anywhere else it
/// means the input was not properly filled and routing fails.
pub fn d8_flow_direction(hydrodem: &Grid) -> Result<FlowField> {
    let (ncols, nrows) = (hydrodem.ncols(), hydrodem.nrows());
    let n = hydrodem.len();
    let mut dirs = vec![0u8; n];
    let valid: Vec<bool> = (0..n).map(|i| hydrodem.is_valid_idx(i)).collect();

    for idx in 0..n {
        if !valid[idx] {
            continue;
        }
        let (r, c) = (idx / ncols, idx % ncols);
        let z = hydrodem.values()[idx];
        let mut best_grade = 0.0f64;
        let mut best_code = 0u8;
        for (k, &(dr, dc)) in D8_OFFSETS.iter().enumerate() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= nrows as isize || nc >= ncols as isize {
                continue;
            }
            let j = nr as usize * ncols + nc as usize;
            if !valid[j] {
                continue;
            }
            let grade = (z - hydrodem.values()[j]) / D8_DISTANCE[k];
            if grade > best_grade {
                best_grade = grade;
                best_code = 1 << k;
            }
        }
        if best_code == 0 && !is_edge_cell(hydrodem, idx) {
            return Err(Error::Routing(format!(
                "interior cell ({r}, {c}) has no descending neighbour; DEM is not depression-filled"
            )));
        }
        dirs[idx] = best_code;
    }

    let topo_order = topological_order(ncols, nrows, &dirs, &valid)?;
    Ok(FlowField {
        ncols,
        nrows,
        xllcorner: hydrodem.xllcorner(),
        yllcorner: hydrodem.yllcorner(),
        cellsize: hydrodem.cellsize(),
        nodata: hydrodem.nodata_value(),
        dirs,
        valid,
        topo_order,
    })
}

/// Kahn's algorithm over donor counts; FIFO over ascending seed indices keeps
/// the order deterministic.
fn topological_order(ncols: usize, nrows: usize, dirs: &[u8], valid: &[bool]) -> Result<Vec<usize>> {
    let n = dirs.len();
    let receiver = |idx: usize| -> Option<usize> {
        let code = dirs[idx];
        if code == 0 {
            return None;
        }
        let k = code.trailing_zeros() as usize;
        let (dr, dc) = D8_OFFSETS[k];
        let r = (idx / ncols) as isize + dr;
        let c = (idx % ncols) as isize + dc;
        debug_assert!(r >= 0 && c >= 0 && r < nrows as isize && c < ncols as isize);
        Some(r as usize * ncols + c as usize)
    };

    let mut indegree = vec![0u8; n];
    for idx in 0..n {
        if valid[idx] {
            if let Some(rcv) = receiver(idx) {
                indegree[rcv] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> =
        (0..n).filter(|&i| valid[i] && indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(idx) = queue.pop_front() {
        order.push(idx);
        if let Some(rcv) = receiver(idx) {
            indegree[rcv] -= 1;
            if indegree[rcv] == 0 {
                queue.push_back(rcv);
            }
        }
    }
    let valid_count = valid.iter().filter(|&&v| v).count();
    if order.len() != valid_count {
        return Err(Error::Routing(format!(
            "flow graph contains a cycle: ordered {} of {valid_count} cells",
            order.len()
        )));
    }
    Ok(order)
}

// ── Flow accumulation ────────────────────────────────────────────────────────

/// Upstream accumulation, exclusive of the cell itself.
///
/// Unweighted, the value is the number of valid cells whose flow path passes
/// through the cell; weighted, the sum of `weights` over those same upstream
/// cells. Computed in topological order as
/// `Facc(c) = Σ_{donors d→c} (Facc(d) + w(d))` with `w ≡ 1` when unweighted.
pub fn flow_accumulation(flow: &FlowField, weights: Option<&Grid>) -> Result<Grid> {
    if let Some(w) = weights {
        flow.check_companion(w, "flow_accumulation weights")?;
        for idx in 0..flow.len() {
            if flow.is_valid_idx(idx) && !w.is_valid_idx(idx) {
                let (r, c) = (idx / flow.ncols(), idx % flow.ncols());
                return Err(Error::InvalidInput(format!(
                    "weight raster is NoData at flow-valid cell ({r}, {c})"
                )));
            }
        }
    }

    let mut acc = vec![0.0f64; flow.len()];
    for &idx in flow.topo_order() {
        if let Some(rcv) = flow.receiver(idx) {
            let w = weights.map_or(1.0, |g| g.values()[idx]);
            acc[rcv] += acc[idx] + w;
        }
    }

    let values = (0..flow.len())
        .map(|i| if flow.is_valid_idx(i) { acc[i] } else { flow.nodata })
        .collect();
    Ok(flow.grid_with(values))
}

/// Valid cells whose accumulation meets the channel-initiation threshold.
pub fn extract_streams(facc: &Grid, threshold_cells: usize) -> Result<CellMask> {
    if threshold_cells == 0 {
        return Err(Error::InvalidInput("stream threshold must be > 0 cells".into()));
    }
    let t = threshold_cells as f64;
    let bits = (0..facc.len())
        .map(|i| facc.is_valid_idx(i) && facc.values()[i] >= t)
        .collect();
    CellMask::from_bits(facc.ncols(), facc.nrows(), bits)
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn east_dipping_plane(ncols: usize, nrows: usize) -> Grid {
        let mut values = Vec::with_capacity(ncols * nrows);
        for _ in 0..nrows {
            for c in 0..ncols {
                values.push((ncols - c) as f64 * 5.0);
            }
        }
        Grid::new(ncols, nrows, 0.0, 0.0, 10.0, -9999.0, values).unwrap()
    }

    fn random_dem(rng: &mut ChaCha8Rng, size: usize) -> Grid {
        let values: Vec<f64> = (0..size * size).map(|_| rng.random_range(0.0..100.0)).collect();
        Grid::new(size, size, 0.0, 0.0, 10.0, -9999.0, values).unwrap()
    }

    /// Walks receivers from every valid cell: path must strictly descend on
    /// the filled surface and terminate at an outlet within n steps.
    fn assert_drains(filled: &Grid, flow: &FlowField) {
        let n = filled.len();
        for start in 0..n {
            if !flow.is_valid_idx(start) {
                continue;
            }
            let mut idx = start;
            let mut steps = 0;
            while let Some(next) = flow.receiver(idx) {
                assert!(
                    filled.values()[next] < filled.values()[idx],
                    "non-descending step {idx}->{next}"
                );
                idx = next;
                steps += 1;
                assert!(steps <= n, "path from {start} exceeds {n} steps");
            }
            assert_eq!(flow.dir_idx(idx), 0, "path from {start} ended at a non-outlet");
        }
    }

    #[test]
    fn monotone_plane_unchanged_by_fill() {
        let dem = east_dipping_plane(12, 8);
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        assert_eq!(filled.values(), dem.values());
    }

    #[test]
    fn center_pit_raised_to_rim_plus_epsilon() {
        let mut values = vec![10.0; 9];
        values[4] = 5.0;
        let dem = Grid::new(3, 3, 0.0, 0.0, 10.0, -9999.0, values).unwrap();
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        assert!((filled.get(1, 1) - (10.0 + 1e-5)).abs() < 1e-12);
    }

    #[test]
    fn filled_random_dems_drain_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let dem = random_dem(&mut rng, 32);
            let filled = fill_depressions(&dem, 1e-5).unwrap();
            let flow = d8_flow_direction(&filled).unwrap();
            assert_drains(&filled, &flow);
        }
    }

    #[test]
    fn fill_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let dem = random_dem(&mut rng, 24);
            let once = fill_depressions(&dem, 1e-5).unwrap();
            let twice = fill_depressions(&once, 1e-5).unwrap();
            assert_eq!(once.values(), twice.values());
        }
    }

    #[test]
    fn fill_handles_internal_nodata_island() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut dem = random_dem(&mut rng, 16);
        // Punch a NoData block; its rim becomes a drainage edge.
        for r in 6..10 {
            for c in 6..10 {
                dem.set(r, c, dem.nodata_value());
            }
        }
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        let flow = d8_flow_direction(&filled).unwrap();
        assert_drains(&filled, &flow);
    }

    #[test]
    fn fill_rejects_all_nodata() {
        let dem = Grid::filled(4, 4, 0.0, 0.0, 10.0, -9999.0, -9999.0).unwrap();
        assert!(matches!(fill_depressions(&dem, 1e-5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn east_dipping_plane_flows_east() {
        let dem = east_dipping_plane(10, 6);
        let flow = d8_flow_direction(&dem).unwrap();
        for r in 0..6 {
            for c in 0..9 {
                assert_eq!(flow.dir_idx(flow_idx(&dem, r, c)), 1, "cell ({r},{c})");
            }
            assert_eq!(flow.dir_idx(flow_idx(&dem, r, 9)), 0); // east edge outlet
        }
    }

    fn flow_idx(g: &Grid, r: usize, c: usize) -> usize {
        r * g.ncols() + c
    }

    #[test]
    fn equal_drop_tie_goes_east() {
        // Center cell 1.0; east and south neighbours both 0.0; rest high.
        let values = vec![
            9.0, 9.0, 9.0, //
            9.0, 1.0, 0.0, //
            9.0, 0.0, 9.0,
        ];
        let dem = Grid::new(3, 3, 0.0, 0.0, 10.0, -9999.0, values).unwrap();
        let flow = d8_flow_direction(&dem).unwrap();
        assert_eq!(flow.dir_idx(4), 1);
    }

    #[test]
    fn interior_pit_is_routing_error() {
        let mut values = vec![10.0; 25];
        values[12] = 1.0; // unfilled pit at (2,2) of a 5x5
        let dem = Grid::new(5, 5, 0.0, 0.0, 10.0, -9999.0, values).unwrap();
        assert!(matches!(d8_flow_direction(&dem), Err(Error::Routing(_))));
    }

    #[test]
    fn plane_accumulation_equals_column_index() {
        let dem = east_dipping_plane(10, 4);
        let flow = d8_flow_direction(&dem).unwrap();
        let facc = flow_accumulation(&flow, None).unwrap();
        for r in 0..4 {
            for c in 0..10 {
                assert_eq!(facc.get(r, c), c as f64, "cell ({r},{c})");
            }
        }
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dem = random_dem(&mut rng, 20);
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        let flow = d8_flow_direction(&filled).unwrap();
        let ones = dem.with_values(vec![1.0; dem.len()]).unwrap();
        let plain = flow_accumulation(&flow, None).unwrap();
        let weighted = flow_accumulation(&flow, Some(&ones)).unwrap();
        assert_eq!(plain.values(), weighted.values());
    }

    /// O(n²) oracle: walk the receiver chain from every cell and add its
    /// weight to each cell strictly downstream.
    fn facc_oracle(flow: &FlowField, weights: Option<&Grid>) -> Vec<f64> {
        let mut acc = vec![0.0; flow.len()];
        for start in 0..flow.len() {
            if !flow.is_valid_idx(start) {
                continue;
            }
            let w = weights.map_or(1.0, |g| g.values()[start]);
            let mut idx = start;
            while let Some(next) = flow.receiver(idx) {
                acc[next] += w;
                idx = next;
            }
        }
        acc
    }

    #[test]
    fn accumulation_matches_path_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let dem = random_dem(&mut rng, 32);
            let filled = fill_depressions(&dem, 1e-5).unwrap();
            let flow = d8_flow_direction(&filled).unwrap();
            let facc = flow_accumulation(&flow, None).unwrap();
            let oracle = facc_oracle(&flow, None);
            for i in 0..flow.len() {
                if flow.is_valid_idx(i) {
                    assert_eq!(facc.values()[i], oracle[i], "cell {i}");
                }
            }
        }
    }

    #[test]
    fn mass_conservation_at_outlets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dem = random_dem(&mut rng, 28);
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        let flow = d8_flow_direction(&filled).unwrap();
        let facc = flow_accumulation(&flow, None).unwrap();
        let outlet_sum: f64 = (0..flow.len())
            .filter(|&i| flow.is_valid_idx(i) && flow.dir_idx(i) == 0)
            .map(|i| facc.values()[i] + 1.0)
            .sum();
        assert_eq!(outlet_sum, flow.valid_count() as f64);
    }

    #[test]
    fn stream_threshold_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dem = random_dem(&mut rng, 24);
        let filled = fill_depressions(&dem, 1e-5).unwrap();
        let flow = d8_flow_direction(&filled).unwrap();
        let facc = flow_accumulation(&flow, None).unwrap();
        let low = extract_streams(&facc, 3).unwrap();
        let high = extract_streams(&facc, 9).unwrap();
        for i in 0..low.len() {
            assert!(!high.get_idx(i) || low.get_idx(i));
        }
    }

    #[test]
    fn stream_threshold_above_max_is_empty() {
        let dem = east_dipping_plane(8, 4);
        let flow = d8_flow_direction(&dem).unwrap();
        let facc = flow_accumulation(&flow, None).unwrap();
        let streams = extract_streams(&facc, 1000).unwrap();
        assert_eq!(streams.count(), 0);
    }

    #[test]
    fn stream_threshold_one_excludes_headwater_column() {
        let dem = east_dipping_plane(8, 4);
        let flow = d8_flow_direction(&dem).unwrap();
        let facc = flow_accumulation(&flow, None).unwrap();
        let streams = extract_streams(&facc, 1).unwrap();
        for r in 0..4 {
            assert!(!streams.get(r, 0));
            for c in 1..8 {
                assert!(streams.get(r, c));
            }
        }
    }

    #[test]
    fn code_grid_roundtrips_directions() {
        let dem = east_dipping_plane(6, 3);
        let flow = d8_flow_direction(&dem).unwrap();
        let grid = flow.to_code_grid();
        assert_eq!(grid.get(1, 2), 1.0);
        assert_eq!(grid.get(1, 5), 0.0);
    }
}
