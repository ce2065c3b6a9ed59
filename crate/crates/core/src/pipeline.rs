//! Stage orchestration shared by the CLI and the sensitivity search.

use crate::error::Result;
use crate::hydrology::{
    d8_flow_direction, extract_streams, fill_depressions, flow_accumulation, FlowField,
};
use crate::raster::{CellMask, Grid};
use crate::terrain::slope_degrees;

/// Everything the hydrology stage produces from one DEM.
///
/// Slope comes from the original DEM; routing runs on the depression-filled
/// surface. The routing domain is restricted to cells with a defined slope
/// (the Horn window trims a one-cell rim and dilates interior NoData), so the
/// slope-weighted accumulation always has a weight wherever flow is defined
/// and every derived raster shares a single validity footprint.
#[derive(Debug, Clone)]
pub struct HydroProducts {
    pub hydrodem: Grid,
    pub flow: FlowField,
    pub facc: Grid,
    pub facc_weighted: Grid,
    pub slope: Grid,
    pub streams: CellMask,
}

impl HydroProducts {
    pub fn compute(dem: &Grid, epsilon_m: f64, stream_threshold_cells: usize) -> Result<Self> {
        let slope = slope_degrees(dem);
        let routing_dem = dem.restricted_to(&slope.valid_mask())?;
        let hydrodem = fill_depressions(&routing_dem, epsilon_m)?;
        let flow = d8_flow_direction(&hydrodem)?;
        let facc = flow_accumulation(&flow, None)?;
        let facc_weighted = flow_accumulation(&flow, Some(&slope))?;
        let streams = extract_streams(&facc, stream_threshold_cells)?;
        Ok(HydroProducts { hydrodem, flow, facc, facc_weighted, slope, streams })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ridge_dem(size: usize) -> Grid {
        // Tent surface dipping toward east and west edges.
        let mut values = Vec::with_capacity(size * size);
        for _ in 0..size {
            for c in 0..size {
                let midway = size as f64 / 2.0;
                values.push(40.0 - (c as f64 - midway).abs() * 2.0);
            }
        }
        Grid::new(size, size, 0.0, 0.0, 10.0, -9999.0, values).unwrap()
    }

    #[test]
    fn products_share_one_validity_footprint() {
        let dem = ridge_dem(16);
        let hydro = HydroProducts::compute(&dem, 1e-5, 4).unwrap();
        for i in 0..dem.len() {
            let s = hydro.slope.is_valid_idx(i);
            assert_eq!(hydro.hydrodem.is_valid_idx(i), s);
            assert_eq!(hydro.facc.is_valid_idx(i), s);
            assert_eq!(hydro.facc_weighted.is_valid_idx(i), s);
            assert_eq!(hydro.flow.is_valid_idx(i), s);
        }
    }

    #[test]
    fn constant_weights_scale_unweighted_accumulation() {
        let dem = ridge_dem(20);
        let hydro = HydroProducts::compute(&dem, 1e-5, 4).unwrap();
        let w0 = 3.7;
        let constant = dem.with_values(vec![w0; dem.len()]).unwrap();
        let weighted =
            crate::hydrology::flow_accumulation(&hydro.flow, Some(&constant)).unwrap();
        for i in 0..dem.len() {
            if hydro.facc.is_valid_idx(i) {
                let plain = hydro.facc.values()[i];
                let scaled = weighted.values()[i];
                assert!(
                    (scaled - w0 * plain).abs() <= 1e-9 * (1.0 + w0 * plain),
                    "cell {i}: {scaled} vs {}",
                    w0 * plain
                );
            }
        }
    }
}
