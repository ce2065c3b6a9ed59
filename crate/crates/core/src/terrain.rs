//! Local terrain derivatives from the 3×3 Horn kernel: slope in degrees and
//! the sine/cosine aspect components used as slope-unit covariates.

use crate::raster::Grid;

/// Horn gradients `(dz/dx, dz/dy)` at an interior cell whose full 3×3 window
/// is valid; `None` otherwise. `x` increases east, `y` increases north.
///
/// `dz/dx = ((NE + 2E + SE) − (NW + 2W + SW)) / (8·cellsize)`
/// `dz/dy = ((NW + 2N + NE) − (SW + 2S + SE)) / (8·cellsize)`
fn horn_gradient(dem: &Grid, r: usize, c: usize) -> Option<(f64, f64)> {
    if r == 0 || c == 0 || r == dem.nrows() - 1 || c == dem.ncols() - 1 {
        return None;
    }
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if !dem.is_valid((r as isize + dr) as usize, (c as isize + dc) as usize) {
                return None;
            }
        }
    }
    let z = |dr: isize, dc: isize| dem.get((r as isize + dr) as usize, (c as isize + dc) as usize);
    let (nw, n, ne) = (z(-1, -1), z(-1, 0), z(-1, 1));
    let (w, e) = (z(0, -1), z(0, 1));
    let (sw, s, se) = (z(1, -1), z(1, 0), z(1, 1));
    let denom = 8.0 * dem.cellsize();
    let dz_dx = ((ne + 2.0 * e + se) - (nw + 2.0 * w + sw)) / denom;
    // Row 0 is the north row, so +y runs against row index.
    let dz_dy = ((nw + 2.0 * n + ne) - (sw + 2.0 * s + se)) / denom;
    Some((dz_dx, dz_dy))
}

/// Per-cell slope in degrees, `atan(√(gx² + gy²))`, from the original DEM.
/// Cells whose 3×3 window touches any invalid cell (or the raster edge)
/// become NoData.
pub fn slope_degrees(dem: &Grid) -> Grid {
    let mut values = vec![dem.nodata_value(); dem.len()];
    for r in 0..dem.nrows() {
        for c in 0..dem.ncols() {
            if let Some((gx, gy)) = horn_gradient(dem, r, c) {
                values[dem.idx(r, c)] = (gx * gx + gy * gy).sqrt().atan().to_degrees();
            }
        }
    }
    dem.with_values(values).expect("shape preserved")
}

/// Sine (easterness) and cosine (northerness) of the downslope azimuth
/// (0° = North, clockwise). Flat cells yield (0, 0) so zonal vector means
/// stay unbiased; NoData follows the same window rule as `slope_degrees`.
pub fn aspect_components(dem: &Grid) -> (Grid, Grid) {
    let nodata = dem.nodata_value();
    let mut east = vec![nodata; dem.len()];
    let mut north = vec![nodata; dem.len()];
    for r in 0..dem.nrows() {
        for c in 0..dem.ncols() {
            if let Some((gx, gy)) = horn_gradient(dem, r, c) {
                let idx = dem.idx(r, c);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    east[idx] = 0.0;
                    north[idx] = 0.0;
                } else {
                    // Downslope unit vector is -∇z; azimuth θ has
                    // (sin θ, cos θ) = (dx, dy)/|d|.
                    east[idx] = -gx / mag;
                    north[idx] = -gy / mag;
                }
            }
        }
    }
    (
        dem.with_values(east).expect("shape preserved"),
        dem.with_values(north).expect("shape preserved"),
    )
}

/// Downslope azimuth in degrees [0, 360), 0° = North, clockwise. Flat cells
/// (and invalid windows) are NoData, so circular zonal means ignore them.
pub fn aspect_degrees(dem: &Grid) -> Grid {
    let mut values = vec![dem.nodata_value(); dem.len()];
    for r in 0..dem.nrows() {
        for c in 0..dem.ncols() {
            if let Some((gx, gy)) = horn_gradient(dem, r, c) {
                if gx != 0.0 || gy != 0.0 {
                    let az = (-gx).atan2(-gy).to_degrees().rem_euclid(360.0);
                    values[dem.idx(r, c)] = az;
                }
            }
        }
    }
    dem.with_values(values).expect("shape preserved")
}

// ── Tests ────────────────────────────────────────────────────────────────────
