//! Core raster types and ESRI ASCII grid I/O.
//!
//! A [`Grid`] is a single-band, row-major raster (north row first) with an
//! explicit NoData sentinel. A [`CellMask`] is a per-cell boolean with the
//! same shape. Every pipeline stage consumes and produces these two types;
//! grids combined in one pipeline must share identical header geometry.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

// ── Grid ─────────────────────────────────────────────────────────────────────

/// Georeferenced single-band raster. Values are stored row-major with the
/// northernmost row first. A cell is *valid* iff its value differs from the
/// NoData sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ncols: usize,
    nrows: usize,
    xllcorner: f64,
    yllcorner: f64,
    cellsize: f64,
    nodata: f64,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidInput("grid dimensions must be positive".into()));
        }
        if !(cellsize > 0.0) {
            return Err(Error::InvalidInput(format!("cellsize must be > 0, got {cellsize}")));
        }
        if values.len() != ncols * nrows {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match {ncols}x{nrows}",
                values.len()
            )));
        }
        Ok(Grid { ncols, nrows, xllcorner, yllcorner, cellsize, nodata, values })
    }

    /// Grid of constant `value` with the given header.
    pub fn filled(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata: f64,
        value: f64,
    ) -> Result<Self> {
        Grid::new(ncols, nrows, xllcorner, yllcorner, cellsize, nodata, vec![value; ncols * nrows])
    }

    /// New grid with the same header but different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Grid::new(
            self.ncols,
            self.nrows,
            self.xllcorner,
            self.yllcorner,
            self.cellsize,
            self.nodata,
            values,
        )
    }

    /// New all-NoData grid with the same header.
    pub fn nodata_like(&self) -> Self {
        self.with_values(vec![self.nodata; self.len()]).expect("same shape")
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn xllcorner(&self) -> f64 {
        self.xllcorner
    }

    pub fn yllcorner(&self) -> f64 {
        self.yllcorner
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata_value(&self) -> f64 {
        self.nodata
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.nrows && col < self.ncols);
        row * self.ncols + col
    }

    #[inline]
    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.ncols, idx % self.ncols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.idx(row, col);
        self.values[i] = value;
    }

    #[inline]
    pub fn set_idx(&mut self, idx: usize, value: f64) {
        self.values[idx] = value;
    }

    /// NaN sentinels compare bitwise so an all-NaN NODATA_value still works.
    #[inline]
    pub fn is_nodata_value(&self, v: f64) -> bool {
        v == self.nodata || (v.is_nan() && self.nodata.is_nan())
    }

    #[inline]
    pub fn is_valid_idx(&self, idx: usize) -> bool {
        !self.is_nodata_value(self.values[idx])
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.is_valid_idx(self.idx(row, col))
    }

    pub fn valid_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_valid_idx(i)).count()
    }

    /// Mask of valid cells.
    pub fn valid_mask(&self) -> CellMask {
        CellMask {
            ncols: self.ncols,
            nrows: self.nrows,
            bits: (0..self.len()).map(|i| self.is_valid_idx(i)).collect(),
        }
    }

    /// Same header geometry (dimensions, origin, cellsize). NoData sentinels
    /// may differ between pipeline grids.
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.xllcorner == other.xllcorner
            && self.yllcorner == other.yllcorner
            && self.cellsize == other.cellsize
    }

    /// Geometry mismatch is an error, never a silent fix.
    pub fn check_geometry(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {}x{} cell {} at ({}, {}) vs {}x{} cell {} at ({}, {})",
                self.ncols,
                self.nrows,
                self.cellsize,
                self.xllcorner,
                self.yllcorner,
                other.ncols,
                other.nrows,
                other.cellsize,
                other.xllcorner,
                other.yllcorner,
            )))
        }
    }

    pub fn check_mask_geometry(&self, mask: &CellMask, what: &str) -> Result<()> {
        if self.ncols == mask.ncols && self.nrows == mask.nrows {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: grid {}x{} vs mask {}x{}",
                self.ncols, self.nrows, mask.ncols, mask.nrows
            )))
        }
    }

    /// Copy with cells outside `keep` set to NoData.
    pub fn restricted_to(&self, keep: &CellMask) -> Result<Grid> {
        self.check_mask_geometry(keep, "restricted_to")?;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if keep.get_idx(i) { v } else { self.nodata })
            .collect();
        self.with_values(values)
    }
}

// ── CellMask ─────────────────────────────────────────────────────────────────

/// Boolean per-cell mask sharing a companion grid's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    ncols: usize,
    nrows: usize,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn empty(ncols: usize, nrows: usize) -> Self {
        CellMask { ncols, nrows, bits: vec![false; ncols * nrows] }
    }

    pub fn from_bits(ncols: usize, nrows: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != ncols * nrows {
            return Err(Error::InvalidInput(format!(
                "mask bit count {} does not match {ncols}x{nrows}",
                bits.len()
            )));
        }
        Ok(CellMask { ncols, nrows, bits })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.nrows && col < self.ncols);
        row * self.ncols + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[self.idx(row, col)]
    }

    #[inline]
    pub fn get_idx(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        let i = self.idx(row, col);
        self.bits[i] = on;
    }

    #[inline]
    pub fn set_idx(&mut self, idx: usize, on: bool) {
        self.bits[idx] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &CellMask) -> bool {
        self.ncols == other.ncols && self.nrows == other.nrows
    }

    /// Indices of set cells, ascending.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn invert(&self) -> CellMask {
        CellMask {
            ncols: self.ncols,
            nrows: self.nrows,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Render as a 0/1 grid with the given header grid's geometry.
    pub fn to_grid(&self, header: &Grid) -> Result<Grid> {
        header.check_mask_geometry(self, "mask to_grid")?;
        header.with_values(self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }
}

// ── ESRI ASCII grid I/O ──────────────────────────────────────────────────────

const HEADER_KEYS: [&str; 6] =
    ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

/// Read an ESRI ASCII grid: six `key value` header lines in fixed order
/// (keys case-insensitive), then `nrows` lines of `ncols` values, north row
/// first. Every data token must parse as a finite number or equal the NoData
/// sentinel.
pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let mut header = [0f64; 6];
    for (slot, expected_key) in HEADER_KEYS.iter().enumerate() {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, slot + 1, 0, "missing header line"))?;
        let mut tokens = line.split_whitespace();
        let key = tokens
            .next()
            .ok_or_else(|| Error::parse(path, line_no + 1, 1, "empty header line"))?;
        let key_lc = key.to_ascii_lowercase();
        if key_lc != *expected_key {
            // dx/dy headers declare rectangular (non-square) cells.
            let msg = if key_lc == "dx" || key_lc == "dy" {
                format!("non-square cell declaration `{key}` is not supported; expected `{expected_key}`")
            } else {
                format!("expected header key `{expected_key}`, found `{key}`")
            };
            return Err(Error::parse(path, line_no + 1, 1, msg));
        }
        let value = tokens
            .next()
            .ok_or_else(|| Error::parse(path, line_no + 1, 2, format!("missing value for `{key}`")))?;
        if tokens.next().is_some() {
            return Err(Error::parse(path, line_no + 1, 3, "trailing tokens in header line"));
        }
        header[slot] = value.parse::<f64>().map_err(|_| {
            Error::parse(path, line_no + 1, 2, format!("cannot parse `{value}` for `{key}`"))
        })?;
    }

    let ncols = parse_dimension(header[0], "ncols", path)?;
    let nrows = parse_dimension(header[1], "nrows", path)?;
    let cellsize = header[4];
    if !(cellsize.is_finite() && cellsize > 0.0) {
        return Err(Error::parse(path, 5, 2, format!("cellsize must be positive, got {cellsize}")));
    }
    let nodata = header[5];

    let mut values = Vec::with_capacity(ncols * nrows);
    for (line_no, line) in lines {
        for (tok_no, token) in line.split_whitespace().enumerate() {
            let v = token.parse::<f64>().map_err(|_| {
                Error::parse(path, line_no + 1, tok_no + 1, format!("cannot parse value `{token}`"))
            })?;
            let is_nodata = v == nodata || (v.is_nan() && nodata.is_nan());
            if !v.is_finite() && !is_nodata {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    tok_no + 1,
                    format!("non-finite value `{token}` is not the NoData sentinel"),
                ));
            }
            if values.len() == ncols * nrows {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    tok_no + 1,
                    format!("more than {} values in body", ncols * nrows),
                ));
            }
            values.push(v);
        }
    }
    if values.len() != ncols * nrows {
        return Err(Error::parse(
            path,
            7,
            0,
            format!("body has {} values, expected {}", values.len(), ncols * nrows),
        ));
    }

    Grid::new(ncols, nrows, header[2], header[3], cellsize, nodata, values)
}

fn parse_dimension(v: f64, key: &str, path: &Path) -> Result<usize> {
    let line = if key == "ncols" { 1 } else { 2 };
    if v.fract() != 0.0 || v < 1.0 || v > usize::MAX as f64 {
        return Err(Error::parse(path, line, 2, format!("{key} must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

/// Write an ESRI ASCII grid. Header keys are lowercase; floats are written in
/// Rust's shortest round-trip form, so `read_ascii_grid` reproduces every
/// value exactly.
pub fn write_ascii_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(grid.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", grid.ncols);
    let _ = writeln!(out, "nrows {}", grid.nrows);
    let _ = writeln!(out, "xllcorner {}", grid.xllcorner);
    let _ = writeln!(out, "yllcorner {}", grid.yllcorner);
    let _ = writeln!(out, "cellsize {}", grid.cellsize);
    let _ = writeln!(out, "nodata_value {}", grid.nodata);
    for row in 0..grid.nrows {
        for col in 0..grid.ncols {
            if col > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", grid.get(row, col));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ── Mask operations ──────────────────────────────────────────────────────────

/// Invalid cells 4-connected-reachable from the raster border through invalid
/// cells. Invalid cells *not* in the result are internal holes, which lets
/// downstream masking distinguish external background from data gaps inside
/// the study area.
pub fn exterior_mask(valid: &CellMask) -> CellMask {
    let (ncols, nrows) = (valid.ncols, valid.nrows);
    let mut exterior = CellMask::empty(ncols, nrows);
    let mut queue = std::collections::VecDeque::new();

    let try_seed = |r: usize, c: usize, ext: &mut CellMask, q: &mut std::collections::VecDeque<(usize, usize)>| {
        if !valid.get(r, c) && !ext.get(r, c) {
            ext.set(r, c, true);
            q.push_back((r, c));
        }
    };
    for c in 0..ncols {
        try_seed(0, c, &mut exterior, &mut queue);
        try_seed(nrows - 1, c, &mut exterior, &mut queue);
    }
    for r in 0..nrows {
        try_seed(r, 0, &mut exterior, &mut queue);
        try_seed(r, ncols - 1, &mut exterior, &mut queue);
    }

    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= nrows as isize || nc >= ncols as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if !valid.get(nr, nc) && !exterior.get(nr, nc) {
                exterior.set(nr, nc, true);
                queue.push_back((nr, nc));
            }
        }
    }
    exterior
}

/// Cells whose center lies within `radius_m` (Euclidean, center-to-center) of
/// any seed cell. Seed cells are always included (radius 0 returns the seeds).
pub fn buffer_mask(seed: &CellMask, radius_m: f64, cellsize: f64) -> Result<CellMask> {
    if !(radius_m >= 0.0) {
        return Err(Error::InvalidInput(format!("buffer radius must be >= 0, got {radius_m}")));
    }
    if !(cellsize > 0.0) {
        return Err(Error::InvalidInput(format!("cellsize must be > 0, got {cellsize}")));
    }
    let (ncols, nrows) = (seed.ncols, seed.nrows);
    let mut out = CellMask::empty(ncols, nrows);

    // Disc stamp: all (dr, dc) with (dr² + dc²)·cellsize² ≤ radius².
    let reach = (radius_m / cellsize).floor() as isize;
    let r2 = radius_m * radius_m;
    let mut disc = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d2 = ((dr * dr + dc * dc) as f64) * cellsize * cellsize;
            if d2 <= r2 {
                disc.push((dr, dc));
            }
        }
    }
    if disc.is_empty() {
        disc.push((0, 0)); // radius < cellsize still covers the seed itself
    }

    for idx in seed.iter_set() {
        let (r, c) = (idx / ncols, idx % ncols);
        for &(dr, dc) in &disc {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr >= 0 && nc >= 0 && nr < nrows as isize && nc < ncols as isize {
                out.set(nr as usize, nc as usize, true);
            }
        }
    }
    Ok(out)
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn grid2x2() -> Grid {
        Grid::new(2, 2, 0.0, 0.0, 10.0, -9999.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn read_simple_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3 4\n",
        )
        .unwrap();
        let g = read_ascii_grid(&path).unwrap();
        assert_eq!(g.ncols(), 2);
        assert_eq!(g.nrows(), 2);
        assert_eq!(g.cellsize(), 10.0);
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn nodata_sentinel_marks_cell_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "NCOLS 2\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 5\nNODATA_VALUE -9999\n-9999 7\n",
        )
        .unwrap();
        let g = read_ascii_grid(&path).unwrap();
        assert!(!g.is_valid(0, 0));
        assert!(g.is_valid(0, 1));
        assert_eq!(g.valid_count(), 1);
    }

    #[test]
    fn header_key_order_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "nrows 2\nncols 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3 4\n",
        )
        .unwrap();
        let err = read_ascii_grid(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_square_declaration_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ndx 10\ndy 5\n1 2\n3 4\n",
        )
        .unwrap();
        let err = read_ascii_grid(&path).unwrap_err().to_string();
        assert!(err.contains("non-square"), "got: {err}");
    }

    #[test]
    fn token_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3\n",
        )
        .unwrap();
        assert!(matches!(read_ascii_grid(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_finite_non_nodata_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        std::fs::write(
            &path,
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 inf\n",
        )
        .unwrap();
        match read_ascii_grid(&path) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_all_nodata_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        let g = Grid::filled(3, 2, 1.5, 2.5, 30.0, -9999.0, -9999.0).unwrap();
        write_ascii_grid(&g, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("-9999 -9999 -9999\n-9999 -9999 -9999\n"));
        assert!(text.starts_with("ncols 3\nnrows 2\nxllcorner 1.5\nyllcorner 2.5\ncellsize 30\n"));
    }

    #[test]
    fn header_fields_echo_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        let g = Grid::new(2, 2, -4.2632564145606e-14, 7.25, 0.0083333333333333, -3.5, vec![0.0; 4])
            .unwrap();
        write_ascii_grid(&g, &path).unwrap();
        let back = read_ascii_grid(&path).unwrap();
        assert_eq!(back.xllcorner(), g.xllcorner());
        assert_eq!(back.yllcorner(), g.yllcorner());
        assert_eq!(back.cellsize(), g.cellsize());
        assert_eq!(back.nodata_value(), g.nodata_value());
    }

    // Brute-force BFS from every border cell, for comparison with exterior_mask.
    fn exterior_oracle(valid: &CellMask) -> CellMask {
        let (ncols, nrows) = (valid.ncols(), valid.nrows());
        let mut out = CellMask::empty(ncols, nrows);
        for sr in 0..nrows {
            for sc in 0..ncols {
                let border = sr == 0 || sc == 0 || sr == nrows - 1 || sc == ncols - 1;
                if !border || valid.get(sr, sc) || out.get(sr, sc) {
                    continue;
                }
                let mut q = VecDeque::from([(sr, sc)]);
                out.set(sr, sc, true);
                while let Some((r, c)) = q.pop_front() {
                    for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                        let (nr, nc) = (r as isize + dr, c as isize + dc);
                        if nr < 0 || nc < 0 || nr >= nrows as isize || nc >= ncols as isize {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if !valid.get(nr, nc) && !out.get(nr, nc) {
                            out.set(nr, nc, true);
                            q.push_back((nr, nc));
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn exterior_empty_on_all_valid() {
        let mask = CellMask::from_bits(4, 4, vec![true; 16]).unwrap();
        assert_eq!(exterior_mask(&mask).count(), 0);
    }

    #[test]
    fn single_center_hole_is_internal() {
        let mut valid = CellMask::from_bits(5, 5, vec![true; 25]).unwrap();
        valid.set(2, 2, false);
        let ext = exterior_mask(&valid);
        assert_eq!(ext.count(), 0);
        assert!(!ext.get(2, 2));
    }

    #[test]
    fn exterior_matches_bfs_oracle_on_random_masks() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..20 {
            let bits: Vec<bool> = (0..32 * 32).map(|_| next() % 100 < 60).collect();
            let valid = CellMask::from_bits(32, 32, bits).unwrap();
            let fast = exterior_mask(&valid);
            let slow = exterior_oracle(&valid);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn exterior_and_holes_partition_invalid_set() {
        let mut valid = CellMask::from_bits(6, 6, vec![true; 36]).unwrap();
        valid.set(0, 0, false); // exterior (border)
        valid.set(3, 3, false); // internal hole
        let ext = exterior_mask(&valid);
        for i in 0..valid.len() {
            let invalid = !valid.get_idx(i);
            let hole = invalid && !ext.get_idx(i);
            assert_eq!(invalid, ext.get_idx(i) || hole);
            assert!(!(ext.get_idx(i) && hole));
        }
        assert!(ext.get(0, 0));
        assert!(!ext.get(3, 3));
    }

    #[test]
    fn buffer_radius_zero_is_identity() {
        let mut seed = CellMask::empty(8, 8);
        seed.set(3, 4, true);
        seed.set(0, 0, true);
        let out = buffer_mask(&seed, 0.0, 10.0).unwrap();
        assert_eq!(out, seed);
    }

    #[test]
    fn buffer_one_and_a_half_cells_reaches_diagonals() {
        let mut seed = CellMask::empty(5, 5);
        seed.set(2, 2, true);
        // √2·cellsize ≈ 14.14 ≤ 15, so all 8 neighbours are in; 2-cell steps are out.
        let out = buffer_mask(&seed, 15.0, 10.0).unwrap();
        assert_eq!(out.count(), 9);
        for r in 1..=3 {
            for c in 1..=3 {
                assert!(out.get(r, c));
            }
        }
        assert!(!out.get(0, 2));
    }

    fn buffer_oracle(seed: &CellMask, radius_m: f64, cellsize: f64) -> CellMask {
        let mut out = CellMask::empty(seed.ncols(), seed.nrows());
        let seeds: Vec<(usize, usize)> =
            seed.iter_set().map(|i| (i / seed.ncols(), i % seed.ncols())).collect();
        for r in 0..seed.nrows() {
            for c in 0..seed.ncols() {
                let hit = seeds.iter().any(|&(sr, sc)| {
                    let dr = r as f64 - sr as f64;
                    let dc = c as f64 - sc as f64;
                    (dr * dr + dc * dc) * cellsize * cellsize <= radius_m * radius_m
                });
                out.set(r, c, hit);
            }
        }
        out
    }

    #[test]
    fn buffer_matches_all_pairs_oracle() {
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        for round in 0..8 {
            let bits: Vec<bool> = (0..64 * 64).map(|_| next() % 100 < 2).collect();
            let seed = CellMask::from_bits(64, 64, bits).unwrap();
            let radius = (round as f64) * 7.3;
            let fast = buffer_mask(&seed, radius, 10.0).unwrap();
            let slow = buffer_oracle(&seed, radius, 10.0);
            assert_eq!(fast, slow, "radius {radius}");
        }
    }

    #[test]
    fn restricted_to_masks_out_cells() {
        let g = grid2x2();
        let mut keep = CellMask::empty(2, 2);
        keep.set(0, 0, true);
        let r = g.restricted_to(&keep).unwrap();
        assert!(r.is_valid(0, 0));
        assert!(!r.is_valid(1, 1));
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_grid(
            ncols in 1usize..12,
            nrows in 1usize..12,
            xll in -1e5f64..1e5,
            yll in -1e5f64..1e5,
            cell in 0.1f64..100.0,
            raw in proptest::collection::vec(-1e6f64..1e6, 144),
        ) {
            let values: Vec<f64> = raw[..ncols * nrows].to_vec();
            let g = Grid::new(ncols, nrows, xll, yll, cell, -9999.0, values).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("g.asc");
            write_ascii_grid(&g, &path).unwrap();
            let back = read_ascii_grid(&path).unwrap();
            prop_assert_eq!(back.ncols(), g.ncols());
            prop_assert_eq!(back.nrows(), g.nrows());
            prop_assert_eq!(back.xllcorner(), g.xllcorner());
            prop_assert_eq!(back.yllcorner(), g.yllcorner());
            prop_assert_eq!(back.cellsize(), g.cellsize());
            for i in 0..g.len() {
                prop_assert!((back.values()[i] - g.values()[i]).abs() <= 1e-10);
            }
        }

        #[test]
        fn buffer_monotone_in_radius(
            seeds in proptest::collection::vec(0usize..256, 1..10),
            r1 in 0.0f64..60.0,
            extra in 0.0f64..60.0,
        ) {
            let mut seed = CellMask::empty(16, 16);
            for s in seeds {
                seed.set_idx(s, true);
            }
            let small = buffer_mask(&seed, r1, 10.0).unwrap();
            let large = buffer_mask(&seed, r1 + extra, 10.0).unwrap();
            for i in 0..small.len() {
                prop_assert!(!small.get_idx(i) || large.get_idx(i));
            }
        }
    }
}
