//! Slope-unit feature tables: zonal statistics over labelled rasters,
//! ingestion of external covariate CSVs, and assembly of the prior-anchored
//! table the classifiers train on.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Grid;

// ── FeatureTable ─────────────────────────────────────────────────────────────

/// Per-slope-unit rows keyed by `su_id`: named numeric feature columns plus
/// an optional binary label. Ids are unique and every feature value is
/// finite; missingness is resolved (loudly) at assembly time, never imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    su_ids: Vec<u32>,
    feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Option<Vec<u8>>,
}

impl FeatureTable {
    pub fn new(
        su_ids: Vec<u32>,
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = su_ids.len();
        if feature_names.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature names but {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name == "su_id" || name == "label" {
                return Err(Error::InvalidInput(format!("`{name}` is a reserved column name")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidInput(format!("duplicate covariate name `{name}`")));
            }
        }
        let mut ids = HashSet::with_capacity(n);
        for &id in &su_ids {
            if !ids.insert(id) {
                return Err(Error::InvalidInput(format!("duplicate su_id {id}")));
            }
        }
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} values for {n} rows",
                    col.len()
                )));
            }
            if let Some(bad) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has non-finite value at row {bad}"
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidInput(format!("{} labels for {n} rows", l.len())));
            }
            if let Some(bad) = l.iter().position(|&y| y > 1) {
                return Err(Error::InvalidInput(format!("non-binary label at row {bad}")));
            }
        }
        Ok(FeatureTable { su_ids, feature_names, columns, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.su_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn su_ids(&self) -> &[u32] {
        &self.su_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// (n_positive, n_negative); requires labels.
    pub fn class_counts(&self) -> Result<(usize, usize)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("table has no label column".into()))?;
        let pos = labels.iter().filter(|&&y| y == 1).count();
        Ok((pos, labels.len() - pos))
    }

    /// Row-major feature matrix in `feature_names` order.
    pub fn feature_matrix(&self) -> Vec<f64> {
        let (n, p) = (self.n_rows(), self.n_features());
        let mut x = vec![0.0; n * p];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                x[i * p + j] = v;
            }
        }
        x
    }

    /// New table holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<FeatureTable> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(Error::InvalidInput(format!("row index {bad} out of range")));
        }
        FeatureTable::new(
            rows.iter().map(|&r| self.su_ids[r]).collect(),
            self.feature_names.clone(),
            self.columns.iter().map(|col| rows.iter().map(|&r| col[r]).collect()).collect(),
            self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
        )
    }

    /// New table without the named column (the gpk ablation for the
    /// conventional-paradigm comparison).
    pub fn drop_column(&self, name: &str) -> Result<FeatureTable> {
        let pos = self
            .feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("no column named `{name}`")))?;
        let mut names = self.feature_names.clone();
        let mut columns = self.columns.clone();
        names.remove(pos);
        columns.remove(pos);
        FeatureTable::new(self.su_ids.clone(), names, columns, self.labels.clone())
    }

    /// New table with an extra column appended.
    pub fn with_column(&self, name: &str, values: Vec<f64>) -> Result<FeatureTable> {
        let mut names = self.feature_names.clone();
        let mut columns = self.columns.clone();
        names.push(name.to_string());
        columns.push(values);
        FeatureTable::new(self.su_ids.clone(), names, columns, self.labels.clone())
    }

    /// Write as CSV: `su_id,<features...>[,label]`, one row per slope unit.
    /// Floats use the shortest round-trip form, so read-back is exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("su_id");
        for name in &self.feature_names {
            let _ = write!(out, ",{name}");
        }
        if self.labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            let _ = write!(out, "{}", self.su_ids[i]);
            for col in &self.columns {
                let _ = write!(out, ",{}", col[i]);
            }
            if let Some(l) = &self.labels {
                let _ = write!(out, ",{}", l[i]);
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

// ── CSV ingestion ────────────────────────────────────────────────────────────

/// Read a feature CSV (header row, `su_id` column required). Every column
/// except `su_id` and the designated label column is parsed as a numeric
/// covariate; the label column is coerced to {0, 1}.
pub fn read_feature_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> =
        reader.headers().map_err(|e| csv_error(path, &e))?.iter().map(String::from).collect();
    let id_col = headers
        .iter()
        .position(|h| h == "su_id")
        .ok_or_else(|| Error::InvalidInput(format!("{}: missing su_id column", path.display())))?;
    let label_col = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidInput(format!("{}: missing label column `{name}`", path.display()))
        })?),
        None => None,
    };

    let mut feature_names = Vec::new();
    let mut feature_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i != id_col && Some(i) != label_col {
            feature_names.push(h.clone());
            feature_cols.push(i);
        }
    }

    let mut su_ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_names.len()];
    let mut labels: Vec<u8> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id_tok = record.get(id_col).unwrap_or("");
        let id = id_tok.parse::<u32>().map_err(|_| {
            Error::parse(path, line, id_col + 1, format!("su_id `{id_tok}` is not an integer"))
        })?;
        su_ids.push(id);
        for (slot, &col) in feature_cols.iter().enumerate() {
            let tok = record.get(col).unwrap_or("");
            let v = tok.parse::<f64>().map_err(|_| {
                Error::parse(
                    path,
                    line,
                    col + 1,
                    format!("non-numeric value `{tok}` in column `{}`", feature_names[slot]),
                )
            })?;
            columns[slot].push(v);
        }
        if let Some(col) = label_col {
            let tok = record.get(col).unwrap_or("");
            match tok.parse::<i64>() {
                Ok(0) => labels.push(0),
                Ok(1) => labels.push(1),
                _ => {
                    return Err(Error::parse(
                        path,
                        line,
                        col + 1,
                        format!("label `{tok}` is not 0 or 1"),
                    ))
                }
            }
        }
    }

    FeatureTable::new(su_ids, feature_names, columns, label_col.map(|_| labels))
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::parse(path, p.line() as usize, 0, e.to_string()),
        None => Error::InvalidInput(format!("{}: {e}", path.display())),
    }
}

// ── Assembly ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinReport {
    /// Slope units present in some input but not all, dropped by the inner
    /// join. Silent imputation under data scarcity could fabricate signal, so
    /// drops are counted and surfaced instead.
    pub dropped_rows: usize,
}

/// Inner-join gpk, named covariate tables, and optional labels on `su_id`.
/// Column order: gpk, covariates in the given order, label last; rows are
/// sorted by id.
pub fn assemble_feature_table(
    gpk: &[(u32, f64)],
    covariates: &[(String, Vec<(u32, f64)>)],
    labels: Option<&[(u32, u8)]>,
) -> Result<(FeatureTable, JoinReport)> {
    let gpk_map = to_unique_map(gpk, "gpk")?;
    let mut covariate_maps = Vec::with_capacity(covariates.len());
    for (name, rows) in covariates {
        if name == "gpk" {
            return Err(Error::InvalidInput("duplicate covariate name `gpk`".into()));
        }
        covariate_maps.push((name.clone(), to_unique_map(rows, name)?));
    }
    let label_map = match labels {
        Some(rows) => {
            let mut map = HashMap::with_capacity(rows.len());
            for &(id, y) in rows {
                if y > 1 {
                    return Err(Error::InvalidInput(format!("non-binary label for su_id {id}")));
                }
                if map.insert(id, y).is_some() {
                    return Err(Error::InvalidInput(format!("duplicate su_id {id} in labels")));
                }
            }
            Some(map)
        }
        None => None,
    };

    let mut union: HashSet<u32> = gpk_map.keys().copied().collect();
    let mut keep: Vec<u32> = gpk_map.keys().copied().collect();
    for (_, map) in &covariate_maps {
        union.extend(map.keys().copied());
        keep.retain(|id| map.contains_key(id));
    }
    if let Some(map) = &label_map {
        union.extend(map.keys().copied());
        keep.retain(|id| map.contains_key(id));
    }
    keep.sort_unstable();
    let dropped_rows = union.len() - keep.len();

    let mut names = vec!["gpk".to_string()];
    let mut columns = vec![keep.iter().map(|id| gpk_map[id]).collect::<Vec<f64>>()];
    for (name, map) in &covariate_maps {
        names.push(name.clone());
        columns.push(keep.iter().map(|id| map[id]).collect());
    }
    let labels_out = label_map.map(|map| keep.iter().map(|id| map[id]).collect());

    let table = FeatureTable::new(keep, names, columns, labels_out)?;
    Ok((table, JoinReport { dropped_rows }))
}

fn to_unique_map(rows: &[(u32, f64)], what: &str) -> Result<HashMap<u32, f64>> {
    let mut map = HashMap::with_capacity(rows.len());
    for &(id, v) in rows {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite {what} for su_id {id}")));
        }
        if map.insert(id, v).is_some() {
            return Err(Error::InvalidInput(format!("duplicate su_id {id} in {what} table")));
        }
    }
    Ok(map)
}

// ── Zonal statistics ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZonalStat {
    Mean,
    Std,
    Max,
    Min,
    /// Vector mean of angles in degrees, mapped to [0, 360).
    CircularMeanDeg,
}

impl std::str::FromStr for ZonalStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ZonalStat::Mean),
            "std" => Ok(ZonalStat::Std),
            "max" => Ok(ZonalStat::Max),
            "min" => Ok(ZonalStat::Min),
            "circular_mean_deg" => Ok(ZonalStat::CircularMeanDeg),
            other => Err(Error::InvalidInput(format!("unknown zonal statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZonalResult {
    /// `(su_id, value)` sorted by id.
    pub rows: Vec<(u32, f64)>,
    /// Units with zero valid raster cells, omitted from `rows`.
    pub omitted: Vec<u32>,
}

#[derive(Default, Clone)]
struct ZoneAcc {
    n: f64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
    sin: f64,
    cos: f64,
    seen: bool,
}

/// Per-slope-unit statistic over valid raster cells. Std is the population
/// form (divide by n): units fully enumerate their cells, they are not
/// samples.
pub fn zonal_statistics(raster: &Grid, su_labels: &Grid, stat: ZonalStat) -> Result<ZonalResult> {
    raster.check_geometry(su_labels, "zonal_statistics")?;

    let mut zones: BTreeMap<u32, ZoneAcc> = BTreeMap::new();
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
        let acc = zones.entry(raw as u32).or_default();
        if !raster.is_valid_idx(idx) {
            continue;
        }
        let v = raster.values()[idx];
        if !acc.seen {
            acc.min = v;
            acc.max = v;
            acc.seen = true;
        } else {
            acc.min = acc.min.min(v);
            acc.max = acc.max.max(v);
        }
        acc.n += 1.0;
        acc.sum += v;
        acc.sum_sq += v * v;
        let rad = v.to_radians();
        acc.sin += rad.sin();
        acc.cos += rad.cos();
    }
    if zones.is_empty() {
        return Err(Error::InvalidInput("no slope-unit ids present in label grid".into()));
    }

    let mut rows = Vec::with_capacity(zones.len());
    let mut omitted = Vec::new();
    for (id, acc) in zones {
        if !acc.seen {
            omitted.push(id);
            continue;
        }
        let mean = acc.sum / acc.n;
        let value = match stat {
            ZonalStat::Mean => mean,
            ZonalStat::Std => (acc.sum_sq / acc.n - mean * mean).max(0.0).sqrt(),
            ZonalStat::Max => acc.max,
            ZonalStat::Min => acc.min,
            ZonalStat::CircularMeanDeg => {
                (acc.sin / acc.n).atan2(acc.cos / acc.n).to_degrees().rem_euclid(360.0)
            }
        };
        rows.push((id, value));
    }
    Ok(ZonalResult { rows, omitted })
}

// ── Tests ────────────────────────────────────────────────────────────────────
