pub mod evaluate;
pub mod features;
pub mod hydro;
pub mod map;
pub mod prior;
pub mod sensitivity;
pub mod synth;

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use geoprior::tabular::read_feature_csv;

/// Marker for argument/config mistakes so main can map them to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Re-tag an error chain (config parsing and the like) as a usage error.
pub fn as_usage(err: anyhow::Error) -> anyhow::Error {
    usage(format!("{err:#}"))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create directory {}", path.display()))
}

/// `su_id,gpk` table as written by the prior stage.
pub fn read_gpk_csv(path: &Path) -> Result<Vec<(u32, f64)>> {
    let table = read_feature_csv(path, None)?;
    let gpk = table
        .column("gpk")
        .ok_or_else(|| usage(format!("{}: missing gpk column", path.display())))?;
    Ok(table.su_ids().iter().copied().zip(gpk.iter().copied()).collect())
}

pub fn write_gpk_csv(path: &Path, rows: &[(u32, f64)]) -> Result<()> {
    let mut out = String::from("su_id,gpk\n");
    for (id, gpk) in rows {
        let _ = writeln!(out, "{id},{gpk}");
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// `(su_id, label)` pairs from a labelled CSV column.
pub fn read_labels_csv(path: &Path, label_column: &str) -> Result<Vec<(u32, u8)>> {
    let table = read_feature_csv(path, Some(label_column))?;
    let labels = table.labels().expect("label column parsed");
    Ok(table.su_ids().iter().copied().zip(labels.iter().copied()).collect())
}
