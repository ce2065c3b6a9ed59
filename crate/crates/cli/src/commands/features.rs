use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use geoprior::raster::read_ascii_grid;
use geoprior::tabular::{assemble_feature_table, read_feature_csv, zonal_statistics, ZonalStat};
use geoprior::terrain::{aspect_components, aspect_degrees};

use super::{ensure_dir, read_gpk_csv, read_labels_csv};

#[derive(Args)]
pub struct FeaturesArgs {
    /// gpk table from the prior stage (`su_id,gpk`)
    #[arg(long)]
    gpk: PathBuf,
    /// Slope-unit label grid
    #[arg(long)]
    su: PathBuf,
    /// DEM; adds zonal mean elevation plus aspect features
    #[arg(long)]
    dem: Option<PathBuf>,
    /// Slope raster; adds zonal mean slope
    #[arg(long)]
    slope: Option<PathBuf>,
    /// Extra covariate CSVs keyed by su_id (repeatable; label column ignored)
    #[arg(long = "covariates")]
    covariates: Vec<PathBuf>,
    /// CSV holding the training labels
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Output feature table CSV
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: FeaturesArgs) -> Result<()> {
    let gpk = read_gpk_csv(&args.gpk)?;
    let su = read_ascii_grid(&args.su)?;

    let mut covariates: Vec<(String, Vec<(u32, f64)>)> = Vec::new();
    let mut zonal = |name: &str, raster: &geoprior::raster::Grid, stat| -> Result<()> {
        su.check_geometry(raster, name)?;
        let result = zonal_statistics(raster, &su, stat)?;
        for id in &result.omitted {
            eprintln!("[features] warning: unit {id} has no valid cells for {name}; omitted");
        }
        covariates.push((name.to_string(), result.rows));
        Ok(())
    };

    if let Some(path) = &args.dem {
        let dem = read_ascii_grid(path)?;
        zonal("elev_mean", &dem, ZonalStat::Mean)?;
        let (east, north) = aspect_components(&dem);
        zonal("aspect_cmean", &aspect_degrees(&dem), ZonalStat::CircularMeanDeg)?;
        zonal("easterness_mean", &east, ZonalStat::Mean)?;
        zonal("northerness_mean", &north, ZonalStat::Mean)?;
    }
    if let Some(path) = &args.slope {
        let slope = read_ascii_grid(path)?;
        zonal("slope_mean", &slope, ZonalStat::Mean)?;
    }

    for path in &args.covariates {
        // A label column in a covariate file is not a covariate; parse it
        // away when the file doubles as the label source.
        let has_label = std::fs::read_to_string(path)
            .map(|text| {
                text.lines()
                    .next()
                    .map(|h| h.split(',').any(|c| c.trim() == args.label_column))
                    .unwrap_or(false)
            })
            .unwrap_or(false);
        let table = read_feature_csv(path, has_label.then_some(args.label_column.as_str()))?;
        for name in table.feature_names() {
            let col = table.column(name).expect("named column");
            let rows: Vec<(u32, f64)> =
                table.su_ids().iter().copied().zip(col.iter().copied()).collect();
            covariates.push((name.clone(), rows));
        }
    }

    let labels = match &args.labels {
        Some(path) => Some(read_labels_csv(path, &args.label_column)?),
        None => None,
    };

    let (table, report) = assemble_feature_table(&gpk, &covariates, labels.as_deref())?;
    if report.dropped_rows > 0 {
        eprintln!("[features] warning: inner join dropped {} slope units", report.dropped_rows);
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    table.write_csv(&args.out)?;
    eprintln!(
        "[features] wrote {} rows x {} features to {}",
        table.n_rows(),
        table.n_features(),
        args.out.display()
    );
    Ok(())
}
