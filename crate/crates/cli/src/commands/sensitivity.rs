use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use geoprior::prior::{sensitivity_search, MorphometricParams};
use geoprior::raster::read_ascii_grid;

use super::{as_usage, ensure_dir, read_labels_csv};
use crate::config::parse_list;

#[derive(Args)]
pub struct SensitivityArgs {
    /// Input DEM (the full chain reruns per parameter pair)
    #[arg(long)]
    dem: PathBuf,
    /// Slope-unit label grid
    #[arg(long)]
    su: PathBuf,
    /// CSV with ground-truth binary labels per slope unit
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Candidate slope thresholds in degrees (comma-separated)
    #[arg(long)]
    slope_thresholds: String,
    /// Candidate buffer widths in metres (comma-separated)
    #[arg(long)]
    buffers: String,
    /// Stream extraction threshold in cells (fixed across the grid)
    #[arg(long)]
    stream_threshold: usize,
    /// Depression-fill gradient in metres
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: SensitivityArgs) -> Result<()> {
    let dem = read_ascii_grid(&args.dem)?;
    let su = read_ascii_grid(&args.su)?;
    let truth = read_labels_csv(&args.truth, &args.label_column)?;
    let thresholds: Vec<f64> =
        parse_list(&args.slope_thresholds, "slope threshold").map_err(as_usage)?;
    let buffers: Vec<f64> = parse_list(&args.buffers, "buffer width").map_err(as_usage)?;
    let fixed = MorphometricParams {
        slope_threshold_deg: 0.0,
        buffer_width_m: 0.0,
        stream_threshold_cells: args.stream_threshold,
        epsilon_m: args.epsilon,
    };

    let result = sensitivity_search(&dem, &su, &truth, &thresholds, &buffers, &fixed)?;
    for (t, b, err) in &result.failures {
        eprintln!("[sensitivity] pair ({t}°, {b} m) failed: {err}");
    }

    ensure_dir(&args.out_dir)?;
    let mut csv = String::from("slope_threshold,buffer_m,auc,brier\n");
    for r in &result.records {
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6}",
            r.slope_threshold_deg, r.buffer_width_m, r.auc, r.brier
        );
    }
    let path = args.out_dir.join("sensitivity.csv");
    std::fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;

    println!(
        "best: slope threshold {}°, buffer {} m (AUC {:.4}, Brier {:.4})",
        result.best.slope_threshold_deg,
        result.best.buffer_width_m,
        result.best.auc,
        result.best.brier
    );
    Ok(())
}
