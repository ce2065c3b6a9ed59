use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use geoprior::eval::{classify_susceptibility, ensemble_lsi, jenks_breaks};
use geoprior::model::FittedModel;
use geoprior::tabular::read_feature_csv;

use super::{ensure_dir, usage};
use crate::config::parse_list;

#[derive(Args)]
pub struct MapArgs {
    /// Feature table covering every slope unit to map
    #[arg(long)]
    features: PathBuf,
    /// Directory of serialized models (every `*.json`, e.g. the CV ensemble)
    #[arg(long)]
    models_dir: PathBuf,
    /// Four ascending class thresholds; omitted → derived here by Jenks
    /// natural breaks (written to thresholds.csv)
    #[arg(long)]
    thresholds: Option<String>,
    /// Label column to ignore if the features file carries one
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: MapArgs) -> Result<()> {
    let has_label = std::fs::read_to_string(&args.features)
        .map(|text| {
            text.lines()
                .next()
                .map(|h| h.split(',').any(|c| c.trim() == args.label_column))
                .unwrap_or(false)
        })
        .unwrap_or(false);
    let table = read_feature_csv(&args.features, has_label.then_some(args.label_column.as_str()))?;

    let mut model_paths: Vec<PathBuf> = std::fs::read_dir(&args.models_dir)
        .with_context(|| format!("cannot list {}", args.models_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    model_paths.sort();
    if model_paths.is_empty() {
        return Err(usage(format!("no model files in {}", args.models_dir.display())));
    }
    let models: Vec<FittedModel> =
        model_paths.iter().map(FittedModel::load).collect::<geoprior::Result<_>>()?;

    let lsi = ensemble_lsi(&models, &table)?;
    let (thresholds, derived) = match &args.thresholds {
        Some(text) => {
            let t: Vec<f64> = parse_list(text, "threshold").map_err(super::as_usage)?;
            if t.len() != 4 {
                return Err(usage(format!("--thresholds needs 4 values, got {}", t.len())));
            }
            (t, false)
        }
        None => (jenks_breaks(&lsi, 5)?, true),
    };
    let classes = classify_susceptibility(&lsi, &thresholds)?;

    ensure_dir(&args.out_dir)?;
    let mut csv = String::from("su_id,lsi,class\n");
    for ((id, v), class) in table.su_ids().iter().zip(&lsi).zip(&classes) {
        let _ = writeln!(csv, "{id},{v:.10},{class}");
    }
    let lsi_path = args.out_dir.join("lsi.csv");
    std::fs::write(&lsi_path, csv).with_context(|| format!("cannot write {}", lsi_path.display()))?;

    if derived {
        let mut csv = String::from("threshold\n");
        for t in &thresholds {
            let _ = writeln!(csv, "{t:.6}");
        }
        let path = args.out_dir.join("thresholds.csv");
        std::fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "[map] {} units scored by {} models; thresholds {:?}{}",
        table.n_rows(),
        models.len(),
        thresholds,
        if derived { " (Jenks, written to thresholds.csv)" } else { " (supplied)" }
    );
    Ok(())
}
