use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};

use geoprior::raster::write_ascii_grid;
use geoprior::synth::{generate_dem, generate_inventory, generate_su_labels, DemKind, DemSpec};

use super::{ensure_dir, read_gpk_csv, usage};
use crate::config::parse_list;

#[derive(Subcommand)]
pub enum SynthCommand {
    /// DEM (`dem.asc`) plus contiguous slope units (`su.asc`)
    Scene(SceneArgs),
    /// Labelled inventory planted on an existing gpk table
    Inventory(InventoryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Plane,
    Cone,
    GaussianHills,
}

#[derive(Args)]
pub struct SceneArgs {
    #[arg(long, value_enum, default_value = "gaussian-hills")]
    kind: KindArg,
    /// Square grid edge length in cells (>= 16)
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Cell size in metres
    #[arg(long, default_value_t = 10.0)]
    cellsize: f64,
    /// White-noise standard deviation in metres
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Plane gradient along x (east)
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    gx: f64,
    /// Plane gradient along y (north)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gy: f64,
    /// Cone apex elevation in metres
    #[arg(long, default_value_t = 500.0)]
    apex: f64,
    /// Cone radial gradient (rise/run)
    #[arg(long, default_value_t = 0.3)]
    gradient: f64,
    /// Number of Gaussian bumps
    #[arg(long, default_value_t = 14)]
    hills: usize,
    /// Peak bump amplitude in metres
    #[arg(long, default_value_t = 120.0)]
    amplitude: f64,
    /// Bump width parameter in metres
    #[arg(long, default_value_t = 180.0)]
    sigma: f64,
    /// Approximate number of slope units
    #[arg(long, default_value_t = 200)]
    target_units: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct InventoryArgs {
    /// gpk table from the prior stage (`su_id,gpk`)
    #[arg(long)]
    gpk: PathBuf,
    /// Number of standard-normal nuisance columns
    #[arg(long, default_value_t = 3)]
    nuisance: usize,
    /// Weights: gpk first, then one per nuisance column (comma-separated)
    #[arg(long, default_value = "3.0,0.0,0.0,0.0", allow_hyphen_values = true)]
    weights: String,
    #[arg(long, default_value_t = -1.5, allow_negative_numbers = true)]
    intercept: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (`su_id,nuisance_…,label`)
    #[arg(long)]
    out: PathBuf,
}

pub fn run(command: SynthCommand) -> Result<()> {
    match command {
        SynthCommand::Scene(args) => scene(args),
        SynthCommand::Inventory(args) => inventory(args),
    }
}

fn scene(args: SceneArgs) -> Result<()> {
    let kind = match args.kind {
        KindArg::Plane => DemKind::Plane { gx: args.gx, gy: args.gy },
        KindArg::Cone => DemKind::Cone { apex: args.apex, gradient: args.gradient },
        KindArg::GaussianHills => DemKind::GaussianHills {
            hills: args.hills,
            amplitude: args.amplitude,
            sigma_m: args.sigma,
        },
    };
    let spec = DemSpec {
        kind,
        size: args.size,
        cellsize: args.cellsize,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let dem = generate_dem(&spec)?;
    let su = generate_su_labels(&dem, args.target_units, args.seed.wrapping_add(1))?;

    ensure_dir(&args.out_dir)?;
    write_ascii_grid(&dem, args.out_dir.join("dem.asc"))?;
    write_ascii_grid(&su, args.out_dir.join("su.asc"))?;
    eprintln!(
        "[synth] wrote dem.asc and su.asc ({}x{} cells) to {}",
        args.size,
        args.size,
        args.out_dir.display()
    );
    Ok(())
}

fn inventory(args: InventoryArgs) -> Result<()> {
    let gpk = read_gpk_csv(&args.gpk)?;
    let weights: Vec<f64> = parse_list(&args.weights, "weight").map_err(super::as_usage)?;
    if weights.len() != 1 + args.nuisance {
        return Err(usage(format!(
            "--weights needs {} entries (gpk + {} nuisance), got {}",
            1 + args.nuisance,
            args.nuisance,
            weights.len()
        )));
    }
    let (table, _) =
        generate_inventory(&gpk, args.nuisance, &weights, args.intercept, args.seed)?;
    // gpk stays in gpk.csv; the inventory file carries only what it adds.
    let table = table.drop_column("gpk")?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    table.write_csv(&args.out)?;
    let (pos, neg) = table.class_counts().context("inventory has labels")?;
    eprintln!(
        "[synth] wrote {} rows ({pos} positive, {neg} negative) to {}",
        table.n_rows(),
        args.out.display()
    );
    Ok(())
}
