use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;

use geoprior::prior::{
    aggregate_prior_to_su, apply_prior_masks, drainage_area_log, joint_cdf,
    mean_upslope_gradient, MorphometricParams,
};
use geoprior::raster::{buffer_mask, exterior_mask, read_ascii_grid, write_ascii_grid, CellMask, Grid};

use super::{ensure_dir, write_gpk_csv};

#[derive(Args)]
pub struct PriorArgs {
    /// Directory holding the hydro stage outputs
    #[arg(long)]
    hydro_dir: PathBuf,
    /// Slope-unit label grid (positive integer ids; 0/NoData outside)
    #[arg(long)]
    su: PathBuf,
    /// Slope filtering threshold in degrees
    #[arg(long)]
    slope_threshold: f64,
    /// Channel buffer half-width in metres
    #[arg(long)]
    buffer_m: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn load(dir: &Path, name: &str) -> Result<Grid> {
    Ok(read_ascii_grid(dir.join(name))?)
}

pub fn run(args: PriorArgs) -> Result<()> {
    let hydrodem = load(&args.hydro_dir, "hydrodem.asc")?;
    let facc = load(&args.hydro_dir, "facc.asc")?;
    let facc_w = load(&args.hydro_dir, "facc_w.asc")?;
    let slope = load(&args.hydro_dir, "slope.asc")?;
    let streams_grid = load(&args.hydro_dir, "streams.asc")?;
    let su = read_ascii_grid(&args.su)?;
    for (name, grid) in [
        ("facc.asc", &facc),
        ("facc_w.asc", &facc_w),
        ("slope.asc", &slope),
        ("streams.asc", &streams_grid),
        ("slope-unit grid", &su),
    ] {
        hydrodem.check_geometry(grid, name)?;
    }

    let params = MorphometricParams::new(args.slope_threshold, args.buffer_m, 1)?;
    let streams = CellMask::from_bits(
        streams_grid.ncols(),
        streams_grid.nrows(),
        streams_grid.values().iter().map(|&v| v == 1.0).collect(),
    )?;

    let a = drainage_area_log(&facc, facc.cellsize())?;
    let beta = mean_upslope_gradient(&facc, &facc_w, &slope)?;
    let buffer = buffer_mask(&streams, params.buffer_width_m, slope.cellsize())?;
    let exterior = exterior_mask(&hydrodem.valid_mask());

    let mut population = CellMask::empty(a.ncols(), a.nrows());
    for idx in 0..a.len() {
        let keep = a.is_valid_idx(idx)
            && beta.is_valid_idx(idx)
            && slope.is_valid_idx(idx)
            && slope.values()[idx] >= params.slope_threshold_deg
            && !buffer.get_idx(idx)
            && !exterior.get_idx(idx);
        population.set_idx(idx, keep);
    }

    // No cell clears the slope threshold on a flat scene: the prior is
    // identically zero, not an error.
    let field = if population.count() == 0 {
        geoprior::prior::PriorField {
            prior: a.with_values(vec![0.0; a.len()])?,
            population_mask: population.clone(),
        }
    } else {
        joint_cdf(&a, &beta, &population)?
    };
    let field = apply_prior_masks(&field, &slope, &params, &buffer, &exterior)?;
    let aggregate = aggregate_prior_to_su(&field, &su)?;

    ensure_dir(&args.out_dir)?;
    write_ascii_grid(&field.prior, args.out_dir.join("prior.asc"))?;
    write_gpk_csv(&args.out_dir.join("gpk.csv"), &aggregate.rows)?;
    for id in &aggregate.dropped {
        eprintln!("[prior] warning: slope unit {id} is entirely exterior; dropped");
    }
    eprintln!(
        "[prior] population {} cells; {} slope units written to {}",
        population.count(),
        aggregate.rows.len(),
        args.out_dir.display()
    );
    Ok(())
}
