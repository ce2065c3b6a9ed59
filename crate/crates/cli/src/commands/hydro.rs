use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use geoprior::pipeline::HydroProducts;
use geoprior::raster::{read_ascii_grid, write_ascii_grid};

use super::ensure_dir;

#[derive(Args)]
pub struct HydroArgs {
    /// Input DEM (ESRI ASCII grid)
    #[arg(long)]
    dem: PathBuf,
    /// Depression-fill gradient in metres
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Flow-accumulation threshold (cells) for stream extraction
    #[arg(long)]
    stream_threshold: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: HydroArgs) -> Result<()> {
    let dem = read_ascii_grid(&args.dem)?;
    let hydro = HydroProducts::compute(&dem, args.epsilon, args.stream_threshold)?;

    ensure_dir(&args.out_dir)?;
    write_ascii_grid(&hydro.hydrodem, args.out_dir.join("hydrodem.asc"))?;
    write_ascii_grid(&hydro.flow.to_code_grid(), args.out_dir.join("flowdir.asc"))?;
    write_ascii_grid(&hydro.facc, args.out_dir.join("facc.asc"))?;
    write_ascii_grid(&hydro.facc_weighted, args.out_dir.join("facc_w.asc"))?;
    write_ascii_grid(&hydro.slope, args.out_dir.join("slope.asc"))?;
    let streams_grid =
        hydro.streams.to_grid(&hydro.facc)?.restricted_to(&hydro.facc.valid_mask())?;
    write_ascii_grid(&streams_grid, args.out_dir.join("streams.asc"))?;
    eprintln!(
        "[hydro] wrote hydrodem/flowdir/facc/facc_w/slope/streams ({} stream cells) to {}",
        hydro.streams.count(),
        args.out_dir.display()
    );
    Ok(())
}
