//! `pipe gen-map`: procedural floorplans as JSON and/or graymaps.

use std::path::PathBuf;

use pipe_core::ingestion::{generate_floorplan, rasterize_floorplan, FloorplanSpec, MapClass};

use crate::output::{write_graymap, write_text};
use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct GenMapArgs {
    pub class: MapClass,
    pub seed: u64,
    pub resolution: Option<f64>,
    pub json: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
}

pub fn cmd_gen_map(args: &GenMapArgs) -> CliResult<FloorplanSpec> {
    if args.json.is_none() && args.pgm.is_none() {
        return Err(CliError::Usage("give --json and/or --pgm".into()));
    }
    let mut spec = generate_floorplan(args.seed, args.class).map_err(CliError::run)?;
    if let Some(r) = args.resolution {
        spec.resolution = r;
    }
    spec.validate().map_err(CliError::usage)?;
    if let Some(path) = &args.json {
        write_text(path, &(spec.to_json() + "\n"))?;
    }
    if let Some(path) = &args.pgm {
        let world = rasterize_floorplan(&spec).map_err(CliError::run)?;
        write_graymap(path, &world.to_graymap())?;
    }
    Ok(spec)
}
