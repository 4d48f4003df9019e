//! Resolving world sources and start poses.

use pipe_core::gridmap::{Cell, GroundTruthGrid};
use pipe_core::ingestion::{generate_floorplan, is_connected, load_graymap, rasterize_floorplan, FloorplanSpec};
use pipe_core::simulator::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{StartSpec, WorldSource};
use crate::{CliError, CliResult};

/// A loaded world and the class label it aggregates under.
#[derive(Debug, Clone)]
pub struct ResolvedWorld {
    pub grid: GroundTruthGrid,
    pub label: String,
}

/// Loads or generates world number `index`. Generated worlds without an
/// explicit seed take `derive_seed(root, "world", index)`.
pub fn resolve_world(source: &WorldSource, root_seed: u64, index: u64) -> CliResult<ResolvedWorld> {
    match source {
        WorldSource::Graymap { path, resolution } => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let grid = load_graymap(&bytes, *resolution).map_err(CliError::usage)?;
            Ok(ResolvedWorld {
                grid,
                label: source_label(source),
            })
        }
        WorldSource::Floorplan { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let spec = FloorplanSpec::from_json(&text).map_err(CliError::usage)?;
            let grid = rasterize_floorplan(&spec).map_err(CliError::usage)?;
            Ok(ResolvedWorld {
                grid,
                label: source_label(source),
            })
        }
        WorldSource::Generated {
            class,
            seed,
            resolution,
        } => {
            let seed = seed.unwrap_or_else(|| derive_seed(root_seed, "world", index));
            let mut spec = generate_floorplan(seed, *class).map_err(CliError::run)?;
            if let Some(r) = resolution {
                spec.resolution = *r;
            }
            let grid = rasterize_floorplan(&spec).map_err(CliError::usage)?;
            if resolution.is_some() && !is_connected(&grid) {
                log::warn!("generated {class} world {seed} is disconnected at {} cells/m", spec.resolution);
            }
            Ok(ResolvedWorld {
                grid,
                label: source_label(source),
            })
        }
    }
}

/// Aggregation label: the class for generated worlds, the file stem
/// otherwise.
pub fn source_label(src: &WorldSource) -> String {
    match src {
        WorldSource::Generated { class, .. } => class.name().to_string(),
        WorldSource::Graymap { path, .. } | WorldSource::Floorplan { path } => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
    }
}

/// Start cells for one world. Sampled starts are distinct Free cells drawn
/// with `seed`; explicit starts must be Free.
pub fn resolve_starts(world: &GroundTruthGrid, spec: &StartSpec, seed: u64) -> CliResult<Vec<Cell>> {
    spec.validate()?;
    if let Some(cells) = spec.explicit_cells() {
        for &c in &cells {
            if !world.geometry().contains(c) || !world.is_free(c) {
                return Err(CliError::Usage(format!("start {c} is not a free cell")));
            }
        }
        return Ok(cells);
    }
    let free: Vec<Cell> = world.free_cells().collect();
    let k = spec.count();
    if k > free.len() {
        return Err(CliError::Usage(format!(
            "asked for {k} starts but the world has {} free cells",
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, free.len(), k)
        .into_iter()
        .map(|i| free[i])
        .collect())
}
