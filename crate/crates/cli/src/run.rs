//! `pipe run`: one world, one planner, one directory per start pose.

use std::path::Path;

use pipe_core::gridmap::{Cell, GroundTruthGrid};
use pipe_core::simulator::{derive_seed, ExperimentRecord, SimConfig, Simulation};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{create_dir, under, write_graymap, write_record};
use crate::world::{resolve_starts, resolve_world};
use crate::{worker_pool, CliError, CliResult};

#[derive(Debug)]
pub struct RunReport {
    pub index: usize,
    pub start: Cell,
    pub world: String,
    pub outcome: CliResult<ExperimentRecord>,
}

pub fn run_dir_name(index: usize) -> String {
    format!("run_{index:03}")
}

/// Runs every start and writes `run_NNN/` directories under the output
/// directory. Fails with a run error if any start failed; the others are
/// still written.
pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<Vec<RunReport>> {
    cfg.validate()?;
    let world = resolve_world(&cfg.world, cfg.sim.seed, 0)?;
    let starts = resolve_starts(&world.grid, &cfg.starts, derive_seed(cfg.sim.seed, "starts", 0))?;
    create_dir(&cfg.output)?;
    let pool = worker_pool(cfg.workers)?;
    let reports: Vec<RunReport> = pool.install(|| {
        starts
            .par_iter()
            .enumerate()
            .map(|(index, &start)| {
                let dir = cfg.output.join(run_dir_name(index));
                let outcome = run_single(&world.grid, &cfg.sim, start, cfg.snapshot_every, &dir)
                    .and_then(|rec| write_record(&dir, &rec, &world.label, &cfg.sim).map(|_| rec));
                RunReport {
                    index,
                    start,
                    world: world.label.clone(),
                    outcome,
                }
            })
            .collect()
    });
    let failed: Vec<String> = reports
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("start {}: {e}", r.start)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Run(failed.join("; ")));
    }
    Ok(reports)
}

/// One simulation, optionally writing `snapshots/observed_T.pgm` (and the
/// fused prediction as 16-bit `predicted_T.pgm`) whenever the next step
/// to run is a multiple of `snapshot_every`.
pub fn run_single(
    world: &GroundTruthGrid,
    config: &SimConfig,
    start: Cell,
    snapshot_every: Option<usize>,
    dir: &Path,
) -> CliResult<ExperimentRecord> {
    let mut sim = Simulation::new(world, config.clone(), start).map_err(CliError::run)?;
    let snapshots = match snapshot_every {
        Some(k) => {
            let d = under(dir, "snapshots")?;
            create_dir(&d)?;
            Some((k, d))
        }
        None => None,
    };
    while !sim.is_done() {
        sim.step().map_err(CliError::run)?;
        if let Some((k, d)) = &snapshots {
            if !sim.is_done() && sim.t() % k == 0 {
                let t = sim.t();
                write_graymap(&under(d, &format!("observed_{t:06}.pgm"))?, &sim.observed().to_graymap())?;
                if let Some(ens) = sim.ensemble() {
                    write_graymap(&under(d, &format!("predicted_{t:06}.pgm"))?, &ens.fused().to_graymap16())?;
                }
            }
        }
    }
    sim.finish().map_err(CliError::run)
}
