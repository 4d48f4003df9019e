//! `pipe oracle-check`: the union route against per-pose rasterization on
//! seeded random worlds and paths, plus the pillar loop.

use std::path::PathBuf;

use pipe_core::geometry::{compare_with_oracle, MapView, MaskParams, PathMaskOptions, VisibilityMask};
use pipe_core::gridmap::{Cell, PredictedGrid};
use pipe_core::scenarios::{pillar_loop, random_probability_world, random_walk};
use pipe_core::simulator::derive_seed;
use serde::Serialize;

use crate::output::{create_dir, under, write_graymap, write_json};
use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub seed: u64,
    pub trials: usize,
    pub size: usize,
    pub max_path: usize,
    pub epsilon: f64,
    pub mask: MaskParams,
    /// Subtract holes on the union route. Off only to show the check bites.
    pub holes: bool,
    /// Where counterexamples are dumped.
    pub out: PathBuf,
}

impl Default for OracleArgs {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            size: 64,
            max_path: 50,
            epsilon: 0.8,
            mask: MaskParams {
                range: 20.0,
                samples: 360,
                stride: 1,
            },
            holes: true,
            out: PathBuf::from("oracle_failures"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub name: String,
    pub path_len: usize,
    pub oracle_cells: usize,
    pub differing: usize,
    pub allowance: usize,
    pub off_ring: usize,
    /// Pillar trial only: cells inside the pillar the mask wrongly covers.
    pub trapped_covered: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub trials: Vec<TrialResult>,
    pub max_difference: usize,
}

impl OracleReport {
    pub fn failures(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(|t| !t.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Runs the pillar trial and `trials` random ones. The report is returned
/// even when trials fail; failing cases are dumped under `args.out`.
pub fn cmd_oracle_check(args: &OracleArgs) -> CliResult<OracleReport> {
    if args.trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if args.size < 3 || args.max_path == 0 {
        return Err(CliError::Usage("size must be at least 3 and max_path at least 1".into()));
    }
    let options = PathMaskOptions {
        extract_holes: args.holes,
    };
    let mut results = Vec::with_capacity(args.trials + 1);

    let pillar = pillar_loop();
    let r = trial("pillar", &pillar.map, &pillar.path, args, options, &pillar.trapped)?;
    results.push(r.0.clone());
    if !r.0.passed {
        dump(args, &r.0.name, &pillar.map, &pillar.path, &r.1, &r.2)?;
    }

    for i in 0..args.trials {
        let map = random_probability_world(derive_seed(args.seed, "oracle-map", i as u64), args.size)
            .map_err(CliError::usage)?;
        let path = random_walk(derive_seed(args.seed, "oracle-path", i as u64), &map, args.max_path);
        let (res, optimized, oracle) = trial(&format!("trial_{i:03}"), &map, &path, args, options, &[])?;
        if !res.passed {
            dump(args, &res.name, &map, &path, &optimized, &oracle)?;
        }
        results.push(res);
    }
    let max_difference = results.iter().map(|t| t.differing).max().unwrap_or(0);
    Ok(OracleReport {
        trials: results,
        max_difference,
    })
}

fn trial(
    name: &str,
    map: &PredictedGrid,
    path: &[Cell],
    args: &OracleArgs,
    options: PathMaskOptions,
    trapped: &[Cell],
) -> CliResult<(TrialResult, VisibilityMask, VisibilityMask)> {
    let view = MapView::Predicted {
        grid: map,
        epsilon: args.epsilon,
    };
    let (optimized, oracle, report) = compare_with_oracle(path, view, &args.mask, options).map_err(CliError::run)?;
    let trapped_covered = trapped.iter().filter(|&&c| optimized.get(c)).count();
    let result = TrialResult {
        name: name.to_string(),
        path_len: path.len(),
        oracle_cells: report.oracle_cells,
        differing: report.differing.len(),
        allowance: report.allowance(),
        off_ring: report.off_ring.len(),
        trapped_covered,
        passed: report.passes() && trapped_covered == 0,
    };
    Ok((result, optimized, oracle))
}

fn dump(
    args: &OracleArgs,
    name: &str,
    map: &PredictedGrid,
    path: &[Cell],
    optimized: &VisibilityMask,
    oracle: &VisibilityMask,
) -> CliResult<()> {
    let dir = under(&args.out, name)?;
    create_dir(&dir)?;
    write_graymap(&under(&dir, "map.pgm")?, &map.to_graymap16())?;
    write_graymap(&under(&dir, "union.pgm")?, &optimized.to_graymap())?;
    write_graymap(&under(&dir, "oracle.pgm")?, &oracle.to_graymap())?;
    write_json(&under(&dir, "path.json")?, &path)?;
    log::warn!("counterexample written to {}", dir.display());
    Ok(())
}
