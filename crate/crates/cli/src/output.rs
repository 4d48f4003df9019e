//! On-disk formats. Everything reproducible is written with fixed float
//! formatting and stable field order so reruns compare byte for byte;
//! wall-clock numbers go to `timing.json` only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pipe_core::gridmap::{Cell, Graymap};
use pipe_core::simulator::{ExperimentRecord, SimConfig, StepRow, Summary, Timing};
use serde::Serialize;

use crate::{CliError, CliResult};

pub const STEPS_CSV: &str = "steps.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const EVENTS_JSON: &str = "events.json";
pub const TIMING_JSON: &str = "timing.json";

/// Joins `name` onto `root`, refusing anything that would escape it.
pub fn under(root: &Path, name: &str) -> CliResult<PathBuf> {
    let rel = Path::new(name);
    let ok = rel
        .components()
        .all(|c| matches!(c, std::path::Component::Normal(_)));
    if !ok {
        return Err(CliError::Usage(format!("output name {name:?} leaves the output directory")));
    }
    Ok(root.join(rel))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::run)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_graymap(path: &Path, map: &Graymap) -> CliResult<()> {
    std::fs::write(path, map.encode()).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

pub fn steps_csv(rows: &[StepRow]) -> String {
    let mut s = String::from("t,x,y,known_fraction,goal_id,iou\n");
    for r in rows {
        let goal = r.goal_id.map(|g| g.to_string()).unwrap_or_default();
        let iou = r.iou.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{:.6},{},{}", r.t, r.pose.x, r.pose.y, r.known_fraction, goal, iou);
    }
    s
}

#[derive(Debug, Serialize)]
struct RunSummaryFile<'a> {
    world: &'a str,
    config_hash: &'a str,
    seed: u64,
    planner: &'a str,
    start: Cell,
    summary: &'a Summary,
    series: &'a [(usize, f64)],
    config: &'a SimConfig,
}

/// `steps.csv`, `summary.json`, `events.json` and `timing.json` in `dir`.
pub fn write_record(dir: &Path, record: &ExperimentRecord, world: &str, config: &SimConfig) -> CliResult<()> {
    create_dir(dir)?;
    write_text(&under(dir, STEPS_CSV)?, &steps_csv(&record.rows))?;
    write_json(
        &under(dir, SUMMARY_JSON)?,
        &RunSummaryFile {
            world,
            config_hash: &record.config_hash,
            seed: record.seed,
            planner: record.planner.name(),
            start: record.start,
            summary: &record.summary,
            series: &record.series,
            config,
        },
    )?;
    write_json(&under(dir, EVENTS_JSON)?, &record.events)?;
    write_timing(&under(dir, TIMING_JSON)?, &record.timing)
}

pub fn write_timing(path: &Path, timing: &Timing) -> CliResult<()> {
    write_json(path, timing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_cannot_escape_the_root() {
        let root = Path::new("/tmp/x");
        assert!(under(root, "run_000/steps.csv").is_ok());
        assert!(under(root, "../steps.csv").is_err());
        assert!(under(root, "/etc/passwd").is_err());
    }

    #[test]
    fn csv_leaves_missing_values_blank() {
        let rows = vec![
            StepRow {
                t: 0,
                pose: Cell::new(3, 4),
                known_fraction: 0.125,
                goal_id: Some(2),
                iou: Some(0.5),
            },
            StepRow {
                t: 1,
                pose: Cell::new(4, 4),
                known_fraction: 0.25,
                goal_id: None,
                iou: None,
            },
        ];
        assert_eq!(
            steps_csv(&rows),
            "t,x,y,known_fraction,goal_id,iou\n0,3,4,0.125000,2,0.500000\n1,4,4,0.250000,,\n"
        );
    }
}
