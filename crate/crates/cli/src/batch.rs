//! `pipe batch`: maps × starts × planners, aggregated into tables.

use std::fmt::Write as _;
use std::path::PathBuf;

use pipe_core::gridmap::Cell;
use pipe_core::metrics::{aggregate, aggregate_csv, format_tables, AggregateRow, RunOutcome};
use pipe_core::planners::PlannerKind;
use pipe_core::simulator::{derive_seed, SimConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::BatchSpec;
use crate::output::{create_dir, under, write_json, write_record, write_text};
use crate::run::{run_dir_name, run_single};
use crate::world::{resolve_starts, resolve_world, source_label, ResolvedWorld};
use crate::{worker_pool, CliResult};

pub const RUNS_CSV: &str = "runs.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const TABLES_TXT: &str = "tables.txt";

/// One cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub map: usize,
    pub map_class: String,
    pub planner: PlannerKind,
    pub start_index: usize,
    pub start: Option<Cell>,
    pub auc: Option<f64>,
    pub t90: Option<usize>,
    pub t95: Option<usize>,
    pub final_iou: Option<f64>,
    pub error: Option<String>,
}

impl BatchRow {
    fn outcome(&self) -> RunOutcome {
        RunOutcome {
            planner: self.planner.name().to_string(),
            map_class: self.map_class.clone(),
            auc: self.auc,
            t90: self.t90,
            t95: self.t95,
            errored: self.error.is_some(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
    pub aggregate: Vec<AggregateRow>,
    pub output: PathBuf,
}

impl BatchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

struct Job<'a> {
    map: usize,
    world: &'a ResolvedWorld,
    start_index: usize,
    start: Cell,
    planner: PlannerKind,
}

/// Runs the whole sweep. Individual failures become rows with an error and
/// do not stop the batch; the caller decides the exit code from
/// [`BatchReport::failures`].
pub fn cmd_batch(spec: &BatchSpec) -> CliResult<BatchReport> {
    spec.validate()?;
    let pool = worker_pool(spec.workers)?;
    let sources = spec.worlds();
    let root = spec.sim.seed;
    let worlds: Vec<(String, CliResult<(ResolvedWorld, Vec<Cell>)>)> = pool.install(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(m, src)| {
                let loaded = resolve_world(src, root, m as u64).and_then(|w| {
                    let starts = resolve_starts(&w.grid, &spec.starts, derive_seed(root, "starts", m as u64))?;
                    Ok((w, starts))
                });
                (source_label(src), loaded)
            })
            .collect()
    });

    let mut jobs = Vec::new();
    let mut rows_failed_early = Vec::new();
    for (m, (label, loaded)) in worlds.iter().enumerate() {
        match loaded {
            Ok((world, starts)) => {
                for (start_index, &start) in starts.iter().enumerate() {
                    for &planner in &spec.planners {
                        jobs.push(Job {
                            map: m,
                            world,
                            start_index,
                            start,
                            planner,
                        });
                    }
                }
            }
            Err(e) => {
                log::error!("map {m} ({label}): {e}");
                for start_index in 0..spec.starts.count() {
                    for &planner in &spec.planners {
                        rows_failed_early.push(BatchRow {
                            map: m,
                            map_class: label.clone(),
                            planner,
                            start_index,
                            start: None,
                            auc: None,
                            t90: None,
                            t95: None,
                            final_iou: None,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
        }
    }

    create_dir(&spec.output)?;
    let ran: Vec<BatchRow> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_job(job, &spec.sim, spec))
            .collect()
    });
    let mut rows = ran;
    rows.extend(rows_failed_early);
    rows.sort_by(|a, b| {
        (a.map, a.start_index, a.planner).cmp(&(b.map, b.start_index, b.planner))
    });

    let outcomes: Vec<RunOutcome> = rows.iter().map(BatchRow::outcome).collect();
    let agg = aggregate(&outcomes);
    write_text(&under(&spec.output, RUNS_CSV)?, &runs_csv(&rows))?;
    write_text(&under(&spec.output, AGGREGATE_CSV)?, &aggregate_csv(&agg))?;
    write_text(&under(&spec.output, TABLES_TXT)?, &format_tables(&agg))?;
    write_json(&under(&spec.output, AGGREGATE_JSON)?, &agg)?;
    Ok(BatchReport {
        rows,
        aggregate: agg,
        output: spec.output.clone(),
    })
}

fn run_job(job: &Job<'_>, base: &SimConfig, spec: &BatchSpec) -> BatchRow {
    let config = SimConfig {
        planner: job.planner,
        ..base.clone()
    };
    let dir = spec
        .output
        .join(format!("map_{:03}", job.map))
        .join(job.planner.name())
        .join(run_dir_name(job.start_index));
    let result = run_single(&job.world.grid, &config, job.start, None, &dir)
        .and_then(|rec| write_record(&dir, &rec, &job.world.label, &config).map(|_| rec));
    let mut row = BatchRow {
        map: job.map,
        map_class: job.world.label.clone(),
        planner: job.planner,
        start_index: job.start_index,
        start: Some(job.start),
        auc: None,
        t90: None,
        t95: None,
        final_iou: None,
        error: None,
    };
    match result {
        Ok(rec) => {
            row.auc = Some(rec.summary.auc);
            row.t90 = rec.summary.t90;
            row.t95 = rec.summary.t95;
            row.final_iou = Some(rec.summary.final_iou);
        }
        Err(e) => {
            log::error!("map {} {} start {}: {e}", job.map, job.planner, job.start);
            row.error = Some(e.to_string());
        }
    }
    row
}

pub fn runs_csv(rows: &[BatchRow]) -> String {
    let mut s = String::from("map,map_class,planner,start_index,x,y,auc,t90,t95,final_iou,error\n");
    let opt_f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let (x, y) = r
            .start
            .map(|c| (c.x.to_string(), c.y.to_string()))
            .unwrap_or_default();
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let err = if err.is_empty() { err } else { format!("\"{err}\"") };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.map,
            r.map_class,
            r.planner,
            r.start_index,
            x,
            y,
            opt_f(r.auc),
            opt_u(r.t90),
            opt_u(r.t95),
            opt_f(r.final_iou),
            err
        );
    }
    s
}
