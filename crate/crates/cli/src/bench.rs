//! `pipe bench`: path-mask construction and waypoint-selection timings.

use std::time::Instant;

use pipe_core::frontier::extract_frontiers;
use pipe_core::geometry::{
    path_visibility_mask, path_visibility_mask_flood_fill, path_visibility_mask_oracle, MapView, MaskParams,
    PathMaskOptions,
};
use pipe_core::gridmap::{Cell, GroundTruthGrid, ObservedGrid, PredictedGrid};
use pipe_core::ingestion::{generate_floorplan, rasterize_floorplan, MapClass};
use pipe_core::pathing::astar;
use pipe_core::planners::{select, MaskRoute, PlannerInput, PlannerKind, PlannerParams};
use pipe_core::predictor::{Predictor, PredictorConfig};
use pipe_core::simulator::{SimConfig, Simulation};
use serde::Serialize;

use crate::{worker_pool, CliError, CliResult};

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub class: MapClass,
    pub seed: u64,
    pub resolution: Option<f64>,
    pub path_len: usize,
    pub reps: usize,
    pub workers: usize,
    pub mask: MaskParams,
    pub epsilon: f64,
    /// Nearest-frontier steps taken before timing selection, to get a
    /// partially explored map with several frontiers.
    pub warmup_steps: usize,
    pub ensemble_size: usize,
    /// Skip the selection timings.
    pub masks_only: bool,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            class: MapClass::Large,
            seed: 1,
            resolution: None,
            path_len: 200,
            reps: 3,
            workers: 8,
            mask: MaskParams::default(),
            epsilon: 0.8,
            warmup_steps: 300,
            ensemble_size: 3,
            masks_only: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionTiming {
    pub frontiers: usize,
    pub workers: usize,
    pub one_worker_ms: f64,
    pub n_workers_ms: f64,
    /// `1 - n_workers / one_worker`.
    pub reduction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub path_len: usize,
    pub reps: usize,
    pub flood_fill_ms: f64,
    pub scanline_ms: f64,
    pub union_ms: f64,
    /// flood fill / union.
    pub speedup_vs_flood_fill: f64,
    /// scanline per-pose / union.
    pub speedup_vs_scanline: f64,
    pub selection: Option<SelectionTiming>,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "map {}x{}, path {} poses, median of {}\n\
             per-pose flood fill  {:>10.1} ms\n\
             per-pose scanline    {:>10.1} ms\n\
             union                {:>10.1} ms\n\
             speedup vs flood fill {:.2}x, vs scanline {:.2}x\n",
            self.width,
            self.height,
            self.path_len,
            self.reps,
            self.flood_fill_ms,
            self.scanline_ms,
            self.union_ms,
            self.speedup_vs_flood_fill,
            self.speedup_vs_scanline
        );
        if let Some(sel) = &self.selection {
            s.push_str(&format!(
                "selection over {} frontiers: 1 worker {:.1} ms, {} workers {:.1} ms, reduction {:.1}%\n",
                sel.frontiers,
                sel.one_worker_ms,
                sel.workers,
                sel.n_workers_ms,
                100.0 * sel.reduction
            ));
        }
        s
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let t = Instant::now();
    let out = f();
    (t.elapsed().as_secs_f64() * 1e3, out)
}

/// A shortest path of exactly `len` poses from near the map center.
pub fn bench_path(world: &GroundTruthGrid, len: usize) -> CliResult<Vec<Cell>> {
    let observed = ObservedGrid::fully_observed(world);
    let g = world.geometry();
    let center = Cell::new(g.width as i32 / 2, g.height as i32 / 2);
    let start = world
        .free_cells()
        .min_by_key(|c| ((c.x - center.x).pow(2) + (c.y - center.y).pow(2), c.y, c.x))
        .ok_or_else(|| CliError::Usage("world has no free cell".into()))?;
    if len <= 1 {
        return Ok(vec![start]);
    }
    let want = len as f64 * 1.2;
    let mut goals: Vec<Cell> = world.free_cells().collect();
    goals.sort_by(|a, b| {
        (a.euclidean(start) - want)
            .abs()
            .total_cmp(&(b.euclidean(start) - want).abs())
            .then((a.y, a.x).cmp(&(b.y, b.x)))
    });
    for goal in goals.into_iter().take(200) {
        if let Some(p) = astar(start, goal, &observed).map_err(CliError::run)? {
            if p.len() >= len {
                return Ok(p.poses[..len].to_vec());
            }
        }
    }
    Err(CliError::Run(format!("no path of {len} poses from {start}")))
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<BenchReport> {
    if args.reps == 0 || args.path_len == 0 {
        return Err(CliError::Usage("reps and path length must be at least 1".into()));
    }
    let mut spec = generate_floorplan(args.seed, args.class).map_err(CliError::run)?;
    if let Some(r) = args.resolution {
        spec.resolution = r;
    }
    let world = rasterize_floorplan(&spec).map_err(CliError::usage)?;
    let g = *world.geometry();
    let path = bench_path(&world, args.path_len)?;
    let truth = PredictedGrid::from_observed(&ObservedGrid::fully_observed(&world), 0.5);
    let view = MapView::Predicted {
        grid: &truth,
        epsilon: args.epsilon,
    };
    log::info!("timing masks on {}x{} with {} poses", g.width, g.height, path.len());

    let (mut flood, mut scan, mut union) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..args.reps {
        let (ms, r) = time_ms(|| path_visibility_mask_flood_fill(&path, view, &args.mask));
        r.map_err(CliError::run)?;
        flood.push(ms);
        let (ms, r) = time_ms(|| path_visibility_mask_oracle(&path, view, &args.mask));
        r.map_err(CliError::run)?;
        scan.push(ms);
        let (ms, r) = time_ms(|| path_visibility_mask(&path, view, &args.mask, PathMaskOptions::default()));
        r.map_err(CliError::run)?;
        union.push(ms);
    }
    let (flood_fill_ms, scanline_ms, union_ms) = (median(flood), median(scan), median(union));
    let selection = if args.masks_only {
        None
    } else {
        Some(bench_selection(&world, &path, args)?)
    };
    Ok(BenchReport {
        width: g.width,
        height: g.height,
        path_len: path.len(),
        reps: args.reps,
        flood_fill_ms,
        scanline_ms,
        union_ms,
        speedup_vs_flood_fill: flood_fill_ms / union_ms,
        speedup_vs_scanline: scanline_ms / union_ms,
        selection,
    })
}

/// One PIPE selection on a partially explored map, timed inside a 1-thread
/// pool and an N-thread pool.
fn bench_selection(world: &GroundTruthGrid, path: &[Cell], args: &BenchArgs) -> CliResult<SelectionTiming> {
    let config = SimConfig {
        planner: PlannerKind::Nearest,
        range: args.mask.range,
        samples: args.mask.samples,
        budget: args.warmup_steps,
        eval_every: args.warmup_steps.max(1),
        ..SimConfig::default()
    };
    let mut sim = Simulation::new(world, config, path[0]).map_err(CliError::run)?;
    while !sim.is_done() {
        sim.step().map_err(CliError::run)?;
    }
    let observed = sim.observed().clone();
    let pose = sim.pose();
    let frontiers = extract_frontiers(&observed, pipe_core::frontier::DEFAULT_MIN_CLUSTER);
    let ensemble = Predictor::new(PredictorConfig::default())
        .and_then(|p| p.predict(&observed, args.ensemble_size, args.seed))
        .map_err(CliError::run)?;
    let input = PlannerInput {
        pose,
        observed: &observed,
        ensemble: Some(&ensemble),
        frontiers: &frontiers,
        params: PlannerParams {
            mask: args.mask,
            epsilon: args.epsilon,
            route: MaskRoute::Union,
        },
    };
    let one = worker_pool(1)?;
    let many = worker_pool(args.workers)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut picks = Vec::new();
    for _ in 0..args.reps {
        let (ms, r) = time_ms(|| one.install(|| select(PlannerKind::Pipe, &input)));
        picks.push(r.map_err(CliError::run)?.map(|s| s.frontier_id));
        a.push(ms);
        let (ms, r) = time_ms(|| many.install(|| select(PlannerKind::Pipe, &input)));
        picks.push(r.map_err(CliError::run)?.map(|s| s.frontier_id));
        b.push(ms);
    }
    if picks.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Run("selection differs between worker counts".into()));
    }
    let (one_worker_ms, n_workers_ms) = (median(a), median(b));
    Ok(SelectionTiming {
        frontiers: frontiers.len(),
        workers: args.workers,
        one_worker_ms,
        n_workers_ms,
        reduction: 1.0 - n_workers_ms / one_worker_ms,
    })
}
