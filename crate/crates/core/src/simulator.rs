//! The closed sense, predict, select, act loop over a ground-truth world.
//!
//! Each step scans from the current pose, replans when the current goal is
//! no longer worth pursuing, and moves one 8-connected cell along the
//! committed path. IoU of a fresh prediction against the world is sampled
//! every `eval_every` steps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::{extract_frontiers, is_frontier_cell, DEFAULT_MIN_CLUSTER};
use crate::geometry::{raycast_ground_truth, MaskParams, VisibilityMask};
use crate::gridmap::{Cell, CellState, GroundTruthGrid, ObservedGrid, Pose};
use crate::metrics::{auc, buffered_iou, time_to_threshold, DEFAULT_IOU_BUFFER};
use crate::planners::{
    select, MaskRoute, PlannerInput, PlannerKind, PlannerParams, DEFAULT_EPSILON,
};
use crate::predictor::{PredictionEnsemble, Predictor, PredictorConfig, DEFAULT_ENSEMBLE_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Sensor range in cells.
    pub range: f64,
    /// Rays per scan.
    pub samples: usize,
    /// Path sampling stride for visibility masks.
    pub stride: usize,
    pub epsilon: f64,
    pub ensemble_size: usize,
    /// Step budget.
    pub budget: usize,
    pub seed: u64,
    pub planner: PlannerKind,
    pub predictor: PredictorConfig,
    pub eval_every: usize,
    pub min_cluster: usize,
    pub iou_buffer: usize,
    pub mask_route: MaskRoute,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            range: 200.0,
            samples: 360,
            stride: 1,
            epsilon: DEFAULT_EPSILON,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            budget: 2000,
            seed: 0,
            planner: PlannerKind::Pipe,
            predictor: PredictorConfig::default(),
            eval_every: 10,
            min_cluster: DEFAULT_MIN_CLUSTER,
            iou_buffer: DEFAULT_IOU_BUFFER,
            mask_route: MaskRoute::Union,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} ({self:?})")));
        if !(self.range > 0.0 && self.range.is_finite()) {
            return bad("range must be positive");
        }
        if self.samples < crate::geometry::MIN_SAMPLES {
            return bad("too few rays");
        }
        if self.stride == 0 || self.ensemble_size == 0 || self.eval_every == 0 {
            return bad("stride, ensemble size and eval_every must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn planner_params(&self) -> PlannerParams {
        PlannerParams {
            mask: MaskParams {
                range: self.range,
                samples: self.samples,
                stride: self.stride,
            },
            epsilon: self.epsilon,
            route: self.mask_route,
        }
    }

    /// FNV-1a over the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a(json.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Named, indexed sub-seed of a root seed.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut z = root ^ fnv1a(label.as_bytes()) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    ExplorationComplete,
    Stall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Replan {
        frontier_id: usize,
        goal: Cell,
        path_length: f64,
        candidates: usize,
    },
    GoalReached { goal: Cell },
    GoalInvalidated { goal: Cell },
    PathBlocked { at: Cell },
    /// Frontiers exist but none is reachable.
    Stall { frontiers: usize },
    ExplorationComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// The state at time `t`, after the scan from `pose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub pose: Cell,
    pub known_fraction: f64,
    pub goal_id: Option<usize>,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc: f64,
    pub t90: Option<usize>,
    pub t95: Option<usize>,
    pub failed90: bool,
    pub failed95: bool,
    pub final_t: usize,
    pub final_iou: f64,
    pub replans: usize,
    pub termination: Termination,
}

/// Wall-clock measurements, kept apart from the reproducible record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: f64,
    /// (t, milliseconds) per replanning event.
    pub planning_ms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config_hash: String,
    pub seed: u64,
    pub planner: PlannerKind,
    pub start: Cell,
    pub series: Vec<(usize, f64)>,
    pub rows: Vec<StepRow>,
    pub events: Vec<Event>,
    pub summary: Summary,
    #[serde(skip)]
    pub timing: Timing,
}

impl ExperimentRecord {
    /// Everything except wall-clock timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            timing: Timing::default(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Goal {
    frontier_id: usize,
    cell: Cell,
    /// Poses still to visit, next move first.
    remaining: std::collections::VecDeque<Cell>,
}

/// A simulation in progress. [`Simulation::run`] drives it to the end;
/// [`Simulation::step`] exposes single steps for inspection.
#[derive(Debug)]
pub struct Simulation<'w> {
    world: &'w GroundTruthGrid,
    config: SimConfig,
    predictor: Predictor,
    start: Pose,
    t: usize,
    pose: Pose,
    observed: ObservedGrid,
    ensemble: Option<PredictionEnsemble>,
    goal: Option<Goal>,
    exhausted: Vec<bool>,
    truth_mask: VisibilityMask,
    rows: Vec<StepRow>,
    series: Vec<(usize, f64)>,
    events: Vec<Event>,
    timing: Timing,
    replans: usize,
    replanned_at: Option<usize>,
    done: Option<Termination>,
    created: Instant,
}

impl<'w> Simulation<'w> {
    pub fn new(world: &'w GroundTruthGrid, config: SimConfig, start: Pose) -> Result<Self> {
        Self::with_observed(world, config, start, ObservedGrid::unknown(*world.geometry()))
    }

    /// Starts from a prior observation, which must agree with the world.
    pub fn with_observed(
        world: &'w GroundTruthGrid,
        config: SimConfig,
        start: Pose,
        observed: ObservedGrid,
    ) -> Result<Self> {
        config.validate()?;
        let g = *world.geometry();
        g.ensure_same_shape(observed.geometry())?;
        g.checked_index(start)?;
        if world.is_occupied(start) {
            return Err(Error::PoseInWall(start));
        }
        for (i, s) in observed.states().iter().enumerate() {
            if *s != CellState::Unknown && *s != world.state(g.cell(i)) {
                return Err(Error::InvalidParameter(format!(
                    "prior observation disagrees with the world at {}",
                    g.cell(i)
                )));
            }
        }
        let predictor = Predictor::with_world(config.predictor.clone(), world)?;
        let truth_mask = VisibilityMask::from_cells(g, world.occupancy().to_vec())?;
        Ok(Self {
            world,
            predictor,
            start,
            t: 0,
            pose: start,
            observed,
            ensemble: None,
            goal: None,
            exhausted: vec![false; g.len()],
            truth_mask,
            rows: Vec::new(),
            series: Vec::new(),
            events: Vec::new(),
            timing: Timing::default(),
            replans: 0,
            replanned_at: None,
            done: None,
            created: Instant::now(),
            config,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn observed(&self) -> &ObservedGrid {
        &self.observed
    }

    pub fn ensemble(&self) -> Option<&PredictionEnsemble> {
        self.ensemble.as_ref()
    }

    /// Time of the most recent replanning, if any.
    pub fn replanned_at(&self) -> Option<usize> {
        self.replanned_at
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn termination(&self) -> Option<Termination> {
        self.done
    }

    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    /// One time step. A no-op once the run has terminated.
    pub fn step(&mut self) -> Result<()> {
        if self.done.is_some() {
            return Ok(());
        }
        if self.t >= self.config.budget {
            self.done = Some(Termination::Budget);
            return Ok(());
        }
        self.sense(true)?;
        if self.replan_needed() {
            let started = Instant::now();
            let outcome = self.replan();
            self.timing
                .planning_ms
                .push((self.t, started.elapsed().as_secs_f64() * 1e3));
            outcome?;
            if self.done.is_some() {
                return Ok(());
            }
        }
        if let Some(goal) = &mut self.goal {
            if let Some(next) = goal.remaining.pop_front() {
                debug_assert!(self.pose.is_8_neighbor(next));
                assert!(!self.world.is_occupied(next), "robot moved into a wall at {next}");
                self.pose = next;
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Runs to termination and returns the record.
    pub fn run(mut self) -> Result<ExperimentRecord> {
        while self.done.is_none() {
            self.step()?;
        }
        self.finish()
    }

    /// Closes the record at the current time, whether or not the run has
    /// terminated.
    pub fn finish(mut self) -> Result<ExperimentRecord> {
        // The last step moved without sensing; close the record with a scan
        // and an evaluation at the final time.
        if self.rows.last().map(|r| r.t) != Some(self.t) {
            self.sense(false)?;
        }
        if self.series.last().map(|s| s.0) != Some(self.t) {
            let iou = self.evaluate()?;
            self.series.push((self.t, iou));
            self.rows.last_mut().expect("row at final t").iou = Some(iou);
        }
        self.timing.wall_ms = self.created.elapsed().as_secs_f64() * 1e3;
        let horizon = self.config.budget;
        let t90 = time_to_threshold(&self.series, 0.90, horizon);
        let t95 = time_to_threshold(&self.series, 0.95, horizon);
        let summary = Summary {
            auc: auc(&self.series, horizon),
            t90,
            t95,
            failed90: t90.is_none(),
            failed95: t95.is_none(),
            final_t: self.t,
            final_iou: self.series.last().map(|s| s.1).unwrap_or(0.0),
            replans: self.replans,
            termination: self.done.unwrap_or(Termination::Budget),
        };
        Ok(ExperimentRecord {
            config_hash: format!("{:016x}", self.config.hash()),
            seed: self.config.seed,
            planner: self.config.planner,
            start: self.start,
            series: self.series,
            rows: self.rows,
            events: self.events,
            summary,
            timing: self.timing,
        })
    }

    fn sense(&mut self, may_evaluate: bool) -> Result<()> {
        let (_, traces) = raycast_ground_truth(self.pose, self.config.range, self.world, self.config.samples)?;
        self.observed.update_from_scan(self.pose, &traces)?;
        let iou = if may_evaluate && self.t % self.config.eval_every == 0 {
            let iou = self.evaluate()?;
            self.series.push((self.t, iou));
            Some(iou)
        } else {
            None
        };
        self.rows.push(StepRow {
            t: self.t,
            pose: self.pose,
            known_fraction: self.observed.known_fraction(),
            goal_id: None,
            iou,
        });
        Ok(())
    }

    /// Buffered IoU of a fresh prediction on the current observation.
    fn evaluate(&self) -> Result<f64> {
        let seed = derive_seed(self.config.seed, "evaluation", self.t as u64);
        let ens = self
            .predictor
            .predict(&self.observed, self.config.ensemble_size, seed)?;
        let predicted = VisibilityMask::from_cells(*self.world.geometry(), ens.fused().occupied_mask())?;
        buffered_iou(&predicted, &self.truth_mask, self.config.iou_buffer)
    }

    fn replan_needed(&mut self) -> bool {
        let Some(goal) = &self.goal else {
            return true;
        };
        let (cell, still_frontier) = (goal.cell, is_frontier_cell(&self.observed, goal.cell));
        if goal.remaining.is_empty() {
            self.events.push(Event {
                t: self.t,
                kind: EventKind::GoalReached { goal: cell },
            });
            if still_frontier {
                // Standing on it did not resolve it; never pick it again.
                let i = self.observed.geometry().index(cell);
                self.exhausted[i] = true;
            }
            return true;
        }
        if !still_frontier {
            self.events.push(Event {
                t: self.t,
                kind: EventKind::GoalInvalidated { goal: cell },
            });
            return true;
        }
        if let Some(&at) = goal.remaining.iter().find(|&&c| !self.observed.is_free(c)) {
            self.events.push(Event {
                t: self.t,
                kind: EventKind::PathBlocked { at },
            });
            return true;
        }
        false
    }

    fn replan(&mut self) -> Result<()> {
        self.goal = None;
        let g = *self.observed.geometry();
        let frontiers: Vec<_> = extract_frontiers(&self.observed, self.config.min_cluster)
            .into_iter()
            .filter(|f| !self.exhausted[g.index(f.representative)])
            .enumerate()
            .map(|(id, mut f)| {
                f.id = id;
                f
            })
            .collect();
        if frontiers.is_empty() {
            self.events.push(Event {
                t: self.t,
                kind: EventKind::ExplorationComplete,
            });
            self.done = Some(Termination::ExplorationComplete);
            return Ok(());
        }
        if self.config.planner.uses_prediction() {
            let seed = derive_seed(self.config.seed, "predictor", self.t as u64);
            self.ensemble = Some(self.predictor.predict(
                &self.observed,
                self.config.ensemble_size,
                seed,
            )?);
        }
        let input = PlannerInput {
            pose: self.pose,
            observed: &self.observed,
            ensemble: self.ensemble.as_ref(),
            frontiers: &frontiers,
            params: self.config.planner_params(),
        };
        self.replans += 1;
        self.replanned_at = Some(self.t);
        match select(self.config.planner, &input)? {
            None => {
                self.events.push(Event {
                    t: self.t,
                    kind: EventKind::Stall {
                        frontiers: frontiers.len(),
                    },
                });
                self.done = Some(Termination::Stall);
            }
            Some(sel) => {
                let cell = sel.path.goal();
                self.events.push(Event {
                    t: self.t,
                    kind: EventKind::Replan {
                        frontier_id: sel.frontier_id,
                        goal: cell,
                        path_length: sel.path.length,
                        candidates: sel.scores.len(),
                    },
                });
                self.goal = Some(Goal {
                    frontier_id: sel.frontier_id,
                    cell,
                    remaining: sel.path.poses.into_iter().skip(1).collect(),
                });
                if let Some(row) = self.rows.last_mut() {
                    row.goal_id = Some(sel.frontier_id);
                }
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: a full run from `start`.
pub fn run(world: &GroundTruthGrid, config: &SimConfig, start: Pose) -> Result<ExperimentRecord> {
    Simulation::new(world, config.clone(), start)?.run()
}
