//! Waypoint selection: the pathwise planner and the baselines it is compared
//! against, behind one entry point.
//!
//! Every planner plans an A* path to each frontier's representative cell and
//! skips the unreachable ones. Frontiers are scored independently on the
//! current rayon pool, then reduced to the highest score with ties going to
//! the lowest frontier id.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::Frontier;
use crate::geometry::{
    path_visibility_mask, path_visibility_mask_oracle, point_visibility_mask, MapView, MaskParams, PathMaskOptions,
    VisibilityMask,
};
use crate::gridmap::{CellState, ObservedGrid, Pose};
use crate::pathing::{astar, reachable, sample_path, GridPath};
use crate::predictor::PredictionEnsemble;

pub const DEFAULT_EPSILON: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Uncertainty covered along the whole path, per unit path length.
    Pipe,
    /// Closest frontier by straight-line distance.
    Nearest,
    /// Unknown cells visible from the frontier on the observed map.
    Nbv2d,
    /// Unknown cells visible along the path on the observed map.
    PwNbv2d,
    /// Uncertainty at the path poses themselves.
    Upen,
    /// Uncertainty visible from the frontier on the predicted map.
    Mapex,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 6] = [
        PlannerKind::Pipe,
        PlannerKind::Nearest,
        PlannerKind::Nbv2d,
        PlannerKind::PwNbv2d,
        PlannerKind::Upen,
        PlannerKind::Mapex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Pipe => "pipe",
            PlannerKind::Nearest => "nearest",
            PlannerKind::Nbv2d => "nbv2d",
            PlannerKind::PwNbv2d => "pw_nbv2d",
            PlannerKind::Upen => "upen",
            PlannerKind::Mapex => "mapex",
        }
    }

    pub fn uses_prediction(self) -> bool {
        matches!(self, PlannerKind::Pipe | PlannerKind::Upen | PlannerKind::Mapex)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown planner {s:?}; expected one of pipe, nearest, nbv2d, pw_nbv2d, upen, mapex"
                ))
            })
    }
}

/// How path masks are built. Both produce the same cells up to the
/// equivalence tolerance; they differ only in cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRoute {
    /// Merge the sampled polygons, subtract holes, rasterize once.
    #[default]
    Union,
    /// Rasterize every sampled polygon and OR the masks.
    PerPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub mask: MaskParams,
    /// Probabilistic raycast threshold.
    pub epsilon: f64,
    pub route: MaskRoute,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            mask: MaskParams::default(),
            epsilon: DEFAULT_EPSILON,
            route: MaskRoute::Union,
        }
    }
}

/// Everything a planner sees, taken from one simulation step.
#[derive(Debug, Clone, Copy)]
pub struct PlannerInput<'a> {
    pub pose: Pose,
    pub observed: &'a ObservedGrid,
    pub ensemble: Option<&'a PredictionEnsemble>,
    pub frontiers: &'a [Frontier],
    pub params: PlannerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierScore {
    pub frontier_id: usize,
    /// Summed variance or unknown-cell count, depending on the planner.
    pub info_gain: f64,
    /// Path length or straight-line distance.
    pub normalizer: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub frontier_id: usize,
    pub path: GridPath,
    /// One entry per reachable, scorable frontier, in frontier order.
    pub scores: Vec<FrontierScore>,
}

/// Picks the next frontier. `None` when no frontier is reachable.
pub fn select(kind: PlannerKind, input: &PlannerInput<'_>) -> Result<Option<Selection>> {
    select_with(kind, input, true)
}

/// Sequential twin of [`select`].
pub fn select_sequential(kind: PlannerKind, input: &PlannerInput<'_>) -> Result<Option<Selection>> {
    select_with(kind, input, false)
}

fn select_with(kind: PlannerKind, input: &PlannerInput<'_>, parallel: bool) -> Result<Option<Selection>> {
    check_input(kind, input)?;
    // One flood fill settles reachability; a failed A* would otherwise sweep
    // the whole component once per unreachable frontier.
    let reach = reachable(input.pose, input.observed)?;
    let g = input.observed.geometry();
    let candidates: Vec<&Frontier> = input
        .frontiers
        .iter()
        .filter(|f| reach[g.index(f.representative)])
        .collect();
    if kind == PlannerKind::Nearest {
        return nearest(input, &candidates);
    }
    let eval = |f: &&Frontier| score_frontier(kind, input, f);
    let scored: Vec<Option<(FrontierScore, GridPath)>> = if parallel {
        candidates.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        candidates.iter().map(eval).collect::<Result<_>>()?
    };
    Ok(reduce(scored))
}

/// Only the winner's path is needed, so only one A* runs.
fn nearest(input: &PlannerInput<'_>, candidates: &[&Frontier]) -> Result<Option<Selection>> {
    let scores: Vec<FrontierScore> = candidates
        .iter()
        .map(|f| {
            let d = input.pose.euclidean(f.representative);
            FrontierScore {
                frontier_id: f.id,
                info_gain: 0.0,
                normalizer: d,
                score: -d,
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s.score > b.1) {
            best = Some((k, s.score));
        }
    }
    let Some((k, _)) = best else {
        return Ok(None);
    };
    let path = astar(input.pose, candidates[k].representative, input.observed)?
        .expect("flood fill and A* share move rules");
    Ok(Some(Selection {
        frontier_id: scores[k].frontier_id,
        path,
        scores,
    }))
}

fn check_input(kind: PlannerKind, input: &PlannerInput<'_>) -> Result<()> {
    if kind.uses_prediction() {
        let ens = input.ensemble.ok_or_else(|| {
            Error::InvalidParameter(format!("planner {kind} needs a prediction ensemble"))
        })?;
        input.observed.geometry().ensure_same_shape(ens.fused().geometry())?;
    }
    if !input.observed.is_free(input.pose) {
        return Err(Error::InvalidParameter(format!(
            "planning pose {} is not observed free",
            input.pose
        )));
    }
    Ok(())
}

fn reduce(scored: Vec<Option<(FrontierScore, GridPath)>>) -> Option<Selection> {
    let mut best: Option<(usize, f64, GridPath)> = None;
    let mut scores = Vec::new();
    for (s, path) in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| s.score > b.1) {
            best = Some((s.frontier_id, s.score, path));
        }
        scores.push(s);
    }
    best.map(|(frontier_id, _, path)| Selection {
        frontier_id,
        path,
        scores,
    })
}

/// Score of one frontier, with the path to it. `None` when the frontier is
/// unreachable, or sits under the robot with nothing to gain.
pub fn score_frontier(
    kind: PlannerKind,
    input: &PlannerInput<'_>,
    frontier: &Frontier,
) -> Result<Option<(FrontierScore, GridPath)>> {
    let Some(path) = astar(input.pose, frontier.representative, input.observed)? else {
        return Ok(None);
    };
    let euclid = input.pose.euclidean(frontier.representative);
    let (info_gain, normalizer) = match kind {
        PlannerKind::Nearest => {
            let s = FrontierScore {
                frontier_id: frontier.id,
                info_gain: 0.0,
                normalizer: euclid,
                score: -euclid,
            };
            return Ok(Some((s, path)));
        }
        PlannerKind::Pipe => {
            let ens = input.ensemble.expect("checked");
            let mask = path_mask(input, &path, predicted_view(input))?;
            (mask.sum_over(ens.uncertainty().values()), path.length)
        }
        PlannerKind::PwNbv2d => {
            let mask = path_mask(input, &path, MapView::Observed(input.observed))?;
            (unknown_count(&mask, input.observed) as f64, path.length)
        }
        PlannerKind::Nbv2d => {
            let mask = point_mask(input, frontier.representative, MapView::Observed(input.observed))?;
            (unknown_count(&mask, input.observed) as f64, euclid)
        }
        PlannerKind::Mapex => {
            let ens = input.ensemble.expect("checked");
            let mask = point_mask(input, frontier.representative, predicted_view(input))?;
            (mask.sum_over(ens.uncertainty().values()), euclid)
        }
        PlannerKind::Upen => {
            let u = input.ensemble.expect("checked").uncertainty();
            let gain = sample_path(&path, input.params.mask.stride)?
                .into_iter()
                .map(|p| u.at(p))
                .sum();
            (gain, path.length)
        }
    };
    let score = if normalizer > 0.0 {
        info_gain / normalizer
    } else if info_gain > 0.0 {
        f64::INFINITY
    } else {
        return Ok(None);
    };
    Ok(Some((
        FrontierScore {
            frontier_id: frontier.id,
            info_gain,
            normalizer,
            score,
        },
        path,
    )))
}

fn predicted_view<'a>(input: &PlannerInput<'a>) -> MapView<'a> {
    MapView::Predicted {
        grid: input.ensemble.expect("checked").fused(),
        epsilon: input.params.epsilon,
    }
}

fn path_mask(input: &PlannerInput<'_>, path: &GridPath, view: MapView<'_>) -> Result<VisibilityMask> {
    match input.params.route {
        MaskRoute::Union => {
            path_visibility_mask(&path.poses, view, &input.params.mask, PathMaskOptions::default())
        }
        MaskRoute::PerPose => path_visibility_mask_oracle(&path.poses, view, &input.params.mask),
    }
}

fn point_mask(input: &PlannerInput<'_>, pose: Pose, view: MapView<'_>) -> Result<VisibilityMask> {
    point_visibility_mask(pose, view, input.params.mask.range, input.params.mask.samples)
}

fn unknown_count(mask: &VisibilityMask, observed: &ObservedGrid) -> usize {
    mask.indices()
        .filter(|&i| observed.state_at(i) == CellState::Unknown)
        .count()
}
