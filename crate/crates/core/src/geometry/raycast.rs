//! Supercover ray traversal and the three raycast flavours: ground truth,
//! observed map, and probabilistic accumulation over a predicted map.
//!
//! Rays start at the origin cell center and are measured in cells. Ray `i`
//! of `l` points at angle `i·2π/l`. A ray that passes exactly through a grid
//! corner touches both side cells (x-side first) before the diagonal one, so
//! it cannot slip between two diagonally adjacent walls.

use crate::error::{Error, Result};
use crate::gridmap::{Cell, CellState, GridGeometry, GroundTruthGrid, ObservedGrid, Pose, PredictedGrid};

use super::Point;

pub const MIN_SAMPLES: usize = 8;

/// Two boundary crossings closer than this are the same corner.
const CORNER_TOLERANCE: f64 = 1e-9;

/// Cells one ray traversed, origin excluded. When `hit` is set the last cell
/// is the obstacle that stopped it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayTrace {
    pub cells: Vec<Cell>,
    pub hit: bool,
}

/// Where and why a single ray stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayStop {
    /// Distance from the origin center to the vertex.
    pub distance: f64,
    /// The cell that stopped the ray, if any (range-limited rays have none).
    pub cell: Option<Cell>,
    /// Whether the ray was stopped by the medium rather than by range.
    pub blocked: bool,
}

/// Ray endpoints from one pose, in increasing angle order.
#[derive(Debug, Clone, PartialEq)]
pub struct RayFan {
    pub origin: Pose,
    pub range: f64,
    pub vertices: Vec<Point>,
    pub stops: Vec<RayStop>,
}

impl RayFan {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.stops.iter().map(|s| s.distance)
    }
}

/// Unit direction of ray `i` out of `samples`, exact on the axes.
pub fn ray_direction(i: usize, samples: usize) -> Point {
    if (4 * i) % samples == 0 {
        return match (4 * i) / samples {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            2 => [-1.0, 0.0],
            _ => [0.0, -1.0],
        };
    }
    let angle = i as f64 * std::f64::consts::TAU / samples as f64;
    [angle.cos(), angle.sin()]
}

/// Walks the supercover of a ray from the center of `origin`.
///
/// `stop` is called for every cell the ray enters (never the origin) and
/// returns `true` to terminate the ray in that cell. Cells outside the grid
/// terminate the ray at their boundary with no stop cell.
pub fn trace_ray(
    origin: Cell,
    dir: Point,
    range: f64,
    geometry: &GridGeometry,
    mut stop: impl FnMut(Cell) -> bool,
) -> RayStop {
    let [dx, dy] = dir;
    let step_x = if dx > 0.0 { 1 } else if dx < 0.0 { -1 } else { 0 };
    let step_y = if dy > 0.0 { 1 } else if dy < 0.0 { -1 } else { 0 };
    let delta_x = if step_x != 0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let delta_y = if step_y != 0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = 0.5 * delta_x;
    let mut t_max_y = 0.5 * delta_y;
    let (mut cx, mut cy) = (origin.x, origin.y);
    let o = origin.center();

    let vertex_in = |c: Cell, t_in: f64, t_out: f64| -> f64 {
        let proj = (c.x as f64 - o[0]) * dx + (c.y as f64 - o[1]) * dy;
        proj.clamp(t_in, t_out.min(range).max(t_in))
    };

    loop {
        let corner = (t_max_x - t_max_y).abs() <= CORNER_TOLERANCE;
        let t_in = t_max_x.min(t_max_y);
        if t_in > range {
            return RayStop {
                distance: range,
                cell: None,
                blocked: false,
            };
        }
        if corner {
            for side in [Cell::new(cx + step_x, cy), Cell::new(cx, cy + step_y)] {
                if !geometry.contains(side) {
                    return RayStop {
                        distance: t_in,
                        cell: None,
                        blocked: true,
                    };
                }
                if stop(side) {
                    return RayStop {
                        distance: t_in,
                        cell: Some(side),
                        blocked: true,
                    };
                }
            }
            cx += step_x;
            cy += step_y;
            t_max_x += delta_x;
            t_max_y += delta_y;
        } else if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += delta_x;
        } else {
            cy += step_y;
            t_max_y += delta_y;
        }
        let cell = Cell::new(cx, cy);
        if !geometry.contains(cell) {
            return RayStop {
                distance: t_in.min(range),
                cell: None,
                blocked: true,
            };
        }
        if stop(cell) {
            let t_out = t_max_x.min(t_max_y);
            return RayStop {
                distance: vertex_in(cell, t_in, t_out),
                cell: Some(cell),
                blocked: true,
            };
        }
    }
}

fn validate(origin: Cell, range: f64, samples: usize, geometry: &GridGeometry) -> Result<()> {
    geometry.checked_index(origin)?;
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidParameter(format!("range must be positive, got {range}")));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} rays, got {samples}"
        )));
    }
    Ok(())
}

/// Casts `samples` rays, building a fresh stop predicate per ray.
pub fn cast_fan<F, S>(
    origin: Pose,
    range: f64,
    samples: usize,
    geometry: &GridGeometry,
    mut per_ray: F,
) -> RayFan
where
    F: FnMut(usize) -> S,
    S: FnMut(Cell) -> bool,
{
    let o = origin.center();
    let mut vertices = Vec::with_capacity(samples);
    let mut stops = Vec::with_capacity(samples);
    for i in 0..samples {
        let dir = ray_direction(i, samples);
        let stop = trace_ray(origin, dir, range, geometry, per_ray(i));
        vertices.push([o[0] + dir[0] * stop.distance, o[1] + dir[1] * stop.distance]);
        stops.push(stop);
    }
    RayFan {
        origin,
        range,
        vertices,
        stops,
    }
}

/// Noise-free LiDAR: rays stop on the first occupied cell.
pub fn raycast_ground_truth(
    pose: Pose,
    range: f64,
    world: &GroundTruthGrid,
    samples: usize,
) -> Result<(RayFan, Vec<RayTrace>)> {
    validate(pose, range, samples, world.geometry())?;
    if world.is_occupied(pose) {
        return Err(Error::PoseInWall(pose));
    }
    let o = pose.center();
    let mut vertices = Vec::with_capacity(samples);
    let mut stops = Vec::with_capacity(samples);
    let mut traces = Vec::with_capacity(samples);
    for i in 0..samples {
        let dir = ray_direction(i, samples);
        let mut cells = Vec::new();
        let stop = trace_ray(pose, dir, range, world.geometry(), |c| {
            cells.push(c);
            world.is_occupied(c)
        });
        vertices.push([o[0] + dir[0] * stop.distance, o[1] + dir[1] * stop.distance]);
        traces.push(RayTrace {
            cells,
            hit: stop.cell.is_some(),
        });
        stops.push(stop);
    }
    let fan = RayFan {
        origin: pose,
        range,
        vertices,
        stops,
    };
    Ok((fan, traces))
}

/// Raycast over the robot's own map: unknown cells are transparent, only
/// observed obstacles stop a ray.
pub fn raycast_observed(
    pose: Pose,
    range: f64,
    observed: &ObservedGrid,
    samples: usize,
) -> Result<RayFan> {
    validate(pose, range, samples, observed.geometry())?;
    Ok(cast_fan(pose, range, samples, observed.geometry(), |_| {
        |c: Cell| observed.state(c) == CellState::Occupied
    }))
}

/// Probabilistic raycast: each ray sums the occupancy probability of every
/// cell it enters and stops once the sum reaches `epsilon`.
pub fn raycast_probabilistic(
    pose: Pose,
    range: f64,
    predicted: &PredictedGrid,
    epsilon: f64,
    samples: usize,
) -> Result<RayFan> {
    validate(pose, range, samples, predicted.geometry())?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(cast_fan(pose, range, samples, predicted.geometry(), |_| {
        let mut accumulated = 0.0;
        move |c: Cell| {
            accumulated += predicted.probability(c);
            accumulated >= epsilon
        }
    }))
}
