//! A* on the 8-connected observed-free grid and path sampling.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{Cell, GridGeometry, ObservedGrid, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub poses: Vec<Pose>,
    /// Octile length: 1 per cardinal step, sqrt(2) per diagonal step.
    pub length: f64,
}

impl GridPath {
    pub fn from_poses(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyPath);
        }
        let (mut card, mut diag) = (0u64, 0u64);
        for w in poses.windows(2) {
            if !w[0].is_8_neighbor(w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "path poses {} and {} are not 8-neighbors",
                    w[0], w[1]
                )));
            }
            if w[0].x != w[1].x && w[0].y != w[1].y {
                diag += 1;
            } else {
                card += 1;
            }
        }
        Ok(Self {
            poses,
            length: octile_cost(card, diag),
        })
    }

    pub fn start(&self) -> Pose {
        self.poses[0]
    }

    pub fn goal(&self) -> Pose {
        *self.poses.last().expect("non-empty path")
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

#[inline]
fn octile_cost(card: u64, diag: u64) -> f64 {
    card as f64 + diag as f64 * SQRT_2
}

/// Admissible and consistent heuristic for 8-connected unit/sqrt(2) moves.
#[inline]
pub fn octile_distance(a: Cell, b: Cell) -> f64 {
    let dx = (a.x - b.x).unsigned_abs() as u64;
    let dy = (a.y - b.y).unsigned_abs() as u64;
    octile_cost(dx.max(dy) - dx.min(dy), dx.min(dy))
}

/// The eight moves in a fixed order.
pub(crate) const MOVES: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Whether a single move from `from` by `(dx, dy)` is legal on the observed
/// grid: target Free, and for diagonals both orthogonal corners Free.
#[inline]
pub fn move_allowed(observed: &ObservedGrid, from: Cell, dx: i32, dy: i32) -> bool {
    let to = Cell::new(from.x + dx, from.y + dy);
    if !observed.is_free(to) {
        return false;
    }
    dx == 0
        || dy == 0
        || (observed.is_free(Cell::new(from.x + dx, from.y))
            && observed.is_free(Cell::new(from.x, from.y + dy)))
}

#[derive(Clone, Copy)]
struct Node {
    f: f64,
    h: f64,
    idx: u32,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the smallest (f, h, idx).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Per-thread scratch buffers so repeated searches on large grids do not
/// reallocate. Entries are valid only when their stamp matches `epoch`.
#[derive(Default)]
struct Workspace {
    epoch: u32,
    stamp: Vec<u32>,
    closed: Vec<bool>,
    card: Vec<u32>,
    diag: Vec<u32>,
    parent: Vec<u32>,
    heap: BinaryHeap<Node>,
}

impl Workspace {
    fn reset(&mut self, len: usize) {
        if self.stamp.len() != len || self.epoch == u32::MAX {
            self.stamp = vec![0; len];
            self.closed = vec![false; len];
            self.card = vec![0; len];
            self.diag = vec![0; len];
            self.parent = vec![0; len];
            self.epoch = 0;
        }
        self.epoch += 1;
        self.heap.clear();
    }

    #[inline]
    fn seen(&self, i: usize) -> bool {
        self.stamp[i] == self.epoch
    }
}

thread_local! {
    static WORKSPACE: RefCell<Workspace> = RefCell::new(Workspace::default());
}

/// Cost-optimal path from `start` to `goal` through observed-Free cells.
/// Returns `Ok(None)` when the goal is unreachable.
pub fn astar(start: Pose, goal: Pose, observed: &ObservedGrid) -> Result<Option<GridPath>> {
    let geometry = *observed.geometry();
    geometry.checked_index(start)?;
    geometry.checked_index(goal)?;
    if !observed.is_free(start) {
        return Err(Error::InvalidParameter(format!(
            "path start {start} is not observed Free"
        )));
    }
    if start == goal {
        return Ok(Some(GridPath {
            poses: vec![start],
            length: 0.0,
        }));
    }
    if !observed.is_free(goal) {
        return Ok(None);
    }
    WORKSPACE.with(|ws| search(&mut ws.borrow_mut(), start, goal, observed, &geometry))
}

fn search(
    ws: &mut Workspace,
    start: Pose,
    goal: Pose,
    observed: &ObservedGrid,
    geometry: &GridGeometry,
) -> Result<Option<GridPath>> {
    ws.reset(geometry.len());
    let s = geometry.index(start);
    let g_idx = geometry.index(goal);
    ws.stamp[s] = ws.epoch;
    ws.closed[s] = false;
    ws.card[s] = 0;
    ws.diag[s] = 0;
    ws.parent[s] = s as u32;
    let h0 = octile_distance(start, goal);
    ws.heap.push(Node {
        f: h0,
        h: h0,
        idx: s as u32,
    });

    while let Some(node) = ws.heap.pop() {
        let i = node.idx as usize;
        if ws.closed[i] {
            continue;
        }
        ws.closed[i] = true;
        if i == g_idx {
            return Ok(Some(reconstruct(ws, s, g_idx, geometry)));
        }
        let cell = geometry.cell(i);
        let (card, diag) = (ws.card[i], ws.diag[i]);
        for &(dx, dy) in &MOVES {
            if !move_allowed(observed, cell, dx, dy) {
                continue;
            }
            let next = Cell::new(cell.x + dx, cell.y + dy);
            let j = geometry.index(next);
            let (nc, nd) = if dx != 0 && dy != 0 {
                (card, diag + 1)
            } else {
                (card + 1, diag)
            };
            let g_new = octile_cost(nc as u64, nd as u64);
            if ws.seen(j) {
                if ws.closed[j] {
                    continue;
                }
                let g_old = octile_cost(ws.card[j] as u64, ws.diag[j] as u64);
                if g_new >= g_old {
                    continue;
                }
            } else {
                ws.stamp[j] = ws.epoch;
                ws.closed[j] = false;
            }
            ws.card[j] = nc;
            ws.diag[j] = nd;
            ws.parent[j] = i as u32;
            let h = octile_distance(next, goal);
            ws.heap.push(Node {
                f: g_new + h,
                h,
                idx: j as u32,
            });
        }
    }
    Ok(None)
}

fn reconstruct(ws: &Workspace, s: usize, goal: usize, geometry: &GridGeometry) -> GridPath {
    let mut idx = vec![goal];
    let mut cur = goal;
    while cur != s {
        cur = ws.parent[cur] as usize;
        idx.push(cur);
    }
    idx.reverse();
    GridPath {
        poses: idx.into_iter().map(|i| geometry.cell(i)).collect(),
        length: octile_cost(ws.card[goal] as u64, ws.diag[goal] as u64),
    }
}

/// Cells reachable from `start` under the same move rules as [`astar`].
pub fn reachable(start: Pose, observed: &ObservedGrid) -> Result<Vec<bool>> {
    let geometry = *observed.geometry();
    let s = geometry.checked_index(start)?;
    if !observed.is_free(start) {
        return Err(Error::InvalidParameter(format!(
            "path start {start} is not observed Free"
        )));
    }
    let mut seen = vec![false; geometry.len()];
    seen[s] = true;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(i) = queue.pop_front() {
        let cell = geometry.cell(i);
        for &(dx, dy) in &MOVES {
            if move_allowed(observed, cell, dx, dy) {
                let j = geometry.index(Cell::new(cell.x + dx, cell.y + dy));
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(seen)
}

/// Indices `0, stride, 2*stride, ...` plus the last index exactly once.
pub fn sample_indices(len: usize, stride: usize) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::EmptyPath);
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let mut out: Vec<usize> = (0..len).step_by(stride).collect();
    if *out.last().unwrap() != len - 1 {
        out.push(len - 1);
    }
    Ok(out)
}

pub fn sample_poses(poses: &[Pose], stride: usize) -> Result<Vec<Pose>> {
    Ok(sample_indices(poses.len(), stride)?
        .into_iter()
        .map(|i| poses[i])
        .collect())
}

pub fn sample_path(path: &GridPath, stride: usize) -> Result<Vec<Pose>> {
    sample_poses(&path.poses, stride)
}
