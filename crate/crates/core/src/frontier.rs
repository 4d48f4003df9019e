//! Frontier extraction: Free observed cells bordering Unknown space,
//! grouped into 8-connected clusters.

use serde::{Deserialize, Serialize};

use crate::gridmap::{Cell, CellState, ObservedGrid, Pose};

pub const DEFAULT_MIN_CLUSTER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Position in the extraction order of the current snapshot.
    pub id: usize,
    /// Member cells in row-major order.
    pub cells: Vec<Cell>,
    pub representative: Pose,
}

/// A Free cell with at least one Unknown 8-neighbor.
pub fn is_frontier_cell(observed: &ObservedGrid, cell: Cell) -> bool {
    observed.state(cell) == CellState::Free
        && cell
            .neighbors8()
            .any(|n| observed.geometry().contains(n) && observed.state(n) == CellState::Unknown)
}

/// Frontier clusters of at least `min_cluster` cells, in row-major order of
/// their first cell.
pub fn extract_frontiers(observed: &ObservedGrid, min_cluster: usize) -> Vec<Frontier> {
    let g = *observed.geometry();
    let mut is_frontier = vec![false; g.len()];
    for (i, flag) in is_frontier.iter_mut().enumerate() {
        if observed.state_at(i) == CellState::Free {
            *flag = is_frontier_cell(observed, g.cell(i));
        }
    }
    let mut visited = vec![false; g.len()];
    let mut frontiers = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g.len() {
        if !is_frontier[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            for n in g.cell(i).neighbors8() {
                if let Ok(j) = g.checked_index(n) {
                    if is_frontier[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if members.len() < min_cluster.max(1) {
            continue;
        }
        members.sort_unstable();
        let cells: Vec<Cell> = members.iter().map(|&i| g.cell(i)).collect();
        let representative = centroid_member(&cells);
        frontiers.push(Frontier {
            id: frontiers.len(),
            cells,
            representative,
        });
    }
    frontiers
}

/// The member nearest the centroid; `cells` is row-major sorted, so the
/// first minimum is the lowest row-major index.
fn centroid_member(cells: &[Cell]) -> Cell {
    let n = cells.len() as f64;
    let cx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
    let cy = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
    let mut best = cells[0];
    let mut best_d = f64::INFINITY;
    for &c in cells {
        let d = (c.x as f64 - cx).powi(2) + (c.y as f64 - cy).powi(2);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}
