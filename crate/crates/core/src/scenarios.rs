//! Seeded synthetic worlds and paths for equivalence checks, benchmarks and
//! tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gridmap::{Cell, CellState, GridGeometry, ObservedGrid, PredictedGrid};

/// Square map with a certain border and a few rectangles, most of them
/// certainly occupied and some only partially so.
pub fn random_probability_world(seed: u64, size: usize) -> Result<PredictedGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridGeometry::with_default_resolution(size, size)?;
    let mut v = vec![0.0; g.len()];
    for _ in 0..rng.gen_range(3..9) {
        let (x0, y0) = (rng.gen_range(0..size), rng.gen_range(0..size));
        let (w, h) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let p = if rng.gen_bool(0.6) { 1.0 } else { rng.gen_range(0.05..0.6) };
        for y in y0..(y0 + h).min(size) {
            for x in x0..(x0 + w).min(size) {
                v[y * size + x] = p;
            }
        }
    }
    for i in 0..g.len() {
        if g.is_border(g.cell(i)) {
            v[i] = 1.0;
        }
    }
    PredictedGrid::new(g, v)
}

/// Random 8-connected walk of 1 to `max_len` poses through cells that are
/// not certainly occupied. Revisits are allowed.
pub fn random_walk(seed: u64, map: &PredictedGrid, max_len: usize) -> Vec<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = map.geometry();
    let open: Vec<Cell> = (0..g.len())
        .map(|i| g.cell(i))
        .filter(|&c| map.probability(c) < 1.0)
        .collect();
    assert!(!open.is_empty(), "map has no open cell");
    let mut c = open[rng.gen_range(0..open.len())];
    let len = rng.gen_range(1..=max_len.max(1));
    let mut path = vec![c];
    let mut stuck = 0;
    while path.len() < len && stuck < 1000 {
        let (dx, dy) = (rng.gen_range(-1..=1), rng.gen_range(-1..=1));
        let next = Cell::new(c.x + dx, c.y + dy);
        if (dx, dy) != (0, 0) && map.probability(next) < 1.0 {
            c = next;
            path.push(c);
            stuck = 0;
        } else {
            stuck += 1;
        }
    }
    path
}

/// A square pillar in an open room with a closed path looping around it.
///
/// No pose sees past the pillar's outer face, so its inner cells are
/// enclosed by the union of the fans yet covered by none of them.
pub struct PillarLoop {
    pub map: PredictedGrid,
    pub path: Vec<Cell>,
    /// Cells no sampled pose can see.
    pub trapped: Vec<Cell>,
}

pub fn pillar_loop() -> PillarLoop {
    let n = 40;
    let g = GridGeometry::with_default_resolution(n, n).expect("valid");
    let (lo, hi) = (15, 24);
    let mut v = vec![0.0; g.len()];
    for i in 0..g.len() {
        let c = g.cell(i);
        if g.is_border(c) || ((lo..=hi).contains(&c.x) && (lo..=hi).contains(&c.y)) {
            v[i] = 1.0;
        }
    }
    let map = PredictedGrid::new(g, v).expect("probabilities");
    let (a, b) = (lo - 3, hi + 3);
    let mut path = Vec::new();
    for x in a..b {
        path.push(Cell::new(x, a));
    }
    for y in a..b {
        path.push(Cell::new(b, y));
    }
    for x in (a + 1..=b).rev() {
        path.push(Cell::new(x, b));
    }
    for y in (a + 1..=b).rev() {
        path.push(Cell::new(a, y));
    }
    path.push(Cell::new(a, a));
    let trapped = (lo + 2..=hi - 2)
        .flat_map(|y| (lo + 2..=hi - 2).map(move |x| Cell::new(x, y)))
        .collect();
    PillarLoop { map, path, trapped }
}

/// Fully observed random grid for path-search checks: border walls plus
/// independent interior obstacles at density `fill`.
pub fn random_observed_grid(seed: u64, width: usize, height: usize, fill: f64) -> Result<ObservedGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridGeometry::with_default_resolution(width, height)?;
    let states = (0..g.len())
        .map(|i| {
            if g.is_border(g.cell(i)) || rng.gen_bool(fill) {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .collect();
    ObservedGrid::from_states(g, states)
}
