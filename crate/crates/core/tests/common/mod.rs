#![allow(dead_code)]

use pipe_core::geometry::raycast_ground_truth;
use pipe_core::gridmap::{Cell, GridGeometry, GroundTruthGrid, ObservedGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed random world with rectangular blocks, and a free start cell.
pub fn block_world(seed: u64, w: usize, h: usize) -> (GroundTruthGrid, Cell) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridGeometry::with_default_resolution(w, h).unwrap();
    let mut occ = vec![false; g.len()];
    for _ in 0..rng.gen_range(2..8) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (bw, bh) = (rng.gen_range(1..8), rng.gen_range(1..8));
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                occ[y * w + x] = true;
            }
        }
    }
    let world = GroundTruthGrid::from_occupancy(g, occ).unwrap();
    let free: Vec<Cell> = world.free_cells().collect();
    let start = free[rng.gen_range(0..free.len())];
    (world, start)
}

/// What one scan from `pose` reveals.
pub fn one_scan(world: &GroundTruthGrid, pose: Cell, range: f64) -> ObservedGrid {
    let mut o = ObservedGrid::unknown(*world.geometry());
    let (_, traces) = raycast_ground_truth(pose, range, world, 180).unwrap();
    o.update_from_scan(pose, &traces).unwrap();
    o
}
