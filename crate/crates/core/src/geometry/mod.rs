//! Coverage geometry: raycasting, visibility polygons, polygon boolean
//! operations, rasterization, and path visibility masks.

pub mod boolean;
pub mod mask;
pub mod polygon;
pub mod raycast;

pub use boolean::{BoolOp, Region};
pub use mask::{
    compare_with_oracle, extract_holes, flood_fill_mask, mask_ring_cells, path_visibility_mask,
    path_visibility_mask_flood_fill,
    path_visibility_mask_oracle, point_visibility_mask, polygon_union, EquivalenceReport, MapView,
    MaskParams, PathMaskOptions, VisibilityMask,
};
pub use polygon::{draw_polygon, rasterize_mask, Ring, VisPolygon};
pub use raycast::{
    raycast_ground_truth, raycast_observed, raycast_probabilistic, trace_ray, RayFan, RayStop,
    RayTrace, MIN_SAMPLES,
};

/// A continuous point in cell units; cell `(x, y)` is centered at `[x, y]`.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Shoelace area of an open or closed ring; positive when counterclockwise
/// in an x-right, y-up frame.
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc
}

/// Even-odd point-in-ring test (ring may be open or closed).
pub fn point_in_ring(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
