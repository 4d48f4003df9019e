//! Visibility polygons and their rasterization.
//!
//! Rasterization is cell-center based with closed-set semantics: a cell is
//! set when its center lies inside the polygon under the even-odd rule taken
//! over all rings, or on a ring within [`RASTER_TOLERANCE`]. Degenerate rings
//! (no area) are ignored.

use crate::error::{Error, Result};
use crate::gridmap::{Cell, GridGeometry};

use super::mask::VisibilityMask;
use super::raycast::RayFan;
use super::{signed_area, Point};

/// A closed vertex loop: the first vertex is repeated at the end.
pub type Ring = Vec<Point>;

/// Distance within which a cell center counts as lying on a ring.
pub const RASTER_TOLERANCE: f64 = 2e-6;

/// Rings with less area than this are dropped before rasterization.
pub const MIN_RING_AREA: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisPolygon {
    pub outer: Vec<Ring>,
    pub holes: Vec<Ring>,
}

impl VisPolygon {
    pub fn from_outer(ring: Ring) -> Self {
        Self {
            outer: vec![ring],
            holes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.outer.is_empty()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.outer.iter().chain(self.holes.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(|r| r.len().saturating_sub(1)).sum()
    }

    /// Net enclosed area (outer rings minus holes).
    pub fn area(&self) -> f64 {
        let outer: f64 = self.outer.iter().map(|r| signed_area(r).abs()).sum();
        let holes: f64 = self.holes.iter().map(|r| signed_area(r).abs()).sum();
        outer - holes
    }
}

/// Closes an open vertex list into a ring.
pub fn close_ring(mut points: Vec<Point>) -> Ring {
    if let (Some(&first), Some(&last)) = (points.first(), points.last()) {
        if first != last {
            points.push(first);
        }
    }
    points
}

/// Connects the fan's vertices in angular order into a single outer ring.
pub fn draw_polygon(fan: &RayFan) -> Result<VisPolygon> {
    let mut distinct: Vec<Point> = Vec::with_capacity(fan.vertices.len());
    for &v in &fan.vertices {
        if distinct.last() != Some(&v) {
            distinct.push(v);
        }
    }
    while distinct.len() > 1 && distinct.first() == distinct.last() {
        distinct.pop();
    }
    if distinct.len() < 3 {
        return Err(Error::DegeneratePolygon(format!(
            "fan at {} has {} distinct vertices",
            fan.origin,
            distinct.len()
        )));
    }
    Ok(VisPolygon::from_outer(close_ring(distinct)))
}

/// Rasterizes a polygon onto the grid.
pub fn rasterize_mask(poly: &VisPolygon, geometry: &GridGeometry) -> VisibilityMask {
    let mut mask = VisibilityMask::empty(*geometry);
    rasterize_rings_into(poly.rings().map(|r| r.as_slice()), &mut mask);
    mask
}

struct Edge {
    a: Point,
    b: Point,
}

/// Sets every cell covered by the union of even-odd filled `rings`.
pub(crate) fn rasterize_rings_into<'a>(
    rings: impl Iterator<Item = &'a [Point]>,
    mask: &mut VisibilityMask,
) {
    let geometry = *mask.geometry();
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    let mut edges = Vec::new();
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ring in rings {
        if ring.len() < 3 || signed_area(ring).abs() < MIN_RING_AREA {
            continue;
        }
        let n = ring.len();
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            if a != b {
                y_lo = y_lo.min(a[1]);
                y_hi = y_hi.max(a[1]);
                edges.push(Edge { a, b });
            }
        }
    }
    if edges.is_empty() {
        return;
    }

    // Interior: scanline at each row center, half-open crossing rule.
    let row_first = ((y_lo - RASTER_TOLERANCE).ceil() as i64).max(0);
    let row_last = ((y_hi + RASTER_TOLERANCE).floor() as i64).min(h - 1);
    if row_first <= row_last {
        let rows = (row_last - row_first + 1) as usize;
        let mut starts: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for (k, e) in edges.iter().enumerate() {
            let lo = e.a[1].min(e.b[1]);
            if e.a[1] == e.b[1] {
                continue;
            }
            let first = (lo.ceil() as i64).max(row_first);
            if first <= row_last {
                starts[(first - row_first) as usize].push(k);
            }
        }
        let mut active: Vec<usize> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for r in 0..rows {
            let y = (row_first + r as i64) as f64;
            active.extend_from_slice(&starts[r]);
            active.retain(|&k| edges[k].a[1].max(edges[k].b[1]) > y);
            xs.clear();
            for &k in &active {
                let Edge { a, b } = edges[k];
                if (a[1] > y) != (b[1] > y) {
                    xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_unstable_by(|p, q| p.total_cmp(q));
            let row = row_first + r as i64;
            for pair in xs.chunks_exact(2) {
                let x0 = ((pair[0] - RASTER_TOLERANCE).ceil() as i64).max(0);
                let x1 = ((pair[1] + RASTER_TOLERANCE).floor() as i64).min(w - 1);
                if x0 <= x1 {
                    mask.set_row_span(row as usize, x0 as usize, x1 as usize);
                }
            }
        }
    }

    // Boundary: cell centers lying on an edge.
    for e in &edges {
        mark_centers_on_segment(e.a, e.b, mask);
    }
}

fn mark_centers_on_segment(a: Point, b: Point, mask: &mut VisibilityMask) {
    let geometry = *mask.geometry();
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    let dy = b[1] - a[1];
    let dx = b[0] - a[0];
    if dy.abs() >= dx.abs() {
        let (lo, hi) = (a[1].min(b[1]), a[1].max(b[1]));
        let r0 = ((lo - RASTER_TOLERANCE).ceil() as i64).max(0);
        let r1 = ((hi + RASTER_TOLERANCE).floor() as i64).min(h - 1);
        for row in r0..=r1 {
            let t = ((row as f64 - a[1]) / dy).clamp(0.0, 1.0);
            let x = a[0] + t * dx;
            let y = a[1] + t * dy;
            let cx = x.round();
            if (x - cx).abs() <= RASTER_TOLERANCE
                && (y - row as f64).abs() <= RASTER_TOLERANCE
                && cx >= 0.0
                && (cx as i64) < w
            {
                mask.set(Cell::new(cx as i32, row as i32));
            }
        }
    } else {
        let (lo, hi) = (a[0].min(b[0]), a[0].max(b[0]));
        let c0 = ((lo - RASTER_TOLERANCE).ceil() as i64).max(0);
        let c1 = ((hi + RASTER_TOLERANCE).floor() as i64).min(w - 1);
        for col in c0..=c1 {
            let t = ((col as f64 - a[0]) / dx).clamp(0.0, 1.0);
            let x = a[0] + t * dx;
            let y = a[1] + t * dy;
            let cy = y.round();
            if (y - cy).abs() <= RASTER_TOLERANCE
                && (x - col as f64).abs() <= RASTER_TOLERANCE
                && cy >= 0.0
                && (cy as i64) < h
            {
                mask.set(Cell::new(col as i32, cy as i32));
            }
        }
    }
}

/// Cells whose squares a segment passes through (supercover), clipped to
/// the grid.
pub(crate) fn segment_cells(a: Point, b: Point, geometry: &GridGeometry, out: &mut Vec<Cell>) {
    let start = Cell::new(a[0].round() as i32, a[1].round() as i32);
    let end = Cell::new(b[0].round() as i32, b[1].round() as i32);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let push = |c: Cell, out: &mut Vec<Cell>| {
        if geometry.contains(c) {
            out.push(c);
        }
    };
    push(start, out);
    if len == 0.0 || start == end {
        return;
    }
    let step_x = d[0].signum() as i32;
    let step_y = d[1].signum() as i32;
    let next_boundary = |p: f64, c: i32, s: i32| c as f64 + 0.5 * s as f64 - p;
    let mut t_max_x = if step_x != 0 {
        next_boundary(a[0], start.x, step_x) / d[0]
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if step_y != 0 {
        next_boundary(a[1], start.y, step_y) / d[1]
    } else {
        f64::INFINITY
    };
    let dt_x = if step_x != 0 { 1.0 / d[0].abs() } else { f64::INFINITY };
    let dt_y = if step_y != 0 { 1.0 / d[1].abs() } else { f64::INFINITY };
    let (mut cx, mut cy) = (start.x, start.y);
    let mut remaining = (end.x - start.x).abs() + (end.y - start.y).abs();
    while remaining > 0 {
        let corner = (t_max_x - t_max_y).abs() < 1e-12 && remaining >= 2;
        if corner {
            push(Cell::new(cx + step_x, cy), out);
            push(Cell::new(cx, cy + step_y), out);
            cx += step_x;
            cy += step_y;
            t_max_x += dt_x;
            t_max_y += dt_y;
            remaining -= 2;
        } else if (t_max_x < t_max_y && cx != end.x) || cy == end.y {
            cx += step_x;
            t_max_x += dt_x;
            remaining -= 1;
        } else {
            cy += step_y;
            t_max_y += dt_y;
            remaining -= 1;
        }
        push(Cell::new(cx, cy), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raycast::{raycast_probabilistic, RayStop};
    use crate::gridmap::PredictedGrid;

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::with_default_resolution(n, n).unwrap()
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Ring {
        close_ring(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    /// Independent cell-center oracle: even-odd over rings, plus on-edge.
    fn center_oracle(poly: &VisPolygon, g: &GridGeometry) -> Vec<bool> {
        let mut out = vec![false; g.len()];
        for i in 0..g.len() {
            let c = g.cell(i);
            let p = c.center();
            let mut parity = false;
            let mut on_edge = false;
            for ring in poly.rings() {
                if crate::geometry::point_in_ring(p, ring) {
                    parity = !parity;
                }
                for w in ring.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let ab = [b[0] - a[0], b[1] - a[1]];
                    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1])
                        / (ab[0] * ab[0] + ab[1] * ab[1]))
                        .clamp(0.0, 1.0);
                    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
                    if (q[0] - p[0]).hypot(q[1] - p[1]) <= 1e-9 {
                        on_edge = true;
                    }
                }
            }
            out[i] = parity || on_edge;
        }
        out
    }

    fn fan_from(vertices: Vec<Point>) -> RayFan {
        let n = vertices.len();
        RayFan {
            origin: Cell::new(0, 0),
            range: 1.0,
            vertices,
            stops: vec![
                RayStop {
                    distance: 1.0,
                    cell: None,
                    blocked: false
                };
                n
            ],
        }
    }

    #[test]
    fn quadrilateral_from_four_vertices() {
        let r = 3.0;
        let fan = fan_from(vec![[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r]]);
        let poly = draw_polygon(&fan).unwrap();
        assert_eq!(poly.outer.len(), 1);
        assert!(poly.holes.is_empty());
        assert_eq!(
            poly.outer[0],
            vec![[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r], [r, 0.0]]
        );
    }

    #[test]
    fn too_few_distinct_vertices_is_degenerate() {
        let fan = fan_from(vec![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(draw_polygon(&fan), Err(Error::DegeneratePolygon(_))));
    }

    #[test]
    fn empty_map_fan_is_regular_polygon() {
        let g = geom(41);
        let p = PredictedGrid::filled(g, 0.0);
        let fan = raycast_probabilistic(Cell::new(20, 20), 10.0, &p, 0.8, 12).unwrap();
        let poly = draw_polygon(&fan).unwrap();
        let ring = &poly.outer[0];
        assert_eq!(ring.len(), 13);
        for v in &ring[..12] {
            assert!(((v[0] - 20.0).hypot(v[1] - 20.0) - 10.0).abs() < 1e-9);
        }
        // Regular 12-gon of circumradius 10 has area 3 r².
        assert!((poly.area() - 300.0).abs() < 1e-6);
    }

    #[test]
    fn one_shortened_ray_yields_one_short_vertex() {
        let g = geom(41);
        let mut p = PredictedGrid::filled(g, 0.0);
        p.values_mut()[g.index(Cell::new(24, 20))] = 1.0;
        let fan = raycast_probabilistic(Cell::new(20, 20), 10.0, &p, 0.8, 16).unwrap();
        let poly = draw_polygon(&fan).unwrap();
        let short: Vec<_> = poly.outer[0][..16]
            .iter()
            .filter(|v| (v[0] - 20.0).hypot(v[1] - 20.0) < 9.999)
            .collect();
        assert_eq!(short, vec![&[24.0, 20.0]]);
    }

    #[test]
    fn five_by_five_block() {
        let g = geom(12);
        let poly = VisPolygon::from_outer(square(2.5, 3.5, 7.5, 8.5));
        let mask = rasterize_mask(&poly, &g);
        assert_eq!(mask.count(), 25);
        assert_eq!(mask.cells(), center_oracle(&poly, &g).as_slice());
    }

    #[test]
    fn integer_square_includes_its_boundary_centers() {
        let g = geom(12);
        let poly = VisPolygon::from_outer(square(2.0, 2.0, 6.0, 6.0));
        let mask = rasterize_mask(&poly, &g);
        assert_eq!(mask.count(), 25);
        assert_eq!(mask.cells(), center_oracle(&poly, &g).as_slice());
    }

    #[test]
    fn square_with_hole_leaves_a_one_cell_ring() {
        let g = geom(12);
        let poly = VisPolygon {
            outer: vec![square(1.5, 1.5, 8.5, 8.5)],
            holes: vec![square(2.5, 2.5, 7.5, 7.5)],
        };
        let mask = rasterize_mask(&poly, &g);
        assert_eq!(mask.count(), 49 - 25);
        assert!(!mask.get(Cell::new(5, 5)));
        assert!(mask.get(Cell::new(2, 5)));
        assert_eq!(mask.cells(), center_oracle(&poly, &g).as_slice());
    }

    #[test]
    fn zero_area_ring_is_empty() {
        let g = geom(8);
        let poly = VisPolygon::from_outer(close_ring(vec![[1.0, 1.0], [5.0, 1.0], [3.0, 1.0]]));
        assert_eq!(rasterize_mask(&poly, &g).count(), 0);
    }

    #[test]
    fn polygon_outside_grid_is_empty() {
        let g = geom(8);
        let poly = VisPolygon::from_outer(square(20.5, 20.5, 30.5, 30.5));
        assert_eq!(rasterize_mask(&poly, &g).count(), 0);
    }

    #[test]
    fn random_polygons_match_center_oracle() {
        use rand::{Rng, SeedableRng};
        let g = geom(24);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(3..12);
            let c = [rng.gen_range(4.0..20.0), rng.gen_range(4.0..20.0)];
            let mut pts = Vec::new();
            for k in 0..n {
                let a = k as f64 * std::f64::consts::TAU / n as f64;
                let r: f64 = rng.gen_range(0.5..9.0);
                // Snap half the vertices onto cell centers to exercise the
                // boundary rule.
                let mut p = [c[0] + r * a.cos(), c[1] + r * a.sin()];
                if rng.gen_bool(0.5) {
                    p = [p[0].round(), p[1].round()];
                }
                pts.push(p);
            }
            let poly = VisPolygon::from_outer(close_ring(pts));
            let mask = rasterize_mask(&poly, &g);
            let oracle = center_oracle(&poly, &g);
            assert_eq!(mask.cells(), oracle.as_slice());
        }
    }

    #[test]
    fn segment_supercover_is_connected() {
        let g = geom(20);
        let mut cells = Vec::new();
        segment_cells([1.0, 1.0], [15.3, 6.7], &g, &mut cells);
        assert_eq!(cells.first(), Some(&Cell::new(1, 1)));
        assert_eq!(cells.last(), Some(&Cell::new(15, 7)));
        for w in cells.windows(2) {
            assert!((w[0].x - w[1].x).abs() + (w[0].y - w[1].y).abs() <= 1);
        }
    }
}
