//! Visibility masks for single poses and whole paths.
//!
//! Two routes produce a path mask:
//!
//! * [`path_visibility_mask_oracle`] rasterizes every sampled pose's polygon
//!   into its own grid-sized mask and ORs them together.
//! * [`path_visibility_mask`] unions all polygons first, recovers the trapped
//!   regions the union encloses but no polygon covers, and rasterizes once.
//!
//! They agree up to cells adjacent to polygon rings, where the two routes see
//! the same boundary through different floating-point paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{Cell, Graymap, GridGeometry, ObservedGrid, Pose, PredictedGrid};
use crate::pathing::sample_poses;

use super::boolean::{union_all, Region};
use super::polygon::{
    draw_polygon, rasterize_mask, rasterize_rings_into, segment_cells, VisPolygon, RASTER_TOLERANCE,
};
use super::{dot, point_in_ring, sub, Point};
use super::raycast::{raycast_observed, raycast_probabilistic, RayFan};

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    geometry: GridGeometry,
    cells: Vec<bool>,
}

impl VisibilityMask {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![false; geometry.len()],
            geometry,
        }
    }

    pub fn from_cells(geometry: GridGeometry, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        Ok(Self { geometry, cells })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> bool {
        self.geometry.contains(cell) && self.cells[self.geometry.index(cell)]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell) {
        if self.geometry.contains(cell) {
            let i = self.geometry.index(cell);
            self.cells[i] = true;
        }
    }

    #[inline]
    pub(crate) fn set_row_span(&mut self, row: usize, x0: usize, x1: usize) {
        let base = row * self.geometry.width;
        self.cells[base + x0..=base + x1].fill(true);
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| self.geometry.cell(i))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i)
    }

    pub fn or_assign(&mut self, other: &VisibilityMask) {
        debug_assert!(self.geometry.same_shape(&other.geometry));
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= b;
        }
    }

    pub fn symmetric_difference(&self, other: &VisibilityMask) -> Vec<Cell> {
        self.cells
            .iter()
            .zip(&other.cells)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| self.geometry.cell(i))
            .collect()
    }

    pub fn is_subset_of(&self, other: &VisibilityMask) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Sum of `values` over the mask's cells.
    pub fn sum_over(&self, values: &[f64]) -> f64 {
        self.cells
            .iter()
            .zip(values)
            .filter(|(&c, _)| c)
            .map(|(_, v)| v)
            .sum()
    }

    /// Grows the mask by one cell in every 8-connected direction.
    pub fn dilated(&self) -> VisibilityMask {
        let mut out = self.clone();
        for c in self.iter() {
            for n in c.neighbors8() {
                out.set(n);
            }
        }
        out
    }

    /// Debug raster: mask cells 255, background 0.
    pub fn to_graymap(&self) -> Graymap {
        let data = self.cells.iter().map(|&c| if c { 255 } else { 0 }).collect();
        Graymap::new(self.geometry.width, self.geometry.height, 255, data).expect("valid raster")
    }
}

/// The map a visibility mask is computed against.
#[derive(Debug, Clone, Copy)]
pub enum MapView<'a> {
    /// Probabilistic raycast over a predicted map.
    Predicted {
        grid: &'a PredictedGrid,
        epsilon: f64,
    },
    /// Deterministic raycast over the observed map; unknown is transparent.
    Observed(&'a ObservedGrid),
}

impl MapView<'_> {
    pub fn geometry(&self) -> &GridGeometry {
        match self {
            MapView::Predicted { grid, .. } => grid.geometry(),
            MapView::Observed(grid) => grid.geometry(),
        }
    }

    pub fn fan(&self, pose: Pose, range: f64, samples: usize) -> Result<RayFan> {
        match *self {
            MapView::Predicted { grid, epsilon } => {
                raycast_probabilistic(pose, range, grid, epsilon, samples)
            }
            MapView::Observed(grid) => raycast_observed(pose, range, grid, samples),
        }
    }
}

/// Sensor parameters shared by every mask computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    /// Sensor range in cells.
    pub range: f64,
    /// Rays per scan.
    pub samples: usize,
    /// Path sampling stride in cells.
    pub stride: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            range: 200.0,
            samples: 360,
            stride: 1,
        }
    }
}

/// Switches for the union route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathMaskOptions {
    /// Subtract trapped regions before rasterizing. Disabling this is only
    /// useful to demonstrate why it is needed.
    pub extract_holes: bool,
}

impl Default for PathMaskOptions {
    fn default() -> Self {
        Self {
            extract_holes: true,
        }
    }
}

/// Expected sensor coverage from one pose.
pub fn point_visibility_mask(
    pose: Pose,
    map: MapView<'_>,
    range: f64,
    samples: usize,
) -> Result<VisibilityMask> {
    let fan = map.fan(pose, range, samples)?;
    let poly = draw_polygon(&fan)?;
    Ok(rasterize_mask(&poly, map.geometry()))
}

fn sampled_polygons(
    path: &[Pose],
    map: MapView<'_>,
    params: &MaskParams,
) -> Result<Vec<VisPolygon>> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let samples = sample_poses(path, params.stride)?;
    let mut polys = Vec::with_capacity(samples.len());
    for pose in samples {
        let fan = map.fan(pose, params.range, params.samples)?;
        polys.push(draw_polygon(&fan)?);
    }
    Ok(polys)
}

/// Reference semantics: one rasterized mask per sampled pose, OR-combined.
pub fn path_visibility_mask_oracle(
    path: &[Pose],
    map: MapView<'_>,
    params: &MaskParams,
) -> Result<VisibilityMask> {
    let polys = sampled_polygons(path, map, params)?;
    let mut acc = VisibilityMask::empty(*map.geometry());
    for poly in &polys {
        acc.or_assign(&rasterize_mask(poly, map.geometry()));
    }
    Ok(acc)
}

/// Per-pose masks by seeded fill instead of scanlines: the polygon outline
/// is drawn as a barrier, the inside is flooded 4-connected from the pose,
/// and outline cells are kept when their centers lie inside. Slivers cut
/// off from the pose by the outline are missed.
pub fn flood_fill_mask(poly: &VisPolygon, seed: Pose, geometry: &GridGeometry) -> VisibilityMask {
    let mut mask = VisibilityMask::empty(*geometry);
    let mut barrier = vec![false; geometry.len()];
    let mut outline = Vec::new();
    for ring in poly.rings() {
        for w in ring.windows(2) {
            segment_cells(w[0], w[1], geometry, &mut outline);
        }
    }
    for &c in &outline {
        barrier[geometry.index(c)] = true;
    }
    let inside = |c: Cell| {
        let p = c.center();
        let parity = poly.rings().filter(|r| point_in_ring(p, r)).count() % 2 == 1;
        parity || poly.rings().any(|r| r.windows(2).any(|w| on_segment(p, w[0], w[1])))
    };
    for &c in &outline {
        let i = geometry.index(c);
        if !mask.cells[i] && inside(c) {
            mask.cells[i] = true;
        }
    }
    if let Ok(s) = geometry.checked_index(seed) {
        if !barrier[s] {
            let mut stack = vec![s];
            mask.cells[s] = true;
            while let Some(i) = stack.pop() {
                let c = geometry.cell(i);
                for n in [
                    Cell::new(c.x + 1, c.y),
                    Cell::new(c.x - 1, c.y),
                    Cell::new(c.x, c.y + 1),
                    Cell::new(c.x, c.y - 1),
                ] {
                    if let Ok(j) = geometry.checked_index(n) {
                        if !barrier[j] && !mask.cells[j] {
                            mask.cells[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    mask
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dot(sub(p, a), sub(p, a)).sqrt() <= RASTER_TOLERANCE;
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dot(sub(p, q), sub(p, q)).sqrt() <= RASTER_TOLERANCE
}

/// The per-pose route with [`flood_fill_mask`] in place of scanlines.
pub fn path_visibility_mask_flood_fill(
    path: &[Pose],
    map: MapView<'_>,
    params: &MaskParams,
) -> Result<VisibilityMask> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut acc = VisibilityMask::empty(*map.geometry());
    for pose in sample_poses(path, params.stride)? {
        let poly = draw_polygon(&map.fan(pose, params.range, params.samples)?)?;
        acc.or_assign(&flood_fill_mask(&poly, pose, map.geometry()));
    }
    Ok(acc)
}

/// Union route: merge every sampled polygon, subtract trapped regions, and
/// rasterize a single time.
pub fn path_visibility_mask(
    path: &[Pose],
    map: MapView<'_>,
    params: &MaskParams,
    options: PathMaskOptions,
) -> Result<VisibilityMask> {
    let polys = sampled_polygons(path, map, params)?;
    if let [only] = polys.as_slice() {
        // A single fan is star-shaped around its pose: nothing to merge and
        // no enclosed region to subtract.
        return Ok(rasterize_mask(only, map.geometry()));
    }
    let (shell, holes) = merge_with_holes(&polys, options);
    let mut mask = VisibilityMask::empty(*map.geometry());
    rasterize_rings_into(
        shell
            .rings
            .iter()
            .chain(holes.rings.iter())
            .map(|r| r.as_slice()),
        &mut mask,
    );
    Ok(mask)
}

/// Shell of the union and the region it encloses that no polygon covers.
fn merge_with_holes(polys: &[VisPolygon], options: PathMaskOptions) -> (Region, Region) {
    let union = union_all(polys.iter().map(Region::from_polygon).collect());
    let shell = union.shell();
    let holes = if options.extract_holes {
        shell.difference(&union)
    } else {
        Region::empty()
    };
    (shell, holes)
}

/// Boolean union of polygons.
pub fn polygon_union(polys: &[VisPolygon]) -> VisPolygon {
    union_all(polys.iter().map(Region::from_polygon).collect()).to_polygon()
}

/// Trapped regions of a union: the symmetric difference of every input with
/// the union's filled shell, minus the union itself.
///
/// Every input lies inside the shell, so each symmetric difference is the
/// part of the shell that input misses; what remains after removing the
/// union is covered by no input at all.
pub fn extract_holes(polys: &[VisPolygon], union: &VisPolygon) -> VisPolygon {
    let union = Region::from_polygon(union);
    let shell = union.shell();
    let misses = polys
        .iter()
        .map(|p| Region::from_polygon(p).xor(&shell))
        .collect();
    union_all(misses).difference(&union).to_polygon()
}

/// Cells touched by any ring of the given polygons.
pub fn mask_ring_cells<'a>(
    polys: impl IntoIterator<Item = &'a VisPolygon>,
    geometry: &GridGeometry,
) -> VisibilityMask {
    let mut mask = VisibilityMask::empty(*geometry);
    let mut buf = Vec::new();
    for poly in polys {
        for ring in poly.rings() {
            for w in ring.windows(2) {
                buf.clear();
                segment_cells(w[0], w[1], geometry, &mut buf);
                for &c in &buf {
                    mask.set(c);
                }
            }
        }
    }
    mask
}

/// Result of comparing the union route with the oracle route.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub oracle_cells: usize,
    pub optimized_cells: usize,
    pub differing: Vec<Cell>,
    /// Differing cells that are not 8-adjacent to (or on) a ring cell.
    pub off_ring: Vec<Cell>,
}

impl EquivalenceReport {
    /// Allowed symmetric difference: `max(8, 1% of the oracle area)`.
    pub fn allowance(&self) -> usize {
        8usize.max(self.oracle_cells.div_ceil(100))
    }

    pub fn passes(&self) -> bool {
        self.differing.len() <= self.allowance() && self.off_ring.is_empty()
    }
}

/// Runs both routes and checks the bounded-difference contract.
pub fn compare_with_oracle(
    path: &[Pose],
    map: MapView<'_>,
    params: &MaskParams,
    options: PathMaskOptions,
) -> Result<(VisibilityMask, VisibilityMask, EquivalenceReport)> {
    let optimized = path_visibility_mask(path, map, params, options)?;
    let oracle = path_visibility_mask_oracle(path, map, params)?;
    let polys = sampled_polygons(path, map, params)?;
    let near_rings = mask_ring_cells(&polys, map.geometry()).dilated();
    let differing = optimized.symmetric_difference(&oracle);
    let off_ring = differing
        .iter()
        .copied()
        .filter(|&c| !near_rings.get(c))
        .collect();
    let report = EquivalenceReport {
        oracle_cells: oracle.count(),
        optimized_cells: optimized.count(),
        differing,
        off_ring,
    };
    Ok((optimized, oracle, report))
}
