//! Grid geometry and the occupancy-grid family.
//!
//! All grids are row-major with `x` as the column and `y` as the row, origin
//! at the top-left. A cell `(x, y)` covers the square `[x-0.5, x+0.5] ×
//! [y-0.5, y+0.5]` in continuous coordinates, so cell centers sit on integer
//! coordinates.

pub mod pgm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RayTrace;
pub use pgm::Graymap;

pub const PGM_OCCUPIED: u16 = 0;
pub const PGM_FREE: u16 = 255;
pub const PGM_UNKNOWN: u16 = 205;

/// Default resolution: 10 cells per meter.
pub const DEFAULT_RESOLUTION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

/// Robot pose: a cell index.
pub type Pose = Cell;

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn center(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        dx.hypot(dy)
    }

    pub fn is_8_neighbor(self, other: Cell) -> bool {
        self != other && self.chebyshev(other) == 1
    }

    /// The 8-connected neighborhood in a fixed order.
    pub fn neighbors8(self) -> impl Iterator<Item = Cell> {
        const OFFSETS: [(i32, i32); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        OFFSETS
            .into_iter()
            .map(move |(dx, dy)| Cell::new(self.x + dx, self.y + dy))
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Cells per meter.
    pub resolution: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if width > i32::MAX as usize || height > i32::MAX as usize {
            return Err(Error::InvalidGeometry("grid too large".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
        })
    }

    pub fn with_default_resolution(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, DEFAULT_RESOLUTION)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        cell.y as usize * self.width + cell.x as usize
    }

    pub fn checked_index(&self, cell: Cell) -> Result<usize> {
        if self.contains(cell) {
            Ok(self.index(cell))
        } else {
            Err(Error::OutOfBounds {
                x: cell.x as i64,
                y: cell.y as i64,
                width: self.width,
                height: self.height,
            })
        }
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn is_border(&self, cell: Cell) -> bool {
        cell.x == 0
            || cell.y == 0
            || cell.x as usize == self.width - 1
            || cell.y as usize == self.height - 1
    }

    /// Dimensions only; resolution is metadata and may differ by rounding.
    pub fn same_shape(&self, other: &GridGeometry) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_shape(&self, other: &GridGeometry) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Binary ground-truth world. The border is always occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthGrid {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl GroundTruthGrid {
    /// Builds a world from per-cell occupancy, forcing the border closed.
    pub fn from_occupancy(geometry: GridGeometry, mut occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                occupied.len()
            )));
        }
        for i in 0..geometry.len() {
            if geometry.is_border(geometry.cell(i)) {
                occupied[i] = true;
            }
        }
        Ok(Self { geometry, occupied })
    }

    /// An empty room: free interior, occupied border.
    pub fn empty_room(geometry: GridGeometry) -> Self {
        Self::from_occupancy(geometry, vec![false; geometry.len()]).expect("sizes match")
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    #[inline]
    pub fn is_occupied(&self, cell: Cell) -> bool {
        !self.geometry.contains(cell) || self.occupied[self.geometry.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_occupied(cell)
    }

    pub fn state(&self, cell: Cell) -> CellState {
        if self.is_occupied(cell) {
            CellState::Occupied
        } else {
            CellState::Free
        }
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    /// Sets a cell; border cells stay occupied.
    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) -> Result<()> {
        let i = self.geometry.checked_index(cell)?;
        self.occupied[i] = occupied || self.geometry.is_border(cell);
        Ok(())
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| !o)
            .map(|(i, _)| self.geometry.cell(i))
    }

    pub fn to_graymap(&self) -> Graymap {
        let data = self
            .occupied
            .iter()
            .map(|&o| if o { PGM_OCCUPIED } else { PGM_FREE })
            .collect();
        Graymap::new(self.geometry.width, self.geometry.height, 255, data).expect("valid raster")
    }
}

/// The robot's tri-state map. Knowledge only grows.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedGrid {
    geometry: GridGeometry,
    cells: Vec<CellState>,
    known: usize,
}

impl ObservedGrid {
    pub fn unknown(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![CellState::Unknown; geometry.len()],
            known: 0,
        }
    }

    /// A fully observed copy of the ground truth.
    pub fn fully_observed(world: &GroundTruthGrid) -> Self {
        let cells = world
            .occupancy()
            .iter()
            .map(|&o| if o { CellState::Occupied } else { CellState::Free })
            .collect();
        Self {
            geometry: world.geometry,
            cells,
            known: world.geometry.len(),
        }
    }

    pub fn from_states(geometry: GridGeometry, cells: Vec<CellState>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        let known = cells.iter().filter(|&&c| c != CellState::Unknown).count();
        Ok(Self {
            geometry,
            cells,
            known,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn states(&self) -> &[CellState] {
        &self.cells
    }

    /// Out-of-bounds cells read as occupied.
    #[inline]
    pub fn state(&self, cell: Cell) -> CellState {
        if self.geometry.contains(cell) {
            self.cells[self.geometry.index(cell)]
        } else {
            CellState::Occupied
        }
    }

    #[inline]
    pub fn state_at(&self, index: usize) -> CellState {
        self.cells[index]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.state(cell) == CellState::Free
    }

    pub fn known_count(&self) -> usize {
        self.known
    }

    /// Fraction of cells that are no longer unknown.
    pub fn known_fraction(&self) -> f64 {
        self.known as f64 / self.geometry.len() as f64
    }

    /// Marks one cell. Returns whether the cell was newly observed.
    ///
    /// Panics if an observed cell would change state: the sensor is
    /// noise-free, so a conflict means a bug upstream.
    pub fn observe(&mut self, cell: Cell, state: CellState) -> Result<bool> {
        assert!(state != CellState::Unknown, "cannot observe Unknown");
        let i = self.geometry.checked_index(cell)?;
        match self.cells[i] {
            CellState::Unknown => {
                self.cells[i] = state;
                self.known += 1;
                Ok(true)
            }
            prev => {
                assert_eq!(prev, state, "observed cell {cell} changed state");
                Ok(false)
            }
        }
    }

    /// Integrates one scan: every traversed cell becomes Free, every ray that
    /// terminated on an obstacle marks its last cell Occupied.
    ///
    /// The whole scan is validated first; an out-of-bounds cell rejects the
    /// scan and leaves the grid untouched.
    pub fn update_from_scan(&mut self, pose: Pose, rays: &[RayTrace]) -> Result<usize> {
        self.geometry.checked_index(pose)?;
        for ray in rays {
            for &c in &ray.cells {
                self.geometry.checked_index(c)?;
            }
        }
        let mut newly = usize::from(self.observe(pose, CellState::Free)?);
        for ray in rays {
            let n = ray.cells.len();
            for (k, &c) in ray.cells.iter().enumerate() {
                let state = if ray.hit && k + 1 == n {
                    CellState::Occupied
                } else {
                    CellState::Free
                };
                newly += usize::from(self.observe(c, state)?);
            }
        }
        Ok(newly)
    }

    pub fn to_graymap(&self) -> Graymap {
        let data = self
            .cells
            .iter()
            .map(|c| match c {
                CellState::Free => PGM_FREE,
                CellState::Occupied => PGM_OCCUPIED,
                CellState::Unknown => PGM_UNKNOWN,
            })
            .collect();
        Graymap::new(self.geometry.width, self.geometry.height, 255, data).expect("valid raster")
    }

    pub fn from_graymap(g: &Graymap, resolution: f64) -> Result<Self> {
        let geometry = GridGeometry::new(g.width, g.height, resolution)?;
        if g.is_16bit() {
            return Err(Error::Graymap("observed grids are 8-bit".into()));
        }
        let cells = g
            .data
            .iter()
            .map(|&v| match v {
                PGM_FREE => Ok(CellState::Free),
                PGM_OCCUPIED => Ok(CellState::Occupied),
                PGM_UNKNOWN => Ok(CellState::Unknown),
                other => Err(Error::Graymap(format!("illegal observed-grid value {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(geometry, cells)
    }
}

/// One predicted occupancy-probability map.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedGrid {
    geometry: GridGeometry,
    cells: Vec<f64>,
}

impl PredictedGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        if let Some(v) = cells.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(Self { geometry, cells })
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Self {
        Self::new(geometry, vec![value; geometry.len()]).expect("value in range")
    }

    /// The observation with unknown cells set to `prior`.
    pub fn from_observed(observed: &ObservedGrid, prior: f64) -> Self {
        let cells = observed
            .states()
            .iter()
            .map(|s| match s {
                CellState::Free => 0.0,
                CellState::Occupied => 1.0,
                CellState::Unknown => prior,
            })
            .collect();
        Self {
            geometry: *observed.geometry(),
            cells,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.cells
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    /// Out-of-bounds cells read as certainly occupied.
    #[inline]
    pub fn probability(&self, cell: Cell) -> f64 {
        if self.geometry.contains(cell) {
            self.cells[self.geometry.index(cell)]
        } else {
            1.0
        }
    }

    /// Forces observed cells to their observed values. Returns the number of
    /// cells that had to change.
    pub fn clamp_to_observed(&mut self, observed: &ObservedGrid) -> usize {
        let mut changed = 0;
        for (v, s) in self.cells.iter_mut().zip(observed.states()) {
            let want = match s {
                CellState::Free => 0.0,
                CellState::Occupied => 1.0,
                CellState::Unknown => continue,
            };
            if *v != want {
                *v = want;
                changed += 1;
            }
        }
        changed
    }

    /// Whether every observed cell carries its observed value exactly.
    pub fn preserves(&self, observed: &ObservedGrid) -> bool {
        self.cells.iter().zip(observed.states()).all(|(&v, s)| match s {
            CellState::Free => v == 0.0,
            CellState::Occupied => v == 1.0,
            CellState::Unknown => true,
        })
    }

    /// Cells with probability ≥ 0.5 are predicted occupied.
    pub fn occupied_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&p| p >= 0.5).collect()
    }

    pub fn to_graymap16(&self) -> Graymap {
        let data = self
            .cells
            .iter()
            .map(|&p| (p * 65535.0).round() as u16)
            .collect();
        Graymap::new(self.geometry.width, self.geometry.height, 65535, data).expect("valid raster")
    }

    pub fn from_graymap16(g: &Graymap, resolution: f64) -> Result<Self> {
        let geometry = GridGeometry::new(g.width, g.height, resolution)?;
        let scale = g.maxval as f64;
        let cells = g.data.iter().map(|&v| v as f64 / scale).collect();
        Self::new(geometry, cells)
    }
}

/// Per-cell ensemble variance.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyGrid {
    geometry: GridGeometry,
    cells: Vec<f64>,
}

impl UncertaintyGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        if let Some(v) = cells.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative variance {v}")));
        }
        Ok(Self { geometry, cells })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![0.0; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.cells
    }

    #[inline]
    pub fn at(&self, cell: Cell) -> f64 {
        if self.geometry.contains(cell) {
            self.cells[self.geometry.index(cell)]
        } else {
            0.0
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            geometry: self.geometry,
            cells: self.cells.iter().map(|v| v * factor).collect(),
        }
    }
}
