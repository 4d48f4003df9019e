//! World loading from graymaps and line-segment floorplans, plus a seeded
//! procedural floorplan generator.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::polygon::segment_cells;
use crate::gridmap::{Cell, Graymap, GridGeometry, GroundTruthGrid, PGM_FREE, PGM_OCCUPIED};

/// A wall or door segment `[x1, y1, x2, y2]` in meters.
pub type Segment = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorplanSpec {
    /// Cells per meter.
    pub resolution: f64,
    /// `[width, height]` in meters.
    pub extent: [f64; 2],
    pub walls: Vec<Segment>,
    #[serde(default)]
    pub doors: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapClass {
    Small,
    Medium,
    Large,
}

impl MapClass {
    /// Building footprint in meters.
    pub fn extent(self) -> [f64; 2] {
        match self {
            MapClass::Small => [65.0, 85.0],
            MapClass::Medium => [60.0, 205.0],
            MapClass::Large => [88.0, 265.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MapClass::Small => "small",
            MapClass::Medium => "medium",
            MapClass::Large => "large",
        }
    }
}

impl std::str::FromStr for MapClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(MapClass::Small),
            "medium" => Ok(MapClass::Medium),
            "large" => Ok(MapClass::Large),
            other => Err(Error::InvalidParameter(format!("unknown map class {other:?}"))),
        }
    }
}

impl std::fmt::Display for MapClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses an 8-bit graymap world: 0 is Occupied, 255 is Free.
pub fn load_graymap(bytes: &[u8], resolution: f64) -> Result<GroundTruthGrid> {
    let g = Graymap::decode(bytes)?;
    if g.maxval != 255 {
        return Err(Error::Graymap(format!(
            "world graymaps must be 8-bit with maxval 255, got {}",
            g.maxval
        )));
    }
    let geometry = GridGeometry::new(g.width, g.height, resolution)?;
    let mut occupied = Vec::with_capacity(g.data.len());
    for (i, &v) in g.data.iter().enumerate() {
        occupied.push(match v {
            PGM_OCCUPIED => true,
            PGM_FREE => false,
            other => {
                return Err(Error::Graymap(format!(
                    "illegal world value {other} at cell {}",
                    geometry.cell(i)
                )))
            }
        });
    }
    GroundTruthGrid::from_occupancy(geometry, occupied)
}

impl FloorplanSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn grid_geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            (self.extent[0] * self.resolution).round() as usize,
            (self.extent[1] * self.resolution).round() as usize,
            self.resolution,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Floorplan("resolution must be positive".into()));
        }
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(Error::Floorplan("extent must be positive".into()));
        }
        const SLACK: f64 = 1e-9;
        for s in self.walls.iter().chain(&self.doors) {
            let inside = |x: f64, y: f64| {
                (-SLACK..=self.extent[0] + SLACK).contains(&x)
                    && (-SLACK..=self.extent[1] + SLACK).contains(&y)
            };
            if !s.iter().all(|v| v.is_finite()) || !inside(s[0], s[1]) || !inside(s[2], s[3]) {
                return Err(Error::Floorplan(format!("segment {s:?} outside extent")));
            }
        }
        Ok(())
    }
}

fn segment_to_cells(s: &Segment, res: f64, geometry: &GridGeometry, out: &mut Vec<Cell>) -> bool {
    // Snap to 1e-9 cells so decimal meter positions land on exact centers.
    let snap = |v: f64| (v * res * 1e9).round() / 1e9;
    let a = [snap(s[0]), snap(s[1])];
    let b = [snap(s[2]), snap(s[3])];
    if a == b {
        return false;
    }
    out.clear();
    segment_cells(a, b, geometry, out);
    true
}

/// Rasterizes walls as gap-free supercover runs, then carves doors.
pub fn rasterize_floorplan(spec: &FloorplanSpec) -> Result<GroundTruthGrid> {
    spec.validate()?;
    let geometry = spec.grid_geometry()?;
    let mut occupied = vec![false; geometry.len()];
    let mut cells = Vec::new();
    for (kind, segs, value) in [("wall", &spec.walls, true), ("door", &spec.doors, false)] {
        for s in segs {
            if !segment_to_cells(s, spec.resolution, &geometry, &mut cells) {
                log::warn!("skipping zero-length {kind} segment {s:?}");
                continue;
            }
            for &c in &cells {
                occupied[geometry.index(c)] = value;
            }
        }
    }
    GroundTruthGrid::from_occupancy(geometry, occupied)
}

/// Whether every Free cell is 4-connected to every other Free cell.
pub fn is_connected(world: &GroundTruthGrid) -> bool {
    let g = world.geometry();
    let Some(seed) = world.free_cells().next() else {
        return true;
    };
    let total = world.free_cells().count();
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([seed]);
    seen[g.index(seed)] = true;
    let mut reached = 0;
    while let Some(c) = queue.pop_front() {
        reached += 1;
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell::new(c.x + dx, c.y + dy);
            if world.is_free(n) && !seen[g.index(n)] {
                seen[g.index(n)] = true;
                queue.push_back(n);
            }
        }
    }
    reached == total
}

const MAX_ATTEMPTS: u64 = 100;
const CORRIDOR_TRIGGER: f64 = 40.0;
const MIN_ROOM: f64 = 3.0;

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    walls: Vec<Segment>,
    doors: Vec<Segment>,
}

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn w(&self) -> f64 {
        self.x1 - self.x0
    }
    fn h(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Rounds to whole decimeters so walls sit on cell centers at 10 cells/m.
fn dm(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

impl Builder<'_> {
    fn split_at(&mut self, lo: f64, hi: f64) -> f64 {
        let t = self.rng.gen_range(0.35..0.65);
        dm(lo + t * (hi - lo))
    }

    /// Wall along one line with `n` doors spread over it.
    fn wall_with_doors(&mut self, horizontal: bool, at: f64, from: f64, to: f64, n: usize) {
        let seg = |a: f64, b: f64| {
            if horizontal {
                [a, at, b, at]
            } else {
                [at, a, at, b]
            }
        };
        self.walls.push(seg(from, to));
        let slot = (to - from) / n as f64;
        for k in 0..n {
            let width = dm(self.rng.gen_range(1.0..1.6));
            let lo = from + k as f64 * slot + 0.5;
            let hi = from + (k + 1) as f64 * slot - 0.5 - width;
            if hi <= lo {
                continue;
            }
            let start = dm(self.rng.gen_range(lo..hi));
            self.doors.push(seg(start, start + width));
        }
    }

    fn partition(&mut self, r: Rect) {
        let (w, h) = (r.w(), r.h());
        let long = w.max(h);
        let short = w.min(h);
        let split_x = w >= h;

        if long >= CORRIDOR_TRIGGER && short >= 2.0 * MIN_ROOM + 4.0 {
            // A corridor across the long axis, rooms on both sides.
            let cw = dm(self.rng.gen_range(2.0..3.2));
            let (lo, hi) = if split_x { (r.x0, r.x1) } else { (r.y0, r.y1) };
            let c0 = self.split_at(lo + MIN_ROOM, hi - MIN_ROOM - cw);
            let c1 = dm(c0 + cw);
            let (from, to) = if split_x { (r.y0, r.y1) } else { (r.x0, r.x1) };
            let n = ((to - from) / 15.0).ceil().max(1.0) as usize;
            self.wall_with_doors(!split_x, c0, from, to, n);
            self.wall_with_doors(!split_x, c1, from, to, n);
            let (a, b) = if split_x {
                (Rect { x1: c0, ..r }, Rect { x0: c1, ..r })
            } else {
                (Rect { y1: c0, ..r }, Rect { y0: c1, ..r })
            };
            self.partition(a);
            self.partition(b);
            return;
        }

        let room_max = self.rng.gen_range(7.0..14.0);
        if long <= room_max || long < 2.0 * MIN_ROOM {
            return;
        }
        let (lo, hi) = if split_x { (r.x0, r.x1) } else { (r.y0, r.y1) };
        let at = self.split_at(lo, hi);
        if at - lo < MIN_ROOM || hi - at < MIN_ROOM {
            return;
        }
        let (from, to) = if split_x { (r.y0, r.y1) } else { (r.x0, r.x1) };
        self.wall_with_doors(!split_x, at, from, to, 1);
        let (a, b) = if split_x {
            (Rect { x1: at, ..r }, Rect { x0: at, ..r })
        } else {
            (Rect { y1: at, ..r }, Rect { y0: at, ..r })
        };
        self.partition(a);
        self.partition(b);
    }
}

fn generate_once(seed: u64, class: MapClass) -> FloorplanSpec {
    let [w, h] = class.extent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        rng: &mut rng,
        walls: vec![
            [0.0, 0.0, w, 0.0],
            [w, 0.0, w, h],
            [w, h, 0.0, h],
            [0.0, h, 0.0, 0.0],
        ],
        doors: Vec::new(),
    };
    b.partition(Rect {
        x0: 0.0,
        y0: 0.0,
        x1: w,
        y1: h,
    });
    FloorplanSpec {
        resolution: crate::gridmap::DEFAULT_RESOLUTION,
        extent: [w, h],
        walls: b.walls,
        doors: b.doors,
    }
}

/// Seeded recursive-partition floorplan with corridors and doored rooms.
/// Regenerates with derived seeds until the free space is connected.
pub fn generate_floorplan(seed: u64, class: MapClass) -> Result<FloorplanSpec> {
    for attempt in 0..MAX_ATTEMPTS {
        let spec = generate_once(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)), class);
        if is_connected(&rasterize_floorplan(&spec)?) {
            return Ok(spec);
        }
        log::debug!("floorplan seed {seed} attempt {attempt} disconnected; retrying");
    }
    Err(Error::Floorplan(format!(
        "no connected floorplan after {MAX_ATTEMPTS} attempts for seed {seed}"
    )))
}
