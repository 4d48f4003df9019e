//! Map prediction ensembles.
//!
//! A backend fills the Unknown part of the observed grid with occupancy
//! probabilities. Several seeded members are drawn; their mean is the fused
//! map that masks are raycast against and their population variance is the
//! uncertainty that planners spend.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{
    Cell, CellState, Graymap, GridGeometry, GroundTruthGrid, ObservedGrid, PredictedGrid,
    UncertaintyGrid,
};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 3;
pub const DEFAULT_PRIOR: f64 = 0.5;
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
const MAX_FRAME: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEnsemble {
    members: Vec<PredictedGrid>,
    fused: PredictedGrid,
    uncertainty: UncertaintyGrid,
}

impl PredictionEnsemble {
    /// Fused mean and population variance of `members`.
    pub fn from_members(members: Vec<PredictedGrid>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidParameter("ensemble needs at least one member".into()))?;
        let geometry = *first.geometry();
        for m in &members[1..] {
            geometry.ensure_same_shape(m.geometry())?;
        }
        let n = members.len() as f64;
        let mut mean = vec![0.0; geometry.len()];
        for m in &members {
            for (acc, v) in mean.iter_mut().zip(m.values()) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= n;
        }
        let mut var = vec![0.0; geometry.len()];
        for m in &members {
            for ((acc, v), mu) in var.iter_mut().zip(m.values()).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        for v in &mut var {
            *v /= n;
        }
        // Rounding can push a mean of values in [0, 1] a hair outside.
        for v in &mut mean {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            fused: PredictedGrid::new(geometry, mean)?,
            uncertainty: UncertaintyGrid::new(geometry, var)?,
            members,
        })
    }

    pub fn members(&self) -> &[PredictedGrid] {
        &self.members
    }

    pub fn fused(&self) -> &PredictedGrid {
        &self.fused
    }

    pub fn uncertainty(&self) -> &UncertaintyGrid {
        &self.uncertainty
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Same members, variance multiplied by `factor`.
    pub fn with_scaled_uncertainty(&self, factor: f64) -> Self {
        Self {
            members: self.members.clone(),
            fused: self.fused.clone(),
            uncertainty: self.uncertainty.scaled(factor),
        }
    }

    #[cfg(test)]
    pub(crate) fn with_uncertainty(self, uncertainty: UncertaintyGrid) -> Self {
        Self { uncertainty, ..self }
    }
}

/// Wall-extension heuristic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralParams {
    /// Range of the per-member occupancy assigned to unexplained Unknown cells.
    pub background: [f64; 2],
    /// Chance that a wall end is extended at all.
    pub p_extend: f64,
    /// Extension length range in cells.
    pub extend_cells: [usize; 2],
    /// Chance that an extension turns a corner and continues.
    pub p_close: f64,
    /// Wall cells needed behind an end before it counts as a run.
    pub min_run: usize,
}

impl Default for StructuralParams {
    fn default() -> Self {
        Self {
            background: [0.0, 0.05],
            p_extend: 0.7,
            extend_cells: [5, 60],
            p_close: 0.35,
            min_run: 2,
        }
    }
}

impl StructuralParams {
    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.background;
        let ok = (0.0..=1.0).contains(&lo)
            && (0.0..=1.0).contains(&hi)
            && lo <= hi
            && (0.0..=1.0).contains(&self.p_extend)
            && (0.0..=1.0).contains(&self.p_close)
            && self.extend_cells[0] >= 1
            && self.extend_cells[0] <= self.extend_cells[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("structural predictor: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    /// `host:port` of a server speaking the frame protocol.
    Tcp { address: String },
    /// A program speaking the frame protocol on stdin/stdout.
    Subprocess { program: String, #[serde(default)] args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub endpoint: Endpoint,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Prior to fall back to when the backend fails; errors propagate when
    /// absent.
    #[serde(default)]
    pub fallback_prior: Option<f64>,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_prior() -> f64 {
    DEFAULT_PRIOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorConfig {
    Prior {
        #[serde(default = "default_prior")]
        p0: f64,
    },
    Structural {
        #[serde(default, flatten)]
        params: StructuralParams,
    },
    /// Ground truth with random flips in Unknown cells. Reads the world, so
    /// only meaningful for upper-bound experiments.
    OracleLeak { flip_rate: f64 },
    External(ExternalConfig),
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::Structural {
            params: StructuralParams::default(),
        }
    }
}

impl PredictorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorConfig::Prior { .. } => "prior",
            PredictorConfig::Structural { .. } => "structural",
            PredictorConfig::OracleLeak { .. } => "oracle_leak",
            PredictorConfig::External(_) => "external",
        }
    }
}

/// A configured backend, bound to the world when it needs one.
#[derive(Debug, Clone)]
pub struct Predictor {
    config: PredictorConfig,
    truth: Option<GroundTruthGrid>,
}

impl Predictor {
    pub fn new(config: PredictorConfig) -> Result<Self> {
        match &config {
            PredictorConfig::Prior { p0 } => check_probability(*p0)?,
            PredictorConfig::Structural { params } => params.validate()?,
            PredictorConfig::OracleLeak { .. } => {
                return Err(Error::InvalidParameter(
                    "the oracle-leak predictor needs the world; use Predictor::with_world".into(),
                ))
            }
            PredictorConfig::External(ext) => {
                if let Some(p) = ext.fallback_prior {
                    check_probability(p)?;
                }
            }
        }
        Ok(Self {
            config,
            truth: None,
        })
    }

    /// Like [`Predictor::new`], also accepting the oracle-leak backend.
    pub fn with_world(config: PredictorConfig, world: &GroundTruthGrid) -> Result<Self> {
        if let PredictorConfig::OracleLeak { flip_rate } = config {
            check_probability(flip_rate)?;
            return Ok(Self {
                config,
                truth: Some(world.clone()),
            });
        }
        Self::new(config)
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    /// `n` members; deterministic in (observed, n, seed, config) for the
    /// built-in backends.
    pub fn predict(&self, observed: &ObservedGrid, n: usize, seed: u64) -> Result<PredictionEnsemble> {
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble size must be at least 1".into()));
        }
        let members = match &self.config {
            PredictorConfig::Prior { p0 } => prior_members(observed, n, *p0),
            PredictorConfig::Structural { params } => (0..n)
                .into_par_iter()
                .map(|m| structural_member(observed, params, member_seed(seed, m)))
                .collect(),
            PredictorConfig::OracleLeak { flip_rate } => {
                let truth = self.truth.as_ref().expect("constructed with a world");
                observed.geometry().ensure_same_shape(truth.geometry())?;
                (0..n)
                    .into_par_iter()
                    .map(|m| oracle_leak_member(observed, truth, *flip_rate, member_seed(seed, m)))
                    .collect()
            }
            PredictorConfig::External(ext) => match external_predict(observed, n, ext) {
                Ok((members, clamped)) => {
                    if clamped > 0 {
                        log::warn!("external predictor overwrote {clamped} observed cells");
                    }
                    members
                }
                Err(e) => match ext.fallback_prior {
                    Some(p0) => {
                        log::warn!("external predictor failed ({e}); using prior {p0}");
                        prior_members(observed, n, p0)
                    }
                    None => return Err(e),
                },
            },
        };
        PredictionEnsemble::from_members(members)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{p} is not a probability")))
    }
}

fn member_seed(seed: u64, member: usize) -> u64 {
    seed.wrapping_add(member as u64)
}

fn prior_members(observed: &ObservedGrid, n: usize, p0: f64) -> Vec<PredictedGrid> {
    vec![PredictedGrid::from_observed(observed, p0); n]
}

const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// One structural hypothesis: straight wall runs that end at Unknown space
/// are continued into it, sometimes turning a corner to close off a room.
pub fn structural_member(observed: &ObservedGrid, params: &StructuralParams, seed: u64) -> PredictedGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = params.background;
    let background = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let mut grid = PredictedGrid::from_observed(observed, background);
    let g = *observed.geometry();
    let state = |c: Cell| {
        if g.contains(c) {
            observed.state(c)
        } else {
            CellState::Occupied
        }
    };
    // Collect ends first so the scan is not influenced by its own output.
    let mut ends = Vec::new();
    for i in 0..g.len() {
        if observed.state_at(i) != CellState::Occupied {
            continue;
        }
        let c = g.cell(i);
        for (d, &(dx, dy)) in DIRS.iter().enumerate() {
            let ahead = Cell::new(c.x + dx, c.y + dy);
            if !g.contains(ahead) || state(ahead) != CellState::Unknown {
                continue;
            }
            let backed = (1..=params.min_run as i32)
                .all(|k| state(Cell::new(c.x - k * dx, c.y - k * dy)) == CellState::Occupied);
            if backed {
                ends.push((c, d));
            }
        }
    }
    let values = grid.values_mut();
    for (start, d) in ends {
        if !rng.gen_bool(params.p_extend) {
            continue;
        }
        let mut at = start;
        let mut dir = d;
        loop {
            let len = rng.gen_range(params.extend_cells[0]..=params.extend_cells[1]);
            let (dx, dy) = DIRS[dir];
            let mut drawn = 0;
            for _ in 0..len {
                let next = Cell::new(at.x + dx, at.y + dy);
                if !g.contains(next) || observed.state(next) != CellState::Unknown {
                    break;
                }
                values[g.index(next)] = 1.0;
                at = next;
                drawn += 1;
            }
            if drawn == 0 || !rng.gen_bool(params.p_close) {
                break;
            }
            dir = if rng.gen_bool(0.5) { (dir + 1) % 4 } else { (dir + 3) % 4 };
        }
    }
    grid
}

/// Ground truth in Unknown cells, each flipped with probability `flip_rate`.
pub fn oracle_leak_member(
    observed: &ObservedGrid,
    truth: &GroundTruthGrid,
    flip_rate: f64,
    seed: u64,
) -> PredictedGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = PredictedGrid::from_observed(observed, 0.0);
    for (i, (v, s)) in grid.values_mut().iter_mut().zip(observed.states()).enumerate() {
        if *s == CellState::Unknown {
            let occ = truth.occupancy()[i] ^ rng.gen_bool(flip_rate);
            *v = if occ { 1.0 } else { 0.0 };
        }
    }
    grid
}

/// Writes `payload` behind a 4-byte big-endian length.
pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| Error::Predictor(format!("frame of {} bytes too large", payload.len())))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Predictor(format!("frame of {len} bytes exceeds limit")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// The request frame: the observed graymap with the member count in a
/// header comment.
pub fn encode_request(observed: &ObservedGrid, n: usize) -> Vec<u8> {
    let bytes = observed.to_graymap().encode();
    // "P5" then the comment line, then the rest of the header untouched.
    let mut out = Vec::with_capacity(bytes.len() + 16);
    out.extend_from_slice(&bytes[..2]);
    out.extend_from_slice(format!("\n# members {n}").as_bytes());
    out.extend_from_slice(&bytes[2..]);
    out
}

/// Server side of [`encode_request`].
pub fn decode_request(bytes: &[u8], resolution: f64) -> Result<(ObservedGrid, usize)> {
    let graymap = Graymap::decode(bytes)?;
    let header_end = bytes.len() - graymap.data.len() * if graymap.is_16bit() { 2 } else { 1 };
    let header = String::from_utf8_lossy(&bytes[..header_end]);
    let n = header
        .lines()
        .find_map(|l| l.trim().strip_prefix("# members "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Predictor("request lacks a member count".into()))?;
    Ok((ObservedGrid::from_graymap(&graymap, resolution)?, n))
}

fn map_timeout(e: Error, timeout: Duration) -> Error {
    match e {
        Error::Io(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
            ) =>
        {
            Error::PredictorTimeout(timeout)
        }
        other => other,
    }
}

fn decode_members(frames: Vec<Vec<u8>>, geometry: &GridGeometry) -> Result<Vec<PredictedGrid>> {
    frames
        .iter()
        .map(|f| {
            let gm = Graymap::decode(f)?;
            if gm.width != geometry.width || gm.height != geometry.height {
                return Err(Error::GeometryMismatch(format!(
                    "predictor returned {}x{}, expected {}x{}",
                    gm.width, gm.height, geometry.width, geometry.height
                )));
            }
            PredictedGrid::from_graymap16(&gm, geometry.resolution)
        })
        .collect()
}

/// Round trip through an external backend. Returns the members, already
/// clamped to the observation, and how many cells clamping changed.
pub fn external_predict(
    observed: &ObservedGrid,
    n: usize,
    config: &ExternalConfig,
) -> Result<(Vec<PredictedGrid>, usize)> {
    let timeout = Duration::from_millis(config.timeout_ms.max(1));
    let request = encode_request(observed, n);
    let frames = match &config.endpoint {
        Endpoint::Tcp { address } => tcp_exchange(address, &request, n, timeout),
        Endpoint::Subprocess { program, args } => {
            subprocess_exchange(program, args, &request, n, timeout)
        }
    }?;
    let mut members = decode_members(frames, observed.geometry())?;
    let clamped = members
        .iter_mut()
        .map(|m| m.clamp_to_observed(observed))
        .sum();
    Ok((members, clamped))
}

fn tcp_exchange(address: &str, request: &[u8], n: usize, timeout: Duration) -> Result<Vec<Vec<u8>>> {
    let addrs: Vec<SocketAddr> = address.to_socket_addrs()?.collect();
    let addr = addrs
        .first()
        .ok_or_else(|| Error::Predictor(format!("cannot resolve {address}")))?;
    let mut stream =
        TcpStream::connect_timeout(addr, timeout).map_err(|e| map_timeout(e.into(), timeout))?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    write_frame(&mut stream, request).map_err(|e| map_timeout(e, timeout))?;
    stream.flush()?;
    (0..n)
        .map(|_| read_frame(&mut stream).map_err(|e| map_timeout(e, timeout)))
        .collect()
}

fn subprocess_exchange(
    program: &str,
    args: &[String],
    request: &[u8],
    n: usize,
    timeout: Duration,
) -> Result<Vec<Vec<u8>>> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    let request = request.to_vec();
    std::thread::spawn(move || {
        let result = (|| {
            write_frame(&mut stdin, &request)?;
            stdin.flush()?;
            drop(stdin);
            (0..n).map(|_| read_frame(&mut stdout)).collect::<Result<Vec<_>>>()
        })();
        let _ = tx.send(result);
    });
    let outcome = match rx.recv_timeout(timeout) {
        Ok(r) => r,
        Err(_) => Err(Error::PredictorTimeout(timeout)),
    };
    if outcome.is_err() {
        let _ = child.kill();
    }
    let _ = child.wait();
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::with_default_resolution(w, h).unwrap()
    }

    /// Left half observed, right half unknown.
    fn half_observed(w: usize, h: usize) -> ObservedGrid {
        let g = geom(w, h);
        let world = GroundTruthGrid::empty_room(g);
        let mut obs = ObservedGrid::unknown(g);
        for i in 0..g.len() {
            let c = g.cell(i);
            if (c.x as usize) < w / 2 {
                obs.observe(c, world.state(c)).unwrap();
            }
        }
        obs
    }

    #[test]
    fn fused_and_variance_arithmetic() {
        let g = geom(1, 1);
        let a = PredictedGrid::new(g, vec![0.2]).unwrap();
        let b = PredictedGrid::new(g, vec![0.8]).unwrap();
        let e = PredictionEnsemble::from_members(vec![a, b]).unwrap();
        assert!((e.fused().values()[0] - 0.5).abs() < 1e-12);
        assert!((e.uncertainty().values()[0] - 0.09).abs() < 1e-12);
    }

    #[test]
    fn single_member_has_zero_variance() {
        let obs = half_observed(8, 8);
        let p = Predictor::new(PredictorConfig::default()).unwrap();
        let e = p.predict(&obs, 1, 3).unwrap();
        assert!(e.uncertainty().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fully_observed_has_nothing_to_predict() {
        let g = geom(12, 9);
        let obs = ObservedGrid::fully_observed(&GroundTruthGrid::empty_room(g));
        let p = Predictor::new(PredictorConfig::default()).unwrap();
        let e = p.predict(&obs, 3, 11).unwrap();
        for m in e.members() {
            assert_eq!(m, &PredictedGrid::from_observed(&obs, 0.0));
        }
        assert!(e.uncertainty().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prior_fills_unknown() {
        let obs = half_observed(10, 6);
        let p = Predictor::new(PredictorConfig::Prior { p0: 0.5 }).unwrap();
        let e = p.predict(&obs, 3, 0).unwrap();
        for (i, s) in obs.states().iter().enumerate() {
            if *s == CellState::Unknown {
                assert!(e.members().iter().all(|m| m.values()[i] == 0.5));
            }
        }
        assert!(e.uncertainty().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_members_rejected() {
        let p = Predictor::new(PredictorConfig::Prior { p0: 0.5 }).unwrap();
        assert!(p.predict(&half_observed(4, 4), 0, 0).is_err());
    }

    #[test]
    fn structural_extends_a_wall_run() {
        // A horizontal wall seen for x in 0..10 at y = 5; unknown beyond.
        let g = geom(40, 11);
        let mut obs = ObservedGrid::unknown(g);
        for x in 0..10 {
            obs.observe(Cell::new(x, 5), CellState::Occupied).unwrap();
            obs.observe(Cell::new(x, 4), CellState::Free).unwrap();
        }
        let params = StructuralParams {
            p_extend: 1.0,
            p_close: 0.0,
            extend_cells: [5, 5],
            background: [0.0, 0.0],
            min_run: 2,
        };
        let m = structural_member(&obs, &params, 1);
        for x in 10..15 {
            assert_eq!(m.probability(Cell::new(x, 5)), 1.0, "x = {x}");
        }
        assert_eq!(m.probability(Cell::new(15, 5)), 0.0);
        assert!(m.preserves(&obs));
    }

    #[test]
    fn structural_members_differ_and_are_reproducible() {
        let g = geom(60, 40);
        let mut obs = ObservedGrid::unknown(g);
        for x in 0..20 {
            for y in 0..20 {
                let c = Cell::new(x, y);
                let wall = x == 0 || y == 0 || y == 19;
                obs.observe(c, if wall { CellState::Occupied } else { CellState::Free })
                    .unwrap();
            }
        }
        let p = Predictor::new(PredictorConfig::default()).unwrap();
        let a = p.predict(&obs, 4, 42).unwrap();
        let b = p.predict(&obs, 4, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.uncertainty().values().iter().any(|&v| v > 0.01));
        assert!(a.members().iter().all(|m| m.preserves(&obs)));
    }

    #[test]
    fn oracle_leak_without_flips_is_truth() {
        let g = geom(10, 10);
        let mut world = GroundTruthGrid::empty_room(g);
        world.set_occupied(Cell::new(6, 6), true).unwrap();
        let obs = half_observed(10, 10);
        let p = Predictor::with_world(PredictorConfig::OracleLeak { flip_rate: 0.0 }, &world).unwrap();
        let e = p.predict(&obs, 2, 5).unwrap();
        assert_eq!(e.fused().probability(Cell::new(6, 6)), 1.0);
        assert_eq!(e.fused().probability(Cell::new(7, 6)), 0.0);
        assert!(Predictor::new(PredictorConfig::OracleLeak { flip_rate: 0.1 }).is_err());
    }

    #[test]
    fn request_carries_member_count() {
        let obs = half_observed(7, 5);
        let bytes = encode_request(&obs, 4);
        let (back, n) = decode_request(&bytes, obs.geometry().resolution).unwrap();
        assert_eq!(n, 4);
        assert_eq!(back, obs);
    }

    fn serve_once(listener: TcpListener, reply: impl FnOnce(ObservedGrid, usize) -> Vec<Vec<u8>> + Send + 'static) {
        std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let req = read_frame(&mut s).unwrap();
            let (obs, n) = decode_request(&req, 10.0).unwrap();
            for f in reply(obs, n) {
                write_frame(&mut s, &f).unwrap();
            }
        });
    }

    fn tcp_config(listener: &TcpListener) -> ExternalConfig {
        ExternalConfig {
            endpoint: Endpoint::Tcp {
                address: listener.local_addr().unwrap().to_string(),
            },
            timeout_ms: 5_000,
            fallback_prior: None,
        }
    }

    #[test]
    fn echo_server_matches_prior() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let cfg = tcp_config(&listener);
        serve_once(listener, |obs, n| {
            let g = PredictedGrid::from_observed(&obs, 0.5).to_graymap16().encode();
            vec![g; n]
        });
        let obs = half_observed(9, 7);
        let e = Predictor::new(PredictorConfig::External(cfg)).unwrap().predict(&obs, 3, 0).unwrap();
        let prior = Predictor::new(PredictorConfig::Prior { p0: 0.5 }).unwrap().predict(&obs, 3, 0).unwrap();
        // 0.5 does not survive 16-bit quantization exactly.
        for (a, b) in e.fused().values().iter().zip(prior.fused().values()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let cfg = tcp_config(&listener);
        serve_once(listener, |_, n| {
            vec![PredictedGrid::filled(geom(3, 3), 0.5).to_graymap16().encode(); n]
        });
        let err = external_predict(&half_observed(9, 7), 2, &cfg).unwrap_err();
        assert!(matches!(err, Error::GeometryMismatch(_)), "{err}");
    }

    #[test]
    fn violations_are_clamped_and_counted() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let cfg = tcp_config(&listener);
        serve_once(listener, |obs, n| {
            vec![PredictedGrid::filled(*obs.geometry(), 0.5).to_graymap16().encode(); n]
        });
        let obs = half_observed(10, 6);
        let (members, clamped) = external_predict(&obs, 2, &cfg).unwrap();
        assert_eq!(clamped, 2 * obs.known_count());
        assert!(members.iter().all(|m| m.preserves(&obs)));
    }

    #[test]
    fn silent_server_times_out_and_falls_back() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let mut cfg = tcp_config(&listener);
        cfg.timeout_ms = 200;
        std::thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            std::thread::sleep(Duration::from_secs(2));
            drop(s);
        });
        let obs = half_observed(6, 6);
        let err = external_predict(&obs, 1, &cfg).unwrap_err();
        assert!(matches!(err, Error::PredictorTimeout(_)), "{err}");

        let mut cfg = cfg;
        cfg.endpoint = Endpoint::Tcp {
            address: "127.0.0.1:1".into(),
        };
        cfg.fallback_prior = Some(0.5);
        let e = Predictor::new(PredictorConfig::External(cfg)).unwrap().predict(&obs, 2, 0).unwrap();
        assert!(e.members().iter().all(|m| m.preserves(&obs)));
    }
}
