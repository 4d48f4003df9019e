//! Boolean operations on polygonal regions.
//!
//! This is an overlay-style clipper: all vertices are snapped to a dyadic
//! grid of [`SNAP`] cell units, edges of both operands are split at every
//! mutual intersection, each resulting piece is classified by whether the
//! result region lies on its left and on its right, and the pieces where the
//! two sides differ are linked back into rings.
//!
//! A [`Region`] is valid when its rings do not cross, outer rings are
//! counterclockwise (positive [`signed_area`]) and holes clockwise, and the
//! winding number is 0 or 1 everywhere. Every operation returns a valid region
//! given valid inputs.

use rustc_hash::{FxHashMap, FxHashSet};

use super::polygon::{close_ring, Ring, VisPolygon};
use super::{cross, dot, point_in_ring, signed_area, sub, Point};

/// Coordinate quantum: 2⁻²⁰ ≈ 9.5·10⁻⁷ cell units.
pub const SNAP: f64 = 1.0 / (1u64 << 20) as f64;
const SCALE: f64 = (1u64 << 20) as f64;
/// Points within this distance of a line are treated as on it.
const ON_LINE: f64 = 4.0 * SNAP;
/// Vertices of different operands closer than this are merged.
const MERGE: f64 = 2.0 * ON_LINE;
const MIN_AREA: f64 = 1e-10;

type Key = (i64, i64);

#[inline]
fn key(p: Point) -> Key {
    ((p[0] * SCALE).round() as i64, (p[1] * SCALE).round() as i64)
}

#[inline]
fn point(k: Key) -> Point {
    [k.0 as f64 / SCALE, k.1 as f64 / SCALE]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersection,
    Difference,
    Xor,
}

impl BoolOp {
    #[inline]
    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::Union => a || b,
            BoolOp::Intersection => a && b,
            BoolOp::Difference => a && !b,
            BoolOp::Xor => a != b,
        }
    }
}

/// A set of non-crossing rings stored open (no repeated closing vertex).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Region {
    pub rings: Vec<Vec<Point>>,
}

impl Region {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a region from one simple ring of either orientation.
    pub fn from_simple_ring(ring: &[Point]) -> Self {
        let mut r = open_snapped(ring);
        if r.len() < 3 || signed_area(&r).abs() < MIN_AREA {
            return Self::empty();
        }
        if signed_area(&r) < 0.0 {
            r.reverse();
        }
        Self { rings: vec![r] }
    }

    /// Builds a region from a polygon whose outer rings and holes are
    /// already non-crossing; orientations are normalized.
    pub fn from_polygon(poly: &VisPolygon) -> Self {
        let mut rings = Vec::new();
        for (ring, outer) in poly
            .outer
            .iter()
            .map(|r| (r, true))
            .chain(poly.holes.iter().map(|r| (r, false)))
        {
            let mut r = open_snapped(ring);
            let area = signed_area(&r);
            if r.len() < 3 || area.abs() < MIN_AREA {
                continue;
            }
            if (area > 0.0) != outer {
                r.reverse();
            }
            rings.push(r);
        }
        Self { rings }
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.rings.iter().map(|r| signed_area(r)).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    pub fn outer_rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        self.rings.iter().filter(|r| signed_area(r) > 0.0)
    }

    pub fn hole_rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        self.rings.iter().filter(|r| signed_area(r) < 0.0)
    }

    /// Even-odd containment, equal to winding containment for valid regions.
    pub fn contains(&self, p: Point) -> bool {
        self.rings.iter().filter(|r| point_in_ring(p, r)).count() % 2 == 1
    }

    /// The region bounded by the outermost rings only: every hole is filled
    /// and islands inside holes are absorbed.
    pub fn shell(&self) -> Region {
        let outers: Vec<&Vec<Point>> = self.outer_rings().collect();
        let rings = outers
            .iter()
            .enumerate()
            .filter(|(i, r)| {
                !outers
                    .iter()
                    .enumerate()
                    .any(|(j, other)| j != *i && nested_in(r, other))
            })
            .map(|(_, r)| (*r).clone())
            .collect();
        Region { rings }
    }

    pub fn to_polygon(&self) -> VisPolygon {
        let mut poly = VisPolygon::default();
        for r in &self.rings {
            let closed = close_ring(r.clone());
            if signed_area(r) > 0.0 {
                poly.outer.push(closed);
            } else {
                poly.holes.push(closed);
            }
        }
        poly
    }

    pub fn union(&self, other: &Region) -> Region {
        boolean(self, other, BoolOp::Union)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        boolean(self, other, BoolOp::Intersection)
    }

    pub fn difference(&self, other: &Region) -> Region {
        boolean(self, other, BoolOp::Difference)
    }

    pub fn xor(&self, other: &Region) -> Region {
        boolean(self, other, BoolOp::Xor)
    }
}

/// Whether a ring that does not cross `outer` lies inside it, judged by its
/// first vertex not shared with `outer`.
fn nested_in(ring: &[Point], outer: &[Point]) -> bool {
    ring.iter()
        .find(|p| !outer.iter().any(|q| key(*q) == key(**p)))
        .is_some_and(|&p| point_in_ring(p, outer))
}

fn open_snapped(ring: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(ring.len());
    let mut last: Option<Key> = None;
    for &p in ring {
        let k = key(p);
        if last != Some(k) {
            out.push(point(k));
            last = Some(k);
        }
    }
    while out.len() > 1 && key(out[0]) == key(*out.last().unwrap()) {
        out.pop();
    }
    out
}

/// Union of many regions by balanced pairwise reduction.
pub fn union_all(mut regions: Vec<Region>) -> Region {
    regions.retain(|r| !r.is_empty());
    if regions.is_empty() {
        return Region::empty();
    }
    while regions.len() > 1 {
        let mut next = Vec::with_capacity(regions.len().div_ceil(2));
        let mut it = regions.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.union(&b)),
                None => next.push(a),
            }
        }
        regions = next;
    }
    regions.pop().unwrap()
}

struct Edge {
    a: Point,
    b: Point,
    ka: Key,
    kb: Key,
    len: f64,
    src: u8,
    /// First edge of its ring.
    ring_start: bool,
}

#[derive(Default, Clone, Copy)]
struct PieceInfo {
    canon: (Key, Key),
    /// Signed multiplicity of operand edges along the piece's canonical
    /// direction (low key to high key).
    count: [i32; 2],
    present: [bool; 2],
    /// Whether the piece lies inside operand `s`, for pieces not on `s`.
    inside: [Option<bool>; 2],
}

/// Spatial index for parity queries against one operand: edges bucketed
/// into horizontal bands, stored contiguously.
struct ParityIndex {
    y0: f64,
    band: f64,
    offsets: Vec<u32>,
    segs: Vec<(Point, Point)>,
}

impl ParityIndex {
    fn new(edges: &[Edge], src: u8) -> Self {
        let mine = || edges.iter().filter(|e| e.src == src && e.a[1] != e.b[1]);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut count = 0usize;
        for e in mine() {
            lo = lo.min(e.a[1]).min(e.b[1]);
            hi = hi.max(e.a[1]).max(e.b[1]);
            count += 1;
        }
        if count == 0 {
            return Self {
                y0: 0.0,
                band: 1.0,
                offsets: vec![0],
                segs: Vec::new(),
            };
        }
        let n_bands = (count / 2).clamp(1, 1 << 16);
        let band = ((hi - lo) / n_bands as f64).max(1e-9);
        let range = |e: &Edge| {
            let (ylo, yhi) = (e.a[1].min(e.b[1]), e.a[1].max(e.b[1]));
            (
                (((ylo - lo) / band).floor() as usize).min(n_bands - 1),
                (((yhi - lo) / band).floor() as usize).min(n_bands - 1),
            )
        };
        let mut offsets = vec![0u32; n_bands + 1];
        for e in mine() {
            let (b0, b1) = range(e);
            for b in b0..=b1 {
                offsets[b + 1] += 1;
            }
        }
        for b in 0..n_bands {
            offsets[b + 1] += offsets[b];
        }
        let mut fill = offsets.clone();
        let mut segs = vec![([0.0; 2], [0.0; 2]); offsets[n_bands] as usize];
        for e in mine() {
            let (b0, b1) = range(e);
            for b in b0..=b1 {
                segs[fill[b] as usize] = (e.a, e.b);
                fill[b] += 1;
            }
        }
        Self {
            y0: lo,
            band,
            offsets,
            segs,
        }
    }

    fn contains(&self, p: Point) -> bool {
        let n_bands = self.offsets.len() - 1;
        let idx = (p[1] - self.y0) / self.band;
        if self.segs.is_empty() || idx < 0.0 || idx >= n_bands as f64 + 1.0 {
            return false;
        }
        let idx = (idx.floor() as usize).min(n_bands - 1);
        let mut inside = false;
        let band = &self.segs[self.offsets[idx] as usize..self.offsets[idx + 1] as usize];
        for &(a, b) in band {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Records the mutual contact points of `e1` (index `i`) and `e2` (index
/// `j`) as split keys, and endpoints touching the other edge as contacts.
fn intersect(
    i: u32,
    e1: &Edge,
    j: u32,
    e2: &Edge,
    splits: &mut Vec<(u32, Key)>,
    contacts: &mut Vec<Key>,
    merges: &mut Vec<(Key, Key)>,
) {
    let (p, p2, q, q2) = (e1.a, e1.b, e2.a, e2.b);
    for (u, ku) in [(p, e1.ka), (p2, e1.kb)] {
        for (v, kv) in [(q, e2.ka), (q2, e2.kb)] {
            if ku != kv && (u[0] - v[0]).abs() <= MERGE && (u[1] - v[1]).abs() <= MERGE {
                merges.push((ku, kv));
            }
        }
    }
    let r = sub(p2, p);
    let s = sub(q2, q);
    let (len_r, len_s) = (e1.len, e2.len);
    let cq = cross(r, sub(q, p));
    let cq2 = cross(r, sub(q2, p));
    let tol_r = ON_LINE * len_r;
    if (cq > tol_r && cq2 > tol_r) || (cq < -tol_r && cq2 < -tol_r) {
        return;
    }
    let cp = cross(s, sub(p, q));
    let cp2 = cross(s, sub(p2, q));
    let tol_s = ON_LINE * len_s;
    if (cp > tol_s && cp2 > tol_s) || (cp < -tol_s && cp2 < -tol_s) {
        return;
    }
    let interior = |pt: Point, base: Point, dir: Point, len: f64| {
        let t = dot(sub(pt, base), dir) / (len * len);
        let margin = ON_LINE / len;
        t > margin && t < 1.0 - margin
    };
    let on_q = cq.abs() <= tol_r;
    let on_q2 = cq2.abs() <= tol_r;
    let on_p = cp.abs() <= tol_s;
    let on_p2 = cp2.abs() <= tol_s;

    if on_q || on_q2 || on_p || on_p2 {
        if on_q && interior(q, p, r, len_r) {
            splits.push((i, e2.ka));
            contacts.push(e2.ka);
        }
        if on_q2 && interior(q2, p, r, len_r) {
            splits.push((i, e2.kb));
            contacts.push(e2.kb);
        }
        if on_p && interior(p, q, s, len_s) {
            splits.push((j, e1.ka));
            contacts.push(e1.ka);
        }
        if on_p2 && interior(p2, q, s, len_s) {
            splits.push((j, e1.kb));
            contacts.push(e1.kb);
        }
        return;
    }
    let denom = cross(r, s);
    if denom != 0.0 {
        let t = cross(sub(q, p), s) / denom;
        let k = key([p[0] + t * r[0], p[1] + t * r[1]]);
        if k != e1.ka && k != e1.kb {
            splits.push((i, k));
        }
        if k != e2.ka && k != e2.kb {
            splits.push((j, k));
        }
        contacts.push(k);
    }
}

/// Finds all contacts between edges of different operands using a uniform
/// bucket grid. Each edge is registered in every bucket its padded segment
/// passes through, so long diagonal edges stay cheap.
fn find_intersections(
    edges: &[Edge],
    splits: &mut Vec<(u32, Key)>,
    contacts: &mut Vec<Key>,
    merges: &mut Vec<(Key, Key)>,
) {
    let n = edges.len();
    if n < 2 {
        return;
    }
    let (mut x_lo, mut y_lo, mut x_hi, mut y_hi) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    let mut total_len = 0.0;
    for e in edges {
        x_lo = x_lo.min(e.a[0]).min(e.b[0]);
        x_hi = x_hi.max(e.a[0]).max(e.b[0]);
        y_lo = y_lo.min(e.a[1]).min(e.b[1]);
        y_hi = y_hi.max(e.a[1]).max(e.b[1]);
        total_len += e.len;
    }
    let pad = 4.0 * SNAP;
    x_lo -= 2.0 * pad;
    y_lo -= 2.0 * pad;
    x_hi += 2.0 * pad;
    y_hi += 2.0 * pad;
    let mut cell = (2.0 * total_len / n as f64).max(1e-3);
    let dims = |cell: f64| {
        (
            ((x_hi - x_lo) / cell).ceil() as usize + 1,
            ((y_hi - y_lo) / cell).ceil() as usize + 1,
        )
    };
    let (mut nx, mut ny) = dims(cell);
    let max_cells = 2 * n + 64;
    while nx * ny > max_cells {
        cell *= 1.25;
        (nx, ny) = dims(cell);
    }
    let col = |x: f64| (((x - x_lo) / cell).floor().max(0.0) as usize).min(nx - 1);
    let row = |y: f64| (((y - y_lo) / cell).floor().max(0.0) as usize).min(ny - 1);

    // Bucket membership: for each bucket row, the padded x-extent of the
    // segment within that row's padded y-slab.
    let mut entries: Vec<(u32, u32)> = Vec::with_capacity(2 * n);
    for (i, e) in edges.iter().enumerate() {
        let (ylo, yhi) = (e.a[1].min(e.b[1]), e.a[1].max(e.b[1]));
        let (r0, r1) = (row(ylo - pad), row(yhi + pad));
        let dy = e.b[1] - e.a[1];
        for by in r0..=r1 {
            let (xa, xb) = if r0 == r1 || dy == 0.0 {
                (e.a[0], e.b[0])
            } else {
                let s0 = y_lo + by as f64 * cell - pad;
                let s1 = s0 + cell + 2.0 * pad;
                let ta = ((s0 - e.a[1]) / dy).clamp(0.0, 1.0);
                let tb = ((s1 - e.a[1]) / dy).clamp(0.0, 1.0);
                let dx = e.b[0] - e.a[0];
                (e.a[0] + ta * dx, e.a[0] + tb * dx)
            };
            let (c0, c1) = (col(xa.min(xb) - pad), col(xa.max(xb) + pad));
            for bx in c0..=c1 {
                entries.push(((by * nx + bx) as u32, i as u32));
            }
        }
    }
    // Counting sort by bucket, stable in edge order. Edges are grouped by
    // source, so each bucket's entries come out grouped by source too.
    let mut offsets = vec![0u32; nx * ny + 1];
    for &(bucket, _) in &entries {
        offsets[bucket as usize + 1] += 1;
    }
    for b in 0..nx * ny {
        offsets[b + 1] += offsets[b];
    }
    let mut sorted = vec![0u32; entries.len()];
    {
        let mut fill = offsets.clone();
        for &(bucket, i) in &entries {
            sorted[fill[bucket as usize] as usize] = i;
            fill[bucket as usize] += 1;
        }
    }
    let boxes: Vec<[f64; 4]> = edges
        .iter()
        .map(|e| {
            [
                e.a[0].min(e.b[0]) - pad,
                e.a[1].min(e.b[1]) - pad,
                e.a[0].max(e.b[0]) + pad,
                e.a[1].max(e.b[1]) + pad,
            ]
        })
        .collect();
    for bucket in 0..nx * ny {
        let list = &sorted[offsets[bucket] as usize..offsets[bucket + 1] as usize];
        if list.len() < 2 {
            continue;
        }
        let mid = list.partition_point(|&x| edges[x as usize].src == 0);
        for &i in &list[..mid] {
            let bi = boxes[i as usize];
            for &j in &list[mid..] {
                let bj = boxes[j as usize];
                if bi[2] < bj[0] || bj[2] < bi[0] || bi[3] < bj[1] || bj[3] < bi[1] {
                    continue;
                }
                intersect(i, &edges[i as usize], j, &edges[j as usize], splits, contacts, merges);
            }
        }
    }
    splits.sort_unstable();
    splits.dedup();
}

/// Maps every key in a merge group to the group's smallest key.
fn merge_keys(pairs: &[(Key, Key)]) -> FxHashMap<Key, Key> {
    let mut parent: FxHashMap<Key, Key> = FxHashMap::default();
    fn find(parent: &mut FxHashMap<Key, Key>, k: Key) -> Key {
        let mut root = k;
        while let Some(&p) = parent.get(&root) {
            if p == root {
                break;
            }
            root = p;
        }
        let mut cur = k;
        while cur != root {
            let next = parent[&cur];
            parent.insert(cur, root);
            cur = next;
        }
        root
    }
    for &(a, b) in pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(hi, lo);
            parent.entry(lo).or_insert(lo);
        }
    }
    let keys: Vec<Key> = parent.keys().copied().collect();
    keys.into_iter()
        .map(|k| (k, find(&mut parent, k)))
        .filter(|(k, r)| k != r)
        .collect()
}

/// Applies `op` to two valid regions.
pub fn boolean(a: &Region, b: &Region, op: BoolOp) -> Region {
    // Trivial cases keep the hot path of cascaded unions cheap.
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Region::empty(),
        (true, false) => {
            return match op {
                BoolOp::Union | BoolOp::Xor => b.clone(),
                _ => Region::empty(),
            }
        }
        (false, true) => {
            return match op {
                BoolOp::Intersection => Region::empty(),
                _ => a.clone(),
            }
        }
        _ => {}
    }

    let mut edges = Vec::with_capacity(a.edge_count() + b.edge_count());
    let mut vertex_keys: FxHashSet<Key> = FxHashSet::default();
    let mut contacts: Vec<Key> = Vec::new();
    for (src, region) in [(0u8, a), (1u8, b)] {
        for ring in &region.rings {
            let n = ring.len();
            let mut first = true;
            for i in 0..n {
                let (ka, kb) = (key(ring[i]), key(ring[(i + 1) % n]));
                if src == 0 {
                    vertex_keys.insert(ka);
                } else if vertex_keys.contains(&ka) {
                    contacts.push(ka);
                }
                if ka != kb {
                    let (pa, pb) = (point(ka), point(kb));
                    let d = sub(pb, pa);
                    edges.push(Edge {
                        a: pa,
                        b: pb,
                        ka,
                        kb,
                        len: d[0].hypot(d[1]),
                        src,
                        ring_start: first,
                    });
                    first = false;
                }
            }
        }
    }
    let mut splits = Vec::new();
    let mut merges = Vec::new();
    find_intersections(&edges, &mut splits, &mut contacts, &mut merges);
    let merged = merge_keys(&merges);
    let canon_key = |k: Key| merged.get(&k).copied().unwrap_or(k);
    contacts.extend(merges.iter().flat_map(|&(a, b)| [a, b]));
    let contacts: FxHashSet<Key> = contacts.into_iter().map(canon_key).collect();

    // Split edges into pieces keyed by their unordered endpoints, and record
    // for each piece whether it lies inside the other operand. That status
    // only changes at contact points, so it is inherited along each ring and
    // queried afresh only after a contact.
    let mut ids: FxHashMap<(Key, Key), u32> = FxHashMap::default();
    let mut pieces: Vec<PieceInfo> = Vec::new();
    let mut ring_pieces: Vec<(u32, u8)> = Vec::new();
    let mut pts: Vec<(f64, Key)> = Vec::new();
    let mut cursor = 0;
    for (ei, e) in edges.iter().enumerate() {
        let d = sub(e.b, e.a);
        let dd = dot(d, d);
        pts.clear();
        pts.push((0.0, e.ka));
        while cursor < splits.len() && splits[cursor].0 as usize == ei {
            let k = splits[cursor].1;
            pts.push((dot(sub(point(k), e.a), d) / dd, k));
            cursor += 1;
        }
        pts.push((1.0, e.kb));
        if pts.len() > 2 {
            pts.sort_by(|x, y| x.0.total_cmp(&y.0));
            pts.dedup_by(|x, y| x.1 == y.1);
        }
        for (w, seg) in pts.windows(2).enumerate() {
            let (k0, k1) = (canon_key(seg[0].1), canon_key(seg[1].1));
            if k0 == k1 {
                continue;
            }
            let (canon, sign) = if k0 < k1 { ((k0, k1), 1) } else { ((k1, k0), -1) };
            let id = *ids.entry(canon).or_insert_with(|| {
                pieces.push(PieceInfo {
                    canon,
                    ..Default::default()
                });
                (pieces.len() - 1) as u32
            });
            let info = &mut pieces[id as usize];
            info.count[e.src as usize] += sign;
            info.present[e.src as usize] = true;
            // Flag bit: this piece starts a ring or starts at a contact.
            let fresh = (e.ring_start && w == 0) || contacts.contains(&k0);
            ring_pieces.push((id, e.src | ((fresh as u8) << 1)));
        }
    }

    let mut index: [Option<ParityIndex>; 2] = [None, None];
    let mut query = |s: usize, p: Point| -> bool {
        index[s]
            .get_or_insert_with(|| ParityIndex::new(&edges, s as u8))
            .contains(p)
    };
    let mut state: Option<bool> = None;
    for &(id, tag) in &ring_pieces {
        let own = (tag & 1) as usize;
        let other = 1 - own;
        if tag & 2 != 0 {
            state = None;
        }
        let info = &mut pieces[id as usize];
        if info.present[other] {
            state = None;
            continue;
        }
        let inside = match state {
            Some(v) => v,
            None => {
                let (pa, pb) = (point(info.canon.0), point(info.canon.1));
                let v = query(other, [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                state = Some(v);
                v
            }
        };
        info.inside[other] = Some(inside);
    }

    let mut out_edges: Vec<(Key, Key)> = Vec::new();
    for info in &pieces {
        let canon = info.canon;
        let mut left = [false; 2];
        let mut right = [false; 2];
        for s in 0..2 {
            if info.present[s] && info.count[s] != 0 {
                left[s] = info.count[s] > 0;
                right[s] = !left[s];
            } else if info.present[s] {
                // Opposing edges cancel: probe just off the piece.
                let (pa, pb) = (point(canon.0), point(canon.1));
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                let d = sub(pb, pa);
                let len = d[0].hypot(d[1]);
                let eta = (0.01 * len).min(1e-6);
                let n = [-d[1] / len * eta, d[0] / len * eta];
                left[s] = query(s, [mid[0] + n[0], mid[1] + n[1]]);
                right[s] = query(s, [mid[0] - n[0], mid[1] - n[1]]);
            } else {
                let inside = info.inside[s].expect("classified during ring walk");
                left[s] = inside;
                right[s] = inside;
            }
        }
        let l = op.apply(left[0], left[1]);
        let r = op.apply(right[0], right[1]);
        if l != r {
            out_edges.push(if l { canon } else { (canon.1, canon.0) });
        }
    }
    link_rings(out_edges)
}

/// Links directed boundary pieces (interior on the left) into rings,
/// taking the sharpest left turn at every vertex so that rings touching at
/// a point stay separate.
fn link_rings(mut edges: Vec<(Key, Key)>) -> Region {
    edges.sort_unstable();
    let outgoing = |k: Key| -> std::ops::Range<usize> {
        let lo = edges.partition_point(|e| e.0 < k);
        lo..lo + edges[lo..].partition_point(|e| e.0 == k)
    };
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    let mut ring_keys = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        ring_keys.clear();
        ring_keys.push(edges[start].0);
        let mut current = start;
        let mut closed = false;
        loop {
            let (from, to) = edges[current];
            if to == edges[start].0 {
                closed = true;
                break;
            }
            ring_keys.push(to);
            let cands = outgoing(to);
            let mut free = cands.clone().filter(|&c| !used[c]);
            let next = match (free.next(), free.next()) {
                (None, _) => None,
                (Some(c), None) => Some(c),
                _ => {
                    let d_in = sub(point(to), point(from));
                    cands
                        .filter(|&c| !used[c])
                        .map(|c| {
                            let d_out = sub(point(edges[c].1), point(to));
                            (c, cross(d_in, d_out).atan2(dot(d_in, d_out)))
                        })
                        .max_by(|x, y| x.1.total_cmp(&y.1))
                        .map(|(c, _)| c)
                }
            };
            match next {
                Some(c) => {
                    used[c] = true;
                    current = c;
                }
                None => break,
            }
        }
        if !closed {
            continue;
        }
        let ring = simplify_collinear(ring_keys.iter().map(|&k| point(k)).collect());
        if ring.len() >= 3 && signed_area(&ring).abs() >= MIN_AREA {
            rings.push(ring);
        }
    }
    Region { rings }
}

/// Drops vertices whose neighbours are collinear with them.
fn simplify_collinear(ring: Vec<Point>) -> Vec<Point> {
    let mut pts = ring;
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let a = sub(cur, prev);
            let b = sub(next, cur);
            let la = a[0].hypot(a[1]);
            let lb = b[0].hypot(b[1]);
            let collinear = cross(a, b).abs() <= 1e-12 * la * lb && dot(a, b) > 0.0;
            if !collinear {
                keep.push(cur);
            }
        }
        if keep.len() == n {
            return keep;
        }
        pts = keep;
    }
}

/// Polygon-level helper used by callers that start from closed rings.
pub fn rings_of(region: &Region) -> Vec<Ring> {
    region.rings.iter().map(|r| close_ring(r.clone())).collect()
}
