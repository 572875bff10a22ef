//! Planar polygon kernel: non-convex polygons with holes, boolean set
//! operations, polyline buffering and pole of inaccessibility.
//!
//! Boolean operations snap every coordinate to a 1e-7 m grid, subdivide all
//! edges at their mutual intersections, and keep a sub-edge iff the result
//! membership differs on its two sides. Kept edges are linked into rings,
//! rings are split at self-touching vertices and holes are assigned to the
//! smallest enclosing outer ring.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Snapping grid for boolean operations, meters.
pub const SNAP: f64 = 1e-7;

/// Upper bound on subdivision passes in a boolean operation.
const MAX_SUBDIVIDE_PASSES: usize = 8;

/// Number of segments approximating a disc in [`buffer_polyline`].
pub const DISC_SEGMENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("operation requires a nonempty multipolygon")]
    EmptyMultiPolygon,
    #[error("operation requires at least one point")]
    NoPoints,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Signed area of a closed ring (counterclockwise positive). The closing
/// edge is implicit.
pub fn ring_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

fn ring_perimeter(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| (ring[(i + 1) % n] - ring[i]).norm()).sum()
}

/// Crossing-number parity of `p` against one ring.
fn ring_crossings(ring: &[Vec2], p: &Vec2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x > p.x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn ring_distance(ring: &[Vec2], p: &Vec2) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| segment_distance(p, &ring[i], &ring[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// A polygon with counterclockwise outer ring and clockwise holes. Rings are
/// stored without repeating the first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub outer: Vec<Vec2>,
    pub holes: Vec<Vec<Vec2>>,
}

impl Polygon {
    /// Builds a polygon, normalizing ring orientation and dropping a
    /// repeated closing vertex.
    pub fn new(outer: Vec<Vec2>, holes: Vec<Vec<Vec2>>) -> Self {
        let mut outer = open_ring(outer);
        if ring_area(&outer) < 0.0 {
            outer.reverse();
        }
        let holes = holes
            .into_iter()
            .map(|h| {
                let mut h = open_ring(h);
                if ring_area(&h) > 0.0 {
                    h.reverse();
                }
                h
            })
            .filter(|h| h.len() >= 3)
            .collect();
        Polygon { outer, holes }
    }

    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Polygon::new(
            vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
            vec![],
        )
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Vec2>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn area(&self) -> f64 {
        ring_area(&self.outer) + self.holes.iter().map(|h| ring_area(h)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.rings().map(|r| ring_perimeter(r)).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(|r| r.len()).sum()
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        self.rings().fold(false, |acc, r| acc ^ ring_crossings(r, p))
    }

    /// Distance to the nearest boundary segment of any ring.
    pub fn boundary_distance(&self, p: &Vec2) -> f64 {
        self.rings()
            .map(|r| ring_distance(r, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary distance, negative outside.
    pub fn signed_distance(&self, p: &Vec2) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        bbox_of(self.outer.iter())
    }
}

fn open_ring(mut ring: Vec<Vec2>) -> Vec<Vec2> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

fn bbox_of<'a>(pts: impl Iterator<Item = &'a Vec2>) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Collection of interior-disjoint polygons. Empty is the empty set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiPolygon {
    pub parts: Vec<Polygon>,
}

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        if p.outer.len() < 3 || p.area() <= 0.0 {
            MultiPolygon::empty()
        } else {
            MultiPolygon { parts: vec![p] }
        }
    }
}

impl MultiPolygon {
    pub fn empty() -> Self {
        MultiPolygon { parts: Vec::new() }
    }

    pub fn new(parts: Vec<Polygon>) -> Self {
        MultiPolygon { parts }
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::area).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.parts.iter().map(Polygon::perimeter).sum()
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        self.parts.iter().any(|q| q.contains(p))
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.iter().map(Polygon::vertex_count).sum()
    }

    pub fn bbox(&self) -> Option<(Vec2, Vec2)> {
        if self.is_empty() {
            return None;
        }
        Some(bbox_of(self.parts.iter().flat_map(|p| p.outer.iter())))
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<Vec2>> {
        self.parts.iter().flat_map(|p| p.rings())
    }
}

/// `0` inside any part, otherwise the distance to the nearest boundary.
pub fn distance_to(p: &Vec2, m: &MultiPolygon) -> Result<f64, GeometryError> {
    if m.is_empty() {
        return Err(GeometryError::EmptyMultiPolygon);
    }
    if m.contains(p) {
        return Ok(0.0);
    }
    Ok(m.rings()
        .map(|r| ring_distance(r, p))
        .fold(f64::INFINITY, f64::min))
}

// ---------------------------------------------------------------------------
// Boolean operations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BooleanOp {
    Union,
    Intersection,
    Difference,
}

impl BooleanOp {
    fn keep(self, in_a: bool, in_b: bool) -> bool {
        match self {
            BooleanOp::Union => in_a || in_b,
            BooleanOp::Intersection => in_a && in_b,
            BooleanOp::Difference => in_a && !in_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct IPt {
    x: i64,
    y: i64,
}

impl IPt {
    fn snap(p: &Vec2) -> IPt {
        IPt {
            x: (p.x / SNAP).round() as i64,
            y: (p.y / SNAP).round() as i64,
        }
    }

    fn to_f(self) -> Vec2 {
        Vec2::new(self.x as f64 * SNAP, self.y as f64 * SNAP)
    }
}

#[inline]
fn orient(a: IPt, b: IPt, c: IPt) -> i128 {
    let abx = (b.x - a.x) as i128;
    let aby = (b.y - a.y) as i128;
    let acx = (c.x - a.x) as i128;
    let acy = (c.y - a.y) as i128;
    abx * acy - aby * acx
}

/// True when `p` (collinear with `a`-`b`) lies strictly between them.
#[inline]
fn strictly_inside(a: IPt, b: IPt, p: IPt) -> bool {
    let dx = (b.x - a.x) as i128;
    let dy = (b.y - a.y) as i128;
    let t = (p.x - a.x) as i128 * dx + (p.y - a.y) as i128 * dy;
    t > 0 && t < dx * dx + dy * dy
}

/// Exact crossing-parity index over a fixed set of snapped edges, bucketed
/// in horizontal bands.
struct ParityIndex {
    y0: i64,
    band: i64,
    bands: Vec<Vec<(IPt, IPt)>>,
}

impl ParityIndex {
    fn new(edges: impl Iterator<Item = (IPt, IPt)>) -> Self {
        let edges: Vec<(IPt, IPt)> = edges.filter(|(a, b)| a.y != b.y).collect();
        let Some(lo) = edges.iter().map(|(a, b)| a.y.min(b.y)).min() else {
            return ParityIndex { y0: 0, band: 1, bands: Vec::new() };
        };
        let hi = edges.iter().map(|(a, b)| a.y.max(b.y)).max().unwrap_or(lo);
        let count = ((edges.len() as f64).sqrt().ceil() as i64).clamp(1, 512);
        let band = ((hi - lo) / count + 1).max(1);
        let mut bands = vec![Vec::new(); count as usize + 1];
        for (a, b) in edges {
            let i0 = ((a.y.min(b.y) - lo) / band) as usize;
            let i1 = ((a.y.max(b.y) - lo) / band) as usize;
            for bucket in &mut bands[i0..=i1] {
                bucket.push((a, b));
            }
        }
        ParityIndex { y0: lo, band, bands }
    }

    /// Membership of the point infinitely close to the midpoint of `p`-`q`,
    /// on its left. Other edges must not pass through that midpoint.
    fn contains_left_of(&self, p: IPt, q: IPt) -> bool {
        // doubled midpoint, so every quantity stays integral
        let mx = p.x as i128 + q.x as i128;
        let my = p.y as i128 + q.y as i128;
        let (dx, dy) = ((q.x - p.x) as i128, (q.y - p.y) as i128);
        let f = (my / 2 - self.y0 as i128).div_euclid(self.band as i128);
        if self.bands.is_empty() || f < 0 || f >= self.bands.len() as i128 {
            return false;
        }
        // the probe sits at midpoint + t (-dy, dx) for infinitesimal t > 0;
        // an endpoint exactly level with the midpoint is above the probe iff
        // the probe moved down
        let above = |y: i64| {
            let y2 = 2 * y as i128;
            y2 > my || (y2 == my && dx < 0)
        };
        let mut inside = false;
        for &(a, b) in &self.bands[f as usize] {
            if above(a.y) == above(b.y) {
                continue;
            }
            let coincident = (a == p && b == q) || (a == q && b == p);
            let crosses = if coincident {
                // the probe is on the -x side of its own edge iff it points up
                dy > 0
            } else {
                // sign of (crossing x - midpoint x) at the midpoint height
                let (ex, ey) = ((b.x - a.x) as i128, (b.y - a.y) as i128);
                let num = (2 * a.x as i128 - mx) * ey + (my - 2 * a.y as i128) * ex;
                if ey > 0 { num > 0 } else { num < 0 }
            };
            inside ^= crosses;
        }
        inside
    }
}

fn snapped_edges(m: &MultiPolygon) -> Vec<(IPt, IPt)> {
    let mut out = Vec::new();
    for ring in m.rings() {
        let pts: Vec<IPt> = ring.iter().map(IPt::snap).collect();
        let n = pts.len();
        if n < 3 {
            continue;
        }
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            if a != b {
                out.push((a, b));
            }
        }
    }
    out
}

/// Splits every edge at all intersection and touching points with every
/// other edge. Each sub-edge keeps the direction and tag of its parent.
/// Returns the sub-edges and whether any edge was split.
fn subdivide(edges: &[(IPt, IPt, u8)]) -> (Vec<(IPt, IPt, u8)>, bool) {
    let n = edges.len();
    let mut splits: Vec<Vec<IPt>> = vec![Vec::new(); n];
    let mut order: Vec<usize> = (0..n).collect();
    let minx = |e: &(IPt, IPt, u8)| e.0.x.min(e.1.x);
    let maxx = |e: &(IPt, IPt, u8)| e.0.x.max(e.1.x);
    order.sort_by_key(|&i| (minx(&edges[i]), i));
    for (oi, &i) in order.iter().enumerate() {
        let (p1, q1, _) = edges[i];
        let hi_x = maxx(&edges[i]);
        let (ylo, yhi) = (p1.y.min(q1.y), p1.y.max(q1.y));
        for &j in &order[oi + 1..] {
            let (p2, q2, _) = edges[j];
            if minx(&edges[j]) > hi_x {
                break;
            }
            if p2.y.max(q2.y) < ylo || p2.y.min(q2.y) > yhi {
                continue;
            }
            let o1 = orient(p1, q1, p2);
            let o2 = orient(p1, q1, q2);
            let o3 = orient(p2, q2, p1);
            let o4 = orient(p2, q2, q1);
            if o1 == 0 && strictly_inside(p1, q1, p2) {
                splits[i].push(p2);
            }
            if o2 == 0 && strictly_inside(p1, q1, q2) {
                splits[i].push(q2);
            }
            if o3 == 0 && strictly_inside(p2, q2, p1) {
                splits[j].push(p1);
            }
            if o4 == 0 && strictly_inside(p2, q2, q1) {
                splits[j].push(q1);
            }
            let proper = o1 != 0
                && o2 != 0
                && o3 != 0
                && o4 != 0
                && (o1 > 0) != (o2 > 0)
                && (o3 > 0) != (o4 > 0);
            if proper {
                let d1x = (q1.x - p1.x) as f64;
                let d1y = (q1.y - p1.y) as f64;
                // o3 = cross(q2 - p2, p1 - p2); t along edge i
                let t = o3 as f64 / (o3 as f64 - o4 as f64);
                let x = (p1.x as f64 + t * d1x).round() as i64;
                let y = (p1.y as f64 + t * d1y).round() as i64;
                let pt = IPt { x, y };
                if pt != p1 && pt != q1 {
                    splits[i].push(pt);
                }
                if pt != p2 && pt != q2 {
                    splits[j].push(pt);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(n * 2);
    let mut split = false;
    for (i, &(p, q, tag)) in edges.iter().enumerate() {
        let s = &mut splits[i];
        let dx = (q.x - p.x) as i128;
        let dy = (q.y - p.y) as i128;
        s.sort_by_key(|pt| (pt.x - p.x) as i128 * dx + (pt.y - p.y) as i128 * dy);
        s.dedup();
        let mut prev = p;
        for &pt in s.iter().chain(std::iter::once(&q)) {
            if pt != prev {
                out.push((prev, pt, tag));
                prev = pt;
            }
        }
    }
    split |= out.len() != n;
    (out, split)
}

/// Boolean set operation on two multipolygons.
pub fn boolean_op(kind: BooleanOp, a: &MultiPolygon, b: &MultiPolygon) -> MultiPolygon {
    match kind {
        BooleanOp::Intersection if a.is_empty() || b.is_empty() => return MultiPolygon::empty(),
        BooleanOp::Difference if a.is_empty() => return MultiPolygon::empty(),
        _ => {}
    }
    let mut edges: Vec<(IPt, IPt, u8)> = snapped_edges(a).into_iter().map(|(p, q)| (p, q, 0)).collect();
    edges.extend(snapped_edges(b).into_iter().map(|(p, q)| (p, q, 1)));
    // rounded split points can create crossings the previous pass did not
    // see, so subdivide until nothing changes
    for _ in 0..MAX_SUBDIVIDE_PASSES {
        let (next, split) = subdivide(&edges);
        edges = next;
        if !split {
            break;
        }
    }
    // membership is judged against the subdivided rings themselves, exactly,
    // so arbitrarily thin slivers are classified correctly
    let ia = ParityIndex::new(edges.iter().filter(|e| e.2 == 0).map(|e| (e.0, e.1)));
    let ib = ParityIndex::new(edges.iter().filter(|e| e.2 == 1).map(|e| (e.0, e.1)));
    let mut sub: Vec<(IPt, IPt)> = edges.iter().map(|&(p, q, _)| if p < q { (p, q) } else { (q, p) }).collect();
    sub.sort_unstable();
    sub.dedup();
    let mut kept = Vec::new();
    for (p, q) in sub {
        let in_left = kind.keep(ia.contains_left_of(p, q), ib.contains_left_of(p, q));
        let in_right = kind.keep(ia.contains_left_of(q, p), ib.contains_left_of(q, p));
        match (in_left, in_right) {
            (true, false) => kept.push((p, q)),
            (false, true) => kept.push((q, p)),
            _ => {}
        }
    }
    assemble(kept)
}

pub fn union(a: &MultiPolygon, b: &MultiPolygon) -> MultiPolygon {
    boolean_op(BooleanOp::Union, a, b)
}

pub fn intersection(a: &MultiPolygon, b: &MultiPolygon) -> MultiPolygon {
    boolean_op(BooleanOp::Intersection, a, b)
}

pub fn difference(a: &MultiPolygon, b: &MultiPolygon) -> MultiPolygon {
    boolean_op(BooleanOp::Difference, a, b)
}

/// Links directed boundary edges (interior on the left) into rings and
/// builds polygons from them.
fn assemble(edges: Vec<(IPt, IPt)>) -> MultiPolygon {
    let mut outgoing: HashMap<IPt, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        outgoing.entry(e.0).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut rings: Vec<Vec<IPt>> = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let origin = edges[start].0;
        let mut ring = vec![origin];
        let mut cur = start;
        let closed = loop {
            let (u, v) = edges[cur];
            if v == origin {
                break true;
            }
            ring.push(v);
            let cands: Vec<usize> = outgoing
                .get(&v)
                .map(|c| c.iter().copied().filter(|&k| !used[k]).collect())
                .unwrap_or_default();
            let next = match cands.len() {
                0 => break false,
                1 => cands[0],
                _ => {
                    // first candidate clockwise from the reverse of the
                    // incoming edge: the tightest left turn
                    let back = (u.y - v.y) as f64;
                    let back = back.atan2((u.x - v.x) as f64);
                    *cands
                        .iter()
                        .min_by(|&&a, &&b| {
                            let ang = |k: usize| {
                                let w = edges[k].1;
                                let a = ((w.y - v.y) as f64).atan2((w.x - v.x) as f64);
                                let mut cw = back - a;
                                while cw <= 0.0 {
                                    cw += 2.0 * PI;
                                }
                                while cw > 2.0 * PI {
                                    cw -= 2.0 * PI;
                                }
                                cw
                            };
                            ang(a).partial_cmp(&ang(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b))
                        })
                        .unwrap()
                }
            };
            used[next] = true;
            cur = next;
        };
        if closed {
            rings.extend(split_at_repeats(ring));
        }
    }
    build_polygons(rings)
}

/// Splits a ring that revisits a vertex into simple sub-rings.
fn split_at_repeats(ring: Vec<IPt>) -> Vec<Vec<IPt>> {
    let mut out = Vec::new();
    let mut path: Vec<IPt> = Vec::with_capacity(ring.len());
    let mut pos: HashMap<IPt, usize> = HashMap::new();
    for v in ring {
        if let Some(&k) = pos.get(&v) {
            let tail = path.split_off(k + 1);
            for t in &tail {
                pos.remove(t);
            }
            let mut sub = Vec::with_capacity(tail.len() + 1);
            sub.push(v);
            sub.extend(tail);
            out.push(sub);
        } else {
            pos.insert(v, path.len());
            path.push(v);
        }
    }
    out.push(path);
    out.into_iter()
        .map(remove_collinear)
        .filter(|r| r.len() >= 3)
        .collect()
}

fn remove_collinear(mut ring: Vec<IPt>) -> Vec<IPt> {
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let keep: Vec<bool> = (0..n)
            .map(|i| orient(ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]) != 0)
            .collect();
        if keep.iter().all(|&k| k) {
            return ring;
        }
        // drop every other redundant vertex per pass so neighbors are re-tested
        let mut skip_next = false;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if !keep[i] && !skip_next {
                skip_next = true;
                continue;
            }
            skip_next = false;
            out.push(ring[i]);
        }
        ring = out;
    }
}

fn iring_area2(ring: &[IPt]) -> i128 {
    let n = ring.len();
    let mut s: i128 = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a.x as i128 * b.y as i128 - b.x as i128 * a.y as i128;
    }
    s
}

fn build_polygons(rings: Vec<Vec<IPt>>) -> MultiPolygon {
    let mut outers: Vec<(i128, Vec<Vec2>)> = Vec::new();
    let mut holes: Vec<Vec<IPt>> = Vec::new();
    for r in rings {
        let a2 = iring_area2(&r);
        match a2.cmp(&0) {
            Ordering::Greater => outers.push((a2, r.iter().map(|p| p.to_f()).collect())),
            Ordering::Less => holes.push(r),
            Ordering::Equal => {}
        }
    }
    let mut parts: Vec<Polygon> = outers
        .iter()
        .map(|(_, r)| Polygon { outer: r.clone(), holes: Vec::new() })
        .collect();
    for h in holes {
        // a point just on the material side of the first hole edge
        let a = h[0].to_f();
        let b = h[1].to_f();
        let d = b - a;
        let eps = (0.01 * d.norm()).min(1e-6);
        let probe = (a + b) / 2.0 + Vec2::new(-d.y, d.x).normalize() * eps;
        let owner = outers
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| ring_crossings(r, &probe))
            .min_by_key(|(_, (a2, _))| *a2)
            .map(|(i, _)| i);
        if let Some(i) = owner {
            parts[i].holes.push(h.iter().map(|p| p.to_f()).collect());
        }
    }
    MultiPolygon { parts }
}

/// Union of axis-aligned grid cells, merged into maximal polygons. `cell`
/// reports whether cell `(i, j)` of an `nx` x `ny` raster is set; cell
/// `(i, j)` covers `origin + [i, i+1] x [j, j+1] * size`.
pub fn raster_union(
    origin: Vec2,
    size: f64,
    nx: usize,
    ny: usize,
    cell: impl Fn(usize, usize) -> bool,
) -> MultiPolygon {
    let corner = |i: usize, j: usize| IPt::snap(&(origin + Vec2::new(i as f64, j as f64) * size));
    let set = |i: i64, j: i64| i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && cell(i as usize, j as usize);
    let mut edges = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !cell(i, j) {
                continue;
            }
            let (ii, jj) = (i as i64, j as i64);
            // counterclockwise around the cell, emitted only on the region border
            if !set(ii, jj - 1) {
                edges.push((corner(i, j), corner(i + 1, j)));
            }
            if !set(ii + 1, jj) {
                edges.push((corner(i + 1, j), corner(i + 1, j + 1)));
            }
            if !set(ii, jj + 1) {
                edges.push((corner(i + 1, j + 1), corner(i, j + 1)));
            }
            if !set(ii - 1, jj) {
                edges.push((corner(i, j + 1), corner(i, j)));
            }
        }
    }
    assemble(edges)
}

/// Marks the cells of an `nx` x `ny` raster whose centers lie inside `m`
/// (even-odd rule); `mask[j * nx + i]` covers
/// `origin + [i, i+1] x [j, j+1] * size`.
pub fn rasterize_centers(m: &MultiPolygon, origin: Vec2, size: f64, nx: usize, ny: usize, mask: &mut [bool]) {
    let rings: Vec<&Vec<Vec2>> = m.rings().collect();
    let mut xs: Vec<f64> = Vec::new();
    for j in 0..ny {
        let y = origin.y + (j as f64 + 0.5) * size;
        xs.clear();
        for r in &rings {
            let n = r.len();
            for k in 0..n {
                let a = r[k];
                let b = r[(k + 1) % n];
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        for pair in xs.chunks_exact(2) {
            // centers strictly inside (pair[0], pair[1])
            let lo = ((pair[0] - origin.x) / size - 0.5).floor() as i64 + 1;
            let hi = ((pair[1] - origin.x) / size - 0.5).ceil() as i64 - 1;
            let lo = lo.max(0);
            let hi = hi.min(nx as i64 - 1);
            for i in lo..=hi {
                mask[j * nx + i as usize] = true;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Buffering

fn disc(center: &Vec2, d: f64) -> Vec<Vec2> {
    // circumscribed, so the polygon contains the true disc
    let r = d / (PI / DISC_SEGMENTS as f64).cos();
    (0..DISC_SEGMENTS)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / DISC_SEGMENTS as f64;
            center + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect()
}

/// Counterclockwise convex hull (monotone chain) without collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vec2, a: &Vec2, b: &Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Minkowski sum of a polyline with a disc of radius `d` (32-gon, round
/// caps and joins).
pub fn buffer_polyline(points: &[Vec2], d: f64) -> Result<MultiPolygon, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::NoPoints);
    }
    if !(d > 0.0) {
        return Err(GeometryError::InvalidParameter("buffer distance must be positive"));
    }
    let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last().map_or(true, |q: &Vec2| (q - p).norm() > SNAP) {
            pts.push(*p);
        }
    }
    if pts.len() == 1 {
        return Ok(Polygon::new(disc(&pts[0], d), vec![]).into());
    }
    let mut pieces: Vec<MultiPolygon> = pts
        .windows(2)
        .map(|w| {
            let mut both = disc(&w[0], d);
            both.extend(disc(&w[1], d));
            MultiPolygon::from(Polygon::new(convex_hull(&both), vec![]))
        })
        .collect();
    // balanced pairwise union keeps intermediate rings small
    while pieces.len() > 1 {
        let mut next = Vec::with_capacity(pieces.len().div_ceil(2));
        let mut it = pieces.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(union(&a, &b)),
                None => next.push(a),
            }
        }
        pieces = next;
    }
    Ok(pieces.pop().unwrap_or_default())
}

// ---------------------------------------------------------------------------
// Pole of inaccessibility

struct Cell {
    center: Vec2,
    half: f64,
    dist: f64,
    potential: f64,
}

impl Cell {
    fn new(center: Vec2, half: f64, poly: &Polygon) -> Cell {
        let dist = poly.signed_distance(&center);
        Cell {
            center,
            half,
            dist,
            potential: dist + half * std::f64::consts::SQRT_2,
        }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.potential == other.potential
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.potential
            .partial_cmp(&other.potential)
            .unwrap_or(Ordering::Equal)
    }
}

/// Interior point farthest from the boundary (holes included), found by
/// quadtree subdivision with upper-bound pruning. Returns the point and its
/// clearance; the clearance is within `precision` of the true maximum.
pub fn pole_of_inaccessibility(poly: &Polygon, precision: f64) -> Result<(Vec2, f64), GeometryError> {
    if !(precision > 0.0) {
        return Err(GeometryError::InvalidParameter("precision must be positive"));
    }
    if poly.outer.len() < 3 {
        return Err(GeometryError::InvalidParameter("polygon has fewer than three vertices"));
    }
    let (lo, hi) = poly.bbox();
    let size = hi - lo;
    let cell_size = size.x.min(size.y);
    if cell_size <= 0.0 {
        return Ok((poly.outer[0], 0.0));
    }
    let half = cell_size / 2.0;
    let mut queue = BinaryHeap::new();
    let mut x = lo.x;
    while x < hi.x {
        let mut y = lo.y;
        while y < hi.y {
            queue.push(Cell::new(Vec2::new(x + half, y + half), half, poly));
            y += cell_size;
        }
        x += cell_size;
    }
    let mut best = Cell::new(centroid(&poly.outer), 0.0, poly);
    let bbox_cell = Cell::new(lo + size / 2.0, 0.0, poly);
    if bbox_cell.dist > best.dist {
        best = bbox_cell;
    }
    while let Some(cell) = queue.pop() {
        if cell.dist > best.dist {
            best = Cell { ..cell };
            best.half = 0.0;
        }
        if cell.potential - best.dist <= precision {
            continue;
        }
        let h = cell.half / 2.0;
        for (dx, dy) in [(-h, -h), (h, -h), (-h, h), (h, h)] {
            queue.push(Cell::new(cell.center + Vec2::new(dx, dy), h, poly));
        }
    }
    Ok((best.center, best.dist.max(0.0)))
}

fn centroid(ring: &[Vec2]) -> Vec2 {
    let n = ring.len();
    let mut a = 0.0;
    let mut c = Vec2::zeros();
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let f = p.x * q.y - q.x * p.y;
        c += (p + q) * f;
        a += f * 3.0;
    }
    if a == 0.0 {
        ring[0]
    } else {
        c / a
    }
}

// ---------------------------------------------------------------------------
// SVG debug output

/// Renders named multipolygon layers (plus optional polylines) into one SVG
/// document, y axis pointing up.
pub fn svg_layers(layers: &[(&str, &MultiPolygon, &str)], lines: &[(&str, &[Vec2], &str)]) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, m, _) in layers {
        if let Some((a, b)) = m.bbox() {
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
    }
    for (_, pts, _) in lines {
        for p in pts.iter() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    if !lo.x.is_finite() {
        lo = Vec2::zeros();
        hi = Vec2::new(1.0, 1.0);
    }
    let pad = 0.5;
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        lo.x - pad,
        -(hi.y + pad),
        w,
        h,
        (w * 40.0).round(),
        (h * 40.0).round()
    );
    for (name, m, color) in layers {
        let _ = writeln!(s, r#"<g id="{name}" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="0.02">"#);
        for p in &m.parts {
            let mut d = String::new();
            for ring in p.rings() {
                for (i, v) in ring.iter().enumerate() {
                    let _ = write!(d, "{}{:.4},{:.4} ", if i == 0 { "M" } else { "L" }, v.x, -v.y);
                }
                d.push_str("Z ");
            }
            let _ = writeln!(s, r#"<path fill-rule="evenodd" d="{}"/>"#, d.trim_end());
        }
        s.push_str("</g>\n");
    }
    for (name, pts, color) in lines {
        let coords: Vec<String> = pts.iter().map(|v| format!("{:.4},{:.4}", v.x, -v.y)).collect();
        let _ = writeln!(
            s,
            r#"<polyline id="{name}" fill="none" stroke="{color}" stroke-width="0.05" points="{}"/>"#,
            coords.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
