//! Static worlds of axis-aligned boxes and vertical cylinders with analytic
//! ray casting and point-to-geometry distance.

use coguide::frames::Vec3;
use coguide::voxel_map::{CellState, OccupancyMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min: min.inf(&max), max: min.sup(&max) }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = Vec3::from_fn(|a, _| (self.min[a] - p[a]).max(p[a] - self.max[a]).max(0.0));
        d.norm()
    }

    /// Entry parameter of the ray `o + t d` (slab method); `0` when the
    /// origin is inside.
    pub fn ray(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            if d[a] == 0.0 {
                if o[a] < self.min[a] || o[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[a];
            let mut ta = (self.min[a] - o[a]) * inv;
            let mut tb = (self.max[a] - o[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Vertical cylinder (tree trunk).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Cylinder {
    pub fn distance(&self, p: &Vec3) -> f64 {
        let dr = (((p.x - self.x).powi(2) + (p.y - self.y).powi(2)).sqrt() - self.radius).max(0.0);
        let dz = (self.z_min - p.z).max(p.z - self.z_max).max(0.0);
        (dr * dr + dz * dz).sqrt()
    }

    pub fn ray(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let ox = o.x - self.x;
        let oy = o.y - self.y;
        let r2 = self.radius * self.radius;
        let in_z = |t: f64| {
            let z = o.z + t * d.z;
            z >= self.z_min && z <= self.z_max
        };
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t >= 0.0 && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        let a = d.x * d.x + d.y * d.y;
        let c = ox * ox + oy * oy - r2;
        if c <= 0.0 && in_z(0.0) {
            return Some(0.0);
        }
        if a > 0.0 {
            let b = ox * d.x + oy * d.y;
            let disc = b * b - a * c;
            if disc >= 0.0 {
                let t = (-b - disc.sqrt()) / a;
                if in_z(t) {
                    consider(t);
                }
            }
        }
        if d.z != 0.0 {
            for zc in [self.z_min, self.z_max] {
                let t = (zc - o.z) / d.z;
                let x = ox + t * d.x;
                let y = oy + t * d.y;
                if x * x + y * y <= r2 {
                    consider(t);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct World {
    pub boxes: Vec<Aabb>,
    pub cylinders: Vec<Cylinder>,
}

impl World {
    /// Nearest ray hit within `max_range` along unit direction `dir`.
    pub fn ray(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<f64> {
        let boxes = self.boxes.iter().filter_map(|b| b.ray(origin, dir));
        let cyl = self.cylinders.iter().filter_map(|c| c.ray(origin, dir));
        boxes.chain(cyl).filter(|&t| t <= max_range).min_by(f64::total_cmp)
    }

    /// Distance from `p` to the nearest obstacle surface, `0` inside.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let b = self.boxes.iter().map(|b| b.distance(p));
        let c = self.cylinders.iter().map(|c| c.distance(p));
        b.chain(c).fold(f64::INFINITY, f64::min)
    }

    /// Writes the ground-truth occupancy into `map`: a voxel is occupied iff
    /// its cube overlaps an obstacle with positive volume, free otherwise.
    pub fn rasterize(&self, map: &mut OccupancyMap) {
        let res = map.resolution();
        let o = map.origin();
        let dims = map.dims();
        map.fill_with(|_| CellState::Free);
        let range = |lo: f64, hi: f64, a: usize| {
            let i0 = ((lo - o[a]) / res).floor().max(0.0) as usize;
            let i1 = ((hi - o[a]) / res).ceil().min(dims[a] as f64).max(0.0) as usize;
            i0..i1
        };
        let mut set = Vec::new();
        for b in &self.boxes {
            for z in range(b.min.z, b.max.z, 2) {
                for y in range(b.min.y, b.max.y, 1) {
                    for x in range(b.min.x, b.max.x, 0) {
                        let lo = o + Vec3::new(x as f64, y as f64, z as f64) * res;
                        let hi = lo + Vec3::repeat(res);
                        if (0..3).all(|a| lo[a] < b.max[a] && hi[a] > b.min[a]) {
                            set.push([x, y, z]);
                        }
                    }
                }
            }
        }
        for c in &self.cylinders {
            for z in range(c.z_min, c.z_max, 2) {
                for y in range(c.y - c.radius, c.y + c.radius, 1) {
                    for x in range(c.x - c.radius, c.x + c.radius, 0) {
                        let lo = o + Vec3::new(x as f64, y as f64, z as f64) * res;
                        let hi = lo + Vec3::repeat(res);
                        let nx = c.x.clamp(lo.x, hi.x);
                        let ny = c.y.clamp(lo.y, hi.y);
                        let inside = (nx - c.x).powi(2) + (ny - c.y).powi(2) < c.radius * c.radius;
                        if inside && lo.z < c.z_max && hi.z > c.z_min {
                            set.push([x, y, z]);
                        }
                    }
                }
            }
        }
        for idx in set {
            map.set_state(idx, CellState::Occupied);
        }
    }
}

/// Layout of the two-room gap world.
pub mod gap_layout {
    /// Room depth along x, each side of the dividing wall.
    pub const ROOM_DEPTH: f64 = 10.0;
    /// Room width along y.
    pub const ROOM_WIDTH: f64 = 8.0;
    pub const ROOM_HEIGHT: f64 = 5.0;
    pub const WALL: f64 = 0.2;
}

/// Gap width `2 d_s + 1.5 res`.
pub fn gap_width(d_s: f64, res: f64) -> f64 {
    2.0 * d_s + 1.5 * res
}

/// Two rooms (x < 0 and x > 0) separated by a wall in the plane x = 0 with a
/// full-height gap of width `2 d_s + 1.5 res` centered at y = 0.
pub fn make_gap_world(d_s: f64, res: f64) -> World {
    make_gap_world_with_width(gap_width(d_s, res))
}

pub fn make_gap_world_with_width(w_g: f64) -> World {
    let mut w = rooms();
    let t = gap_layout::WALL / 2.0;
    let half = gap_layout::ROOM_WIDTH / 2.0;
    let h = gap_layout::ROOM_HEIGHT;
    w.boxes.push(Aabb::new(Vec3::new(-t, -half, 0.0), Vec3::new(t, -w_g / 2.0, h)));
    w.boxes.push(Aabb::new(Vec3::new(-t, w_g / 2.0, 0.0), Vec3::new(t, half, h)));
    w
}

/// The same two rooms with no dividing wall.
pub fn make_open_world() -> World {
    rooms()
}

fn rooms() -> World {
    let d = gap_layout::ROOM_DEPTH;
    let half = gap_layout::ROOM_WIDTH / 2.0;
    let h = gap_layout::ROOM_HEIGHT;
    let t = gap_layout::WALL;
    World {
        boxes: vec![
            Aabb::new(Vec3::new(-d - t, -half - t, -t), Vec3::new(d + t, half + t, 0.0)),
            Aabb::new(Vec3::new(-d - t, -half - t, h), Vec3::new(d + t, half + t, h + t)),
            Aabb::new(Vec3::new(-d - t, -half - t, 0.0), Vec3::new(-d, half + t, h)),
            Aabb::new(Vec3::new(d, -half - t, 0.0), Vec3::new(d + t, half + t, h)),
            Aabb::new(Vec3::new(-d, -half - t, 0.0), Vec3::new(d, -half, h)),
            Aabb::new(Vec3::new(-d, half, 0.0), Vec3::new(d, half + t, h)),
        ],
        cylinders: Vec::new(),
    }
}

/// Forest sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    /// Trees per square meter.
    pub density: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Side of the square area centered on the origin.
    pub area_side: f64,
    /// No tree surface closer than this to the origin.
    pub start_clearance: f64,
    pub tree_height: f64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            density: 0.05,
            radius_min: 0.1,
            radius_max: 0.3,
            area_side: 50.0,
            start_clearance: 2.0,
            tree_height: 8.0,
        }
    }
}

/// Poisson forest with a ground slab, deterministic per seed. Returns the
/// world and the number of trees sampled before the start-area filter.
pub fn make_forest_world(seed: u64, spec: &ForestSpec) -> (World, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spec.area_side / 2.0;
    let mut world = World {
        boxes: vec![Aabb::new(Vec3::new(-half, -half, -0.2), Vec3::new(half, half, 0.0))],
        cylinders: Vec::new(),
    };
    let mean = spec.density * spec.area_side * spec.area_side;
    if mean <= 0.0 {
        return (world, 0);
    }
    let n = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    for _ in 0..n {
        let x = rng.gen_range(-half..half);
        let y = rng.gen_range(-half..half);
        let radius = if spec.radius_max > spec.radius_min {
            rng.gen_range(spec.radius_min..spec.radius_max)
        } else {
            spec.radius_min
        };
        if (x * x + y * y).sqrt() - radius < spec.start_clearance {
            continue;
        }
        world.cylinders.push(Cylinder { x, y, radius, z_min: 0.0, z_max: spec.tree_height });
    }
    (world, n)
}
