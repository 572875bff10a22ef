//! Spinning lidar model over a [`World`].

use crate::world::World;
use coguide::frames::{Pose, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSpec {
    pub h_beams: usize,
    pub v_beams: usize,
    /// Vertical field of view, symmetric about the horizon.
    pub v_fov: f64,
    pub rate: f64,
    pub max_range: f64,
    pub h_downsample: usize,
    pub v_downsample: usize,
}

impl Default for LidarSpec {
    fn default() -> Self {
        LidarSpec {
            h_beams: 1024,
            v_beams: 128,
            v_fov: PI / 2.0,
            rate: 10.0,
            max_range: 30.0,
            h_downsample: 4,
            v_downsample: 4,
        }
    }
}

impl LidarSpec {
    pub fn used_h(&self) -> usize {
        (self.h_beams / self.h_downsample.max(1)).max(1)
    }

    pub fn used_v(&self) -> usize {
        (self.v_beams / self.v_downsample.max(1)).max(1)
    }

    /// Unit beam directions in the world frame for a sensor with the given
    /// heading, azimuth-major.
    pub fn directions(&self, heading: f64) -> Vec<Vec3> {
        let (nh, nv) = (self.used_h(), self.used_v());
        let mut out = Vec::with_capacity(nh * nv);
        for i in 0..nh {
            let az = heading + 2.0 * PI * i as f64 / nh as f64;
            for j in 0..nv {
                let el = if nv == 1 {
                    0.0
                } else {
                    -self.v_fov / 2.0 + self.v_fov * j as f64 / (nv - 1) as f64
                };
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

/// One scan split into returns and the end points of beams without a return
/// (at `max_range`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scan {
    pub hits: Vec<Vec3>,
    pub misses: Vec<Vec3>,
}

/// Beam returns from `pose`; beams without a return produce no point.
pub fn simulate_lidar(world: &World, pose: &Pose, spec: &LidarSpec) -> Vec<Vec3> {
    simulate_scan(world, pose, spec).hits
}

pub fn simulate_scan(world: &World, pose: &Pose, spec: &LidarSpec) -> Scan {
    let o = pose.position;
    let near = near_world(world, &o, spec.max_range);
    let mut scan = Scan::default();
    for d in spec.directions(pose.heading) {
        match near.ray(&o, &d, spec.max_range) {
            Some(t) => scan.hits.push(o + d * t),
            None => scan.misses.push(o + d * spec.max_range),
        }
    }
    scan
}

/// Subset of the geometry that can be hit within `range` of `o`.
fn near_world(world: &World, o: &Vec3, range: f64) -> World {
    World {
        boxes: world.boxes.iter().filter(|b| b.distance(o) <= range).copied().collect(),
        cylinders: world.cylinders.iter().filter(|c| c.distance(o) <= range).copied().collect(),
    }
}
