//! Bounded ternary occupancy grid.
//!
//! Cells are `Free`, `Occupied` or `Unknown`. Occupied is absorbing: once a
//! voxel has been hit it is never carved back to free. Obstacle distances come
//! from an exact squared Euclidean distance transform that is rebuilt lazily
//! after any mutation.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Vec3;

pub type VoxelIndex = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Free = 0,
    Occupied = 1,
    Unknown = 2,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map geometry: {0}")]
    Geometry(String),
    #[error("voxmap parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct OccupancyMap {
    resolution: f64,
    origin: Vec3,
    dims: [usize; 3],
    cells: Vec<CellState>,
    /// Squared distance (in voxel units) to the nearest occupied voxel.
    distance: OnceLock<Arc<Vec<u32>>>,
}

impl OccupancyMap {
    /// All-unknown map whose minimum corner sits at `origin`.
    pub fn new(resolution: f64, origin: Vec3, dims: [usize; 3]) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Geometry(format!("resolution {resolution} must be positive")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(MapError::Geometry(format!("dims {dims:?} must be nonzero")));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| MapError::Geometry("dims overflow".into()))?;
        Ok(OccupancyMap {
            resolution,
            origin,
            dims,
            cells: vec![CellState::Unknown; n],
            distance: OnceLock::new(),
        })
    }

    /// All-unknown map covering `extent` meters centered on `center`. The
    /// region is snapped so that voxel faces lie on multiples of `resolution`.
    pub fn centered(resolution: f64, center: Vec3, extent: Vec3) -> Result<Self, MapError> {
        let dims = [
            (extent.x / resolution).round().max(1.0) as usize,
            (extent.y / resolution).round().max(1.0) as usize,
            (extent.z / resolution).round().max(1.0) as usize,
        ];
        let origin = Vec3::new(
            ((center.x / resolution) - dims[0] as f64 / 2.0).round() * resolution,
            ((center.y / resolution) - dims[1] as f64 / 2.0).round() * resolution,
            ((center.z / resolution) - dims[2] as f64 / 2.0).round() * resolution,
        );
        OccupancyMap::new(resolution, origin, dims)
    }

    /// Default rolling region: 40 m x 40 m x 20 m.
    pub fn default_region(resolution: f64, center: Vec3) -> Result<Self, MapError> {
        OccupancyMap::centered(resolution, center, Vec3::new(40.0, 40.0, 20.0))
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn center(&self) -> Vec3 {
        self.origin + self.extent() / 2.0
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.dims[0] as f64,
            self.dims[1] as f64,
            self.dims[2] as f64,
        ) * self.resolution
    }

    #[inline]
    fn linear(&self, idx: VoxelIndex) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    /// Flat storage index of a voxel (x fastest).
    pub fn linear_index(&self, idx: VoxelIndex) -> usize {
        self.linear(idx)
    }

    pub fn voxel_from_linear(&self, l: usize) -> VoxelIndex {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [l % nx, (l / nx) % ny, l / (nx * ny)]
    }

    pub fn voxel_count(&self) -> usize {
        self.cells.len()
    }

    /// Signed voxel coordinates of `p`; a point on a face belongs to the
    /// voxel with the larger index.
    #[inline]
    pub fn signed_index(&self, p: &Vec3) -> [i64; 3] {
        let r = (p - self.origin) / self.resolution;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    #[inline]
    pub fn checked_index(&self, idx: [i64; 3]) -> Option<VoxelIndex> {
        if (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a]) {
            Some([idx[0] as usize, idx[1] as usize, idx[2] as usize])
        } else {
            None
        }
    }

    pub fn index_of(&self, p: &Vec3) -> Option<VoxelIndex> {
        self.checked_index(self.signed_index(p))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.index_of(p).is_some()
    }

    #[inline]
    pub fn center_of(&self, idx: VoxelIndex) -> Vec3 {
        self.origin
            + Vec3::new(
                idx[0] as f64 + 0.5,
                idx[1] as f64 + 0.5,
                idx[2] as f64 + 0.5,
            ) * self.resolution
    }

    /// Center of the voxel containing `p`, also for points outside the region.
    pub fn snap(&self, p: &Vec3) -> Vec3 {
        let i = self.signed_index(p);
        self.origin
            + Vec3::new(i[0] as f64 + 0.5, i[1] as f64 + 0.5, i[2] as f64 + 0.5) * self.resolution
    }

    #[inline]
    pub fn state_at(&self, idx: VoxelIndex) -> CellState {
        self.cells[self.linear(idx)]
    }

    /// State of the voxel containing `p`; `Unknown` outside the region.
    pub fn state(&self, p: &Vec3) -> CellState {
        self.index_of(p)
            .map_or(CellState::Unknown, |i| self.state_at(i))
    }

    pub fn set_state(&mut self, idx: VoxelIndex, state: CellState) {
        let l = self.linear(idx);
        if self.cells[l] != state {
            self.cells[l] = state;
            self.invalidate();
        }
    }

    fn invalidate(&mut self) {
        if self.distance.get().is_some() {
            self.distance = OnceLock::new();
        }
    }

    /// Sets every voxel from a classifier evaluated at voxel centers.
    pub fn fill_with(&mut self, mut classify: impl FnMut(Vec3) -> CellState) {
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let c = self.center_of([x, y, z]);
                    let l = self.linear([x, y, z]);
                    self.cells[l] = classify(c);
                }
            }
        }
        self.invalidate();
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Iterates over indices of voxels in `state`.
    pub fn indices_in(&self, state: CellState) -> impl Iterator<Item = VoxelIndex> + '_ {
        let [nx, ny, _] = self.dims;
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == state)
            .map(move |(l, _)| [l % nx, (l / nx) % ny, l / (nx * ny)])
    }

    /// Moves the region so that it is centered (to the nearest voxel) on
    /// `center`. Cells leaving the region are discarded, new cells are unknown.
    pub fn recenter(&mut self, center: &Vec3) {
        let shift = {
            let c = self.center();
            let d = (center - c) / self.resolution;
            [d.x.round() as i64, d.y.round() as i64, d.z.round() as i64]
        };
        if shift == [0, 0, 0] {
            return;
        }
        let mut cells = vec![CellState::Unknown; self.cells.len()];
        let [nx, ny, nz] = self.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let src = [x as i64 + shift[0], y as i64 + shift[1], z as i64 + shift[2]];
                    if let Some(s) = self.checked_index(src) {
                        cells[(z * ny + y) * nx + x] = self.cells[self.linear(s)];
                    }
                }
            }
        }
        self.cells = cells;
        self.origin += Vec3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64) * self.resolution;
        self.distance = OnceLock::new();
    }

    /// Walks the voxels pierced by segment `from -> to` in order, calling
    /// `visit(index, t_enter)` with the segment parameter in `[0, 1]` at which
    /// the voxel is entered. Voxels outside the region are skipped; the walk
    /// stops when `visit` returns `false`.
    pub fn traverse(&self, from: &Vec3, to: &Vec3, mut visit: impl FnMut(VoxelIndex, f64) -> bool) {
        let Some((t0, t1)) = self.clip(from, to) else {
            return;
        };
        let dir = to - from;
        let start = from + dir * t0;
        let end = from + dir * t1;
        let mut cur = self.signed_index(&start);
        let target = self.signed_index(&end);
        // keep the walk inside the clipped box even under rounding
        for a in 0..3 {
            cur[a] = cur[a].clamp(0, self.dims[a] as i64 - 1);
        }
        let target = {
            let mut t = target;
            for a in 0..3 {
                t[a] = t[a].clamp(0, self.dims[a] as i64 - 1);
            }
            t
        };
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            if dir[a] > 0.0 {
                step[a] = 1;
                let boundary = self.origin[a] + (cur[a] + 1) as f64 * self.resolution;
                t_max[a] = (boundary - from[a]) / dir[a];
                t_delta[a] = self.resolution / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                let boundary = self.origin[a] + cur[a] as f64 * self.resolution;
                t_max[a] = (boundary - from[a]) / dir[a];
                t_delta[a] = -self.resolution / dir[a];
            }
        }
        let mut remaining: i64 = (0..3).map(|a| (target[a] - cur[a]).abs()).sum();
        let mut t_enter = t0;
        loop {
            let idx = [cur[0] as usize, cur[1] as usize, cur[2] as usize];
            if !visit(idx, t_enter) || remaining == 0 {
                return;
            }
            // advance along the axis with the nearest boundary that still
            // has distance to cover towards the target voxel
            let mut axis = usize::MAX;
            for a in 0..3 {
                if cur[a] != target[a] && (axis == usize::MAX || t_max[a] < t_max[axis]) {
                    axis = a;
                }
            }
            if axis == usize::MAX {
                return;
            }
            t_enter = t_max[axis].clamp(t0, t1);
            cur[axis] += step[axis];
            t_max[axis] += t_delta[axis];
            remaining -= 1;
        }
    }

    /// Parameter interval of the segment inside the region (slab test).
    fn clip(&self, from: &Vec3, to: &Vec3) -> Option<(f64, f64)> {
        let dir = to - from;
        let hi = self.origin + self.extent();
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for a in 0..3 {
            if dir[a].abs() < 1e-300 {
                if from[a] < self.origin[a] || from[a] >= hi[a] {
                    return None;
                }
            } else {
                let mut ta = (self.origin[a] - from[a]) / dir[a];
                let mut tb = (hi[a] - from[a]) / dir[a];
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// First occupied voxel along `from -> to` together with the point where
    /// the segment enters it.
    pub fn first_hit(&self, from: &Vec3, to: &Vec3) -> Option<(VoxelIndex, Vec3)> {
        let mut hit = None;
        self.traverse(from, to, |idx, t| {
            if self.state_at(idx) == CellState::Occupied {
                hit = Some((idx, from + (to - from) * t));
                false
            } else {
                true
            }
        });
        hit
    }

    /// Center of the first occupied voxel on the segment, or `to` when the
    /// segment is clear.
    pub fn raycast(&self, from: &Vec3, to: &Vec3) -> Vec3 {
        match self.first_hit(from, to) {
            Some((idx, _)) => self.center_of(idx),
            None => *to,
        }
    }

    /// True when no occupied voxel lies on the segment.
    pub fn line_of_sight(&self, from: &Vec3, to: &Vec3) -> bool {
        self.first_hit(from, to).is_none()
    }

    /// Integrates one range scan taken at `origin`. Each hit voxel becomes
    /// occupied; voxels strictly between origin and hit are carved free unless
    /// occupied. Hits beyond `max_range` and the directions in `misses` carve
    /// free space up to `max_range`.
    pub fn integrate_scan(&mut self, origin: &Vec3, hits: &[Vec3], misses: &[Vec3], max_range: f64) {
        let origin_idx = self.signed_index(origin);
        let mut endpoints = Vec::with_capacity(hits.len());
        let carve = |map: &mut OccupancyMap, end: &Vec3, include_end: bool| {
            let end_idx = map.signed_index(end);
            let mut marks = Vec::new();
            map.traverse(origin, end, |idx, _| {
                let signed = [idx[0] as i64, idx[1] as i64, idx[2] as i64];
                if signed != origin_idx && (include_end || signed != end_idx) {
                    marks.push(idx);
                }
                true
            });
            for idx in marks {
                let l = map.linear(idx);
                if map.cells[l] == CellState::Unknown {
                    map.cells[l] = CellState::Free;
                }
            }
        };
        for hit in hits {
            let d = hit - origin;
            let dist = d.norm();
            if dist > max_range {
                if dist > 0.0 {
                    carve(self, &(origin + d * (max_range / dist)), true);
                }
            } else {
                carve(self, hit, false);
                endpoints.push(*hit);
            }
        }
        for dir in misses {
            let n = dir.norm();
            if n > 0.0 && max_range > 0.0 {
                carve(self, &(origin + dir * (max_range / n)), true);
            }
        }
        for hit in endpoints {
            if let Some(idx) = self.index_of(&hit) {
                let l = self.linear(idx);
                self.cells[l] = CellState::Occupied;
            }
        }
        self.invalidate();
    }

    /// Independent copy with an axis-aligned occupied block: `width` x `width`
    /// footprint, `height` tall, centered on `center`.
    pub fn add_obstacle_box(&self, center: &Vec3, width: f64, height: f64) -> OccupancyMap {
        let mut out = self.clone();
        out.insert_box(center, Vec3::new(width, width, height));
        out
    }

    /// Marks the block of `round(size / res)` voxels per axis nearest to
    /// being centered on `center` as occupied.
    pub fn insert_box(&mut self, center: &Vec3, size: Vec3) {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            let n = (size[a] / self.resolution).round().max(1.0) as i64;
            let c = (center[a] - self.origin[a]) / self.resolution;
            lo[a] = (c - n as f64 / 2.0).round() as i64;
            hi[a] = lo[a] + n;
            lo[a] = lo[a].max(0);
            hi[a] = hi[a].min(self.dims[a] as i64);
        }
        if (0..3).any(|a| lo[a] >= hi[a]) {
            return;
        }
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    let l = self.linear([x as usize, y as usize, z as usize]);
                    self.cells[l] = CellState::Occupied;
                }
            }
        }
        self.invalidate();
    }

    fn distance_field(&self) -> &Arc<Vec<u32>> {
        self.distance
            .get_or_init(|| Arc::new(squared_distance_transform(&self.cells, self.dims)))
    }

    /// Forces the distance transform to be built now.
    pub fn prepare(&self) {
        self.distance_field();
    }

    /// Squared voxel-unit distance to the nearest occupied voxel center, or
    /// `None` when the map has no occupied voxel.
    pub fn squared_voxel_distance(&self, idx: VoxelIndex) -> Option<u32> {
        let d = self.distance_field()[self.linear(idx)];
        (d != UNREACHED).then_some(d)
    }

    pub fn obs_dist_at(&self, idx: VoxelIndex) -> f64 {
        match self.squared_voxel_distance(idx) {
            Some(d) => (d as f64).sqrt() * self.resolution,
            None => f64::INFINITY,
        }
    }

    /// Distance from the center of the voxel containing `p` to the nearest
    /// occupied voxel center. Points outside the region report 0.
    pub fn obs_dist(&self, p: &Vec3) -> f64 {
        match self.index_of(p) {
            Some(idx) => self.obs_dist_at(idx),
            None => 0.0,
        }
    }

    /// Text dump: header line plus one `x y z state` line per known voxel.
    pub fn to_voxmap(&self) -> String {
        let mut s = format!(
            "voxmap v1 {} {} {} {} {} {} {}\n",
            self.resolution,
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.dims[0],
            self.dims[1],
            self.dims[2]
        );
        let [nx, ny, _] = self.dims;
        for (l, c) in self.cells.iter().enumerate() {
            if *c != CellState::Unknown {
                let _ = writeln!(s, "{} {} {} {}", l % nx, (l / nx) % ny, l / (nx * ny), *c as u8);
            }
        }
        s
    }

    pub fn from_voxmap(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapError::Parse { line: 1, msg: "empty input".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 9 || fields[0] != "voxmap" || fields[1] != "v1" {
            return Err(MapError::Parse { line: 1, msg: "expected `voxmap v1 <res> <ox> <oy> <oz> <nx> <ny> <nz>`".into() });
        }
        let num = |i: usize| -> Result<f64, MapError> {
            fields[i].parse().map_err(|_| MapError::Parse { line: 1, msg: format!("bad number `{}`", fields[i]) })
        };
        let dim = |i: usize| -> Result<usize, MapError> {
            fields[i].parse().map_err(|_| MapError::Parse { line: 1, msg: format!("bad extent `{}`", fields[i]) })
        };
        let mut map = OccupancyMap::new(
            num(2)?,
            Vec3::new(num(3)?, num(4)?, num(5)?),
            [dim(6)?, dim(7)?, dim(8)?],
        )?;
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<i64> = line
                .split_whitespace()
                .map(|f| f.parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| MapError::Parse { line: n + 1, msg: e.to_string() })?;
            if v.len() != 4 {
                return Err(MapError::Parse { line: n + 1, msg: "expected `x y z state`".into() });
            }
            let idx = map
                .checked_index([v[0], v[1], v[2]])
                .ok_or(MapError::Parse { line: n + 1, msg: "index outside map".into() })?;
            let state = match v[3] {
                0 => CellState::Free,
                1 => CellState::Occupied,
                2 => CellState::Unknown,
                s => return Err(MapError::Parse { line: n + 1, msg: format!("bad state {s}") }),
            };
            let l = map.linear(idx);
            map.cells[l] = state;
        }
        Ok(map)
    }
}

/// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher,
/// separable lower envelope of parabolas) to the nearest occupied cell.
fn squared_distance_transform(cells: &[CellState], dims: [usize; 3]) -> Vec<u32> {
    const INF: f64 = 1e20;
    let [nx, ny, nz] = dims;
    let mut f: Vec<f64> = cells
        .iter()
        .map(|&c| if c == CellState::Occupied { 0.0 } else { INF })
        .collect();
    if f.iter().all(|&v| v >= INF) {
        return vec![UNREACHED; cells.len()];
    }
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut v = vec![0usize; longest];
    let mut z = vec![0.0; longest + 1];
    // (line length, stride, outer extents, axis)
    let axes: [(usize, usize, usize, usize, usize); 3] = [
        (nx, 1, ny, nz, 0),
        (ny, nx, nx, nz, 1),
        (nz, nx * ny, nx, ny, 2),
    ];
    for &(len, stride, na, nb, axis) in &axes {
        for b in 0..nb {
            for a in 0..na {
                let base = match axis {
                    0 => (b * ny + a) * nx,
                    1 => b * nx * ny + a,
                    _ => b * nx + a,
                };
                for i in 0..len {
                    line[i] = f[base + i * stride];
                }
                transform_line(&line[..len], &mut out[..len], &mut v, &mut z);
                for i in 0..len {
                    f[base + i * stride] = out[i];
                }
            }
        }
    }
    f.into_iter()
        .map(|d| if d >= INF { UNREACHED } else { d as u32 })
        .collect()
}

fn transform_line(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            // z[0] is -inf, so this never pops below the first parabola
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_map(n: usize) -> OccupancyMap {
        OccupancyMap::new(0.1, Vec3::zeros(), [n, n, n]).unwrap()
    }

    #[test]
    fn fresh_map_is_unknown() {
        let m = unit_map(8);
        assert_eq!(m.count(CellState::Unknown), 512);
        assert_eq!(m.state(&Vec3::new(-1.0, 0.0, 0.0)), CellState::Unknown);
        assert_eq!(m.obs_dist(&Vec3::new(0.35, 0.35, 0.35)), f64::INFINITY);
        assert!(OccupancyMap::new(0.0, Vec3::zeros(), [1, 1, 1]).is_err());
    }

    #[test]
    fn voxel_center_formula() {
        let m = OccupancyMap::new(0.25, Vec3::new(1.0, -2.0, 0.5), [4, 4, 4]).unwrap();
        let c = m.center_of([1, 2, 3]);
        assert!((c - Vec3::new(1.375, -1.375, 1.375)).norm() < 1e-12);
        assert_eq!(m.index_of(&c), Some([1, 2, 3]));
    }

    #[test]
    fn face_tie_goes_to_larger_index() {
        let m = OccupancyMap::new(0.5, Vec3::zeros(), [4, 4, 4]).unwrap();
        assert_eq!(m.index_of(&Vec3::new(1.0, 0.25, 0.25)), Some([2, 0, 0]));
        assert_eq!(m.index_of(&Vec3::new(0.5, 1.5, 1.0)), Some([1, 3, 2]));
        // the upper boundary face belongs to the (absent) next voxel
        assert_eq!(m.index_of(&Vec3::new(2.0, 0.25, 0.25)), None);
    }

    #[test]
    fn empty_scan_is_noop() {
        let mut m = unit_map(8);
        let before = m.to_voxmap();
        m.integrate_scan(&Vec3::new(0.05, 0.05, 0.05), &[], &[], 0.0);
        assert_eq!(m.to_voxmap(), before);
    }

    #[test]
    fn single_hit_carves_between() {
        let mut m = OccupancyMap::new(0.1, Vec3::zeros(), [20, 3, 3]).unwrap();
        let o = Vec3::new(0.05, 0.15, 0.15);
        m.integrate_scan(&o, &[Vec3::new(1.05, 0.15, 0.15)], &[], 5.0);
        assert_eq!(m.state_at([10, 1, 1]), CellState::Occupied);
        // integer walk oracle: indices strictly between 0 and 10 on the x axis
        for i in 1..10 {
            assert_eq!(m.state_at([i, 1, 1]), CellState::Free, "voxel {i}");
        }
        assert_eq!(m.count(CellState::Free), 9);
        assert_eq!(m.count(CellState::Occupied), 1);
    }

    #[test]
    fn occupied_wins_within_one_scan() {
        let mut m = OccupancyMap::new(0.1, Vec3::zeros(), [20, 3, 3]).unwrap();
        let o = Vec3::new(0.05, 0.15, 0.15);
        // the first hit lies on the carve path of the second
        m.integrate_scan(&o, &[Vec3::new(0.55, 0.15, 0.15), Vec3::new(1.55, 0.15, 0.15)], &[], 5.0);
        assert_eq!(m.state_at([5, 1, 1]), CellState::Occupied);
        assert_eq!(m.state_at([15, 1, 1]), CellState::Occupied);
        // and later carving never clears it
        m.integrate_scan(&o, &[], &[Vec3::new(1.0, 0.0, 0.0)], 1.8);
        assert_eq!(m.state_at([5, 1, 1]), CellState::Occupied);
        assert_eq!(m.state_at([16, 1, 1]), CellState::Free);
    }

    #[test]
    fn far_hits_only_carve() {
        let mut m = OccupancyMap::new(0.1, Vec3::zeros(), [40, 3, 3]).unwrap();
        m.integrate_scan(&Vec3::new(0.05, 0.15, 0.15), &[Vec3::new(3.05, 0.15, 0.15)], &[], 1.0);
        assert_eq!(m.count(CellState::Occupied), 0);
        assert_eq!(m.state_at([10, 1, 1]), CellState::Free);
        assert_eq!(m.state_at([11, 1, 1]), CellState::Unknown);
    }

    #[test]
    fn obstacle_box_sizes() {
        let m = unit_map(20);
        let c = m.center_of([5, 5, 5]);
        let one = m.add_obstacle_box(&c, 0.1, 0.1);
        assert_eq!(one.count(CellState::Occupied), 1);
        assert_eq!(one.state_at([5, 5, 5]), CellState::Occupied);
        let column = m.add_obstacle_box(&c, 0.1, 0.5);
        assert_eq!(column.count(CellState::Occupied), 5);
        assert!((3..8).all(|z| column.state_at([5, 5, z]) == CellState::Occupied));
        // copy independence
        assert_eq!(m.count(CellState::Occupied), 0);
    }

    #[test]
    fn obstacle_box_table_values() {
        let m = OccupancyMap::new(0.1, Vec3::zeros(), [30, 30, 120]).unwrap();
        let c = m.center_of([15, 15, 60]);
        let boxed = m.add_obstacle_box(&c, 1.5, 10.0);
        assert_eq!(boxed.count(CellState::Occupied), 15 * 15 * 100);
        // an even count centered on a voxel center rounds the half voxel upward
        assert_eq!(boxed.state_at([8, 8, 11]), CellState::Occupied);
        assert_eq!(boxed.state_at([22, 22, 110]), CellState::Occupied);
        assert_eq!(boxed.state_at([7, 15, 60]), CellState::Unknown);
        assert_eq!(boxed.state_at([15, 15, 10]), CellState::Unknown);
        assert_eq!(boxed.state_at([15, 15, 111]), CellState::Unknown);
    }

    #[test]
    fn raycast_cases() {
        let mut m = OccupancyMap::new(0.1, Vec3::zeros(), [80, 10, 10]).unwrap();
        let from = Vec3::new(0.05, 0.55, 0.55);
        let to = Vec3::new(6.05, 0.55, 0.55);
        assert_eq!(m.raycast(&from, &to), to);
        // wall plane at x in [2.0, 2.1)
        for y in 0..10 {
            for z in 0..10 {
                m.set_state([20, y, z], CellState::Occupied);
            }
        }
        let hit = m.raycast(&from, &to);
        assert!((hit.x - 2.0).abs() <= 0.05 + 1e-12);
        assert!((hit.x - 2.05).abs() < 1e-12);
        let (_, entry) = m.first_hit(&from, &to).unwrap();
        assert!((entry.x - 2.0).abs() < 1e-9);
        // blocked at origin
        let inside = Vec3::new(2.04, 0.51, 0.52);
        assert!((m.raycast(&inside, &to) - m.center_of([20, 5, 5])).norm() < 1e-12);
    }

    #[test]
    fn obs_dist_axis() {
        let mut m = unit_map(32);
        m.set_state([20, 5, 5], CellState::Occupied);
        assert!((m.obs_dist(&m.center_of([10, 5, 5])) - 1.0).abs() < 1e-12);
        assert_eq!(m.obs_dist(&m.center_of([20, 5, 5])), 0.0);
        // mutation invalidates the cached transform
        m.set_state([12, 5, 5], CellState::Occupied);
        assert!((m.obs_dist(&m.center_of([10, 5, 5])) - 0.2).abs() < 1e-12);
    }

    fn brute_sq(m: &OccupancyMap, occ: &[VoxelIndex], idx: VoxelIndex) -> Option<u32> {
        occ.iter()
            .map(|o| {
                (0..3)
                    .map(|a| {
                        let d = o[a] as i64 - idx[a] as i64;
                        (d * d) as u32
                    })
                    .sum()
            })
            .min()
            .filter(|_| !occ.is_empty() && m.dims()[0] > 0)
    }

    #[test]
    fn edt_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let n = 32;
            let mut m = unit_map(n);
            let density = [0.0005, 0.003, 0.02, 0.1][case % 4];
            for z in 0..n {
                for y in 0..n {
                    for x in 0..n {
                        if rng.gen::<f64>() < density {
                            m.set_state([x, y, z], CellState::Occupied);
                        }
                    }
                }
            }
            let occ: Vec<VoxelIndex> = m.indices_in(CellState::Occupied).collect();
            // exhaustive check is O(n^3 * |occ|); sample cells for the dense cases
            let stride = if occ.len() > 500 { 7 } else { 1 };
            let mut l = 0usize;
            for z in 0..n {
                for y in 0..n {
                    for x in 0..n {
                        l += 1;
                        if l % stride != 0 {
                            continue;
                        }
                        assert_eq!(
                            m.squared_voxel_distance([x, y, z]),
                            brute_sq(&m, &occ, [x, y, z]),
                            "case {case} at {:?}",
                            [x, y, z]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn voxmap_round_trip() {
        let mut m = OccupancyMap::new(0.1, Vec3::new(-1.5, 2.0, 0.3), [5, 6, 7]).unwrap();
        m.set_state([1, 2, 3], CellState::Occupied);
        m.set_state([4, 5, 6], CellState::Free);
        let text = m.to_voxmap();
        assert!(text.starts_with("voxmap v1 0.1 -1.5 2 0.3 5 6 7\n"));
        let back = OccupancyMap::from_voxmap(&text).unwrap();
        assert_eq!(back.to_voxmap(), text);
        assert!(OccupancyMap::from_voxmap("voxmap v2 1 0 0 0 1 1 1").is_err());
        assert!(OccupancyMap::from_voxmap("voxmap v1 1 0 0 0 1 1 1\n5 0 0 1").is_err());
    }

    #[test]
    fn recenter_keeps_overlap() {
        let mut m = OccupancyMap::new(1.0, Vec3::zeros(), [10, 10, 2]).unwrap();
        m.set_state([7, 7, 0], CellState::Occupied);
        m.set_state([1, 1, 0], CellState::Occupied);
        m.recenter(&Vec3::new(8.0, 8.0, 1.0));
        assert_eq!(m.origin(), Vec3::new(3.0, 3.0, 0.0));
        assert_eq!(m.state(&Vec3::new(7.5, 7.5, 0.5)), CellState::Occupied);
        assert_eq!(m.state(&Vec3::new(1.5, 1.5, 0.5)), CellState::Unknown);
        assert_eq!(m.count(CellState::Occupied), 1);
    }
}
