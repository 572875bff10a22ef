//! Clearance-constrained A* over the voxel grid, shortcut post-processing
//! and heading assignment.
//!
//! Costs are accumulated in integer micro-voxel units so that searches with
//! different expansion orders produce bit-identical totals.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::frames::{Path, Pose, Vec3};
use crate::voxel_map::{CellState, OccupancyMap, VoxelIndex};

/// Integer cost units per voxel of travel.
pub const COST_SCALE: f64 = 1e6;

/// Slack on the clearance comparison, meters.
const CLEARANCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PlanRequest<'a> {
    pub map: &'a OccupancyMap,
    pub start: Pose,
    pub goal: Pose,
    /// Required clearance from occupied voxels, meters.
    pub d_min: f64,
    /// Step-cost multiplier for entering an unknown voxel (at least 1).
    pub unknown_penalty: f64,
    pub timeout: Duration,
}

impl<'a> PlanRequest<'a> {
    pub fn new(map: &'a OccupancyMap, start: Pose, goal: Pose, d_min: f64) -> Self {
        PlanRequest {
            map,
            start,
            goal,
            d_min,
            unknown_penalty: 2.0,
            timeout: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanOutcome {
    Found,
    StartBlocked,
    GoalBlocked,
    Unreachable,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub path: Option<Path>,
    pub outcome: PlanOutcome,
    pub nodes_expanded: usize,
    pub elapsed: f64,
    /// Raw grid cost between the start and goal voxel centers, in integer
    /// units of `1 / COST_SCALE` voxel.
    pub cost_units: Option<u64>,
}

impl PlanResult {
    /// Raw grid cost in meters.
    pub fn cost(&self, resolution: f64) -> Option<f64> {
        self.cost_units.map(|c| c as f64 / COST_SCALE * resolution)
    }
}

/// True when a voxel is not occupied and lies at least `d_min` from every
/// occupied voxel.
pub fn voxel_clear(map: &OccupancyMap, idx: VoxelIndex, d_min: f64) -> bool {
    map.state_at(idx) != CellState::Occupied && map.obs_dist_at(idx) >= d_min - CLEARANCE_EPS
}

/// Clearance test at an arbitrary point (false outside the region).
pub fn point_clear(map: &OccupancyMap, p: &Vec3, d_min: f64) -> bool {
    map.index_of(p).is_some_and(|idx| voxel_clear(map, idx, d_min))
}

/// Nearest clear voxel to `p` within `radius`, ties broken by voxel index.
fn snap_to_clear(map: &OccupancyMap, p: &Vec3, d_min: f64, radius: f64) -> Option<VoxelIndex> {
    if let Some(idx) = map.index_of(p) {
        if voxel_clear(map, idx, d_min) {
            return Some(idx);
        }
    }
    let res = map.resolution();
    let r = (radius / res).ceil() as i64 + 1;
    let c = map.signed_index(p);
    let mut best: Option<(f64, VoxelIndex)> = None;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let Some(idx) = map.checked_index([c[0] + dx, c[1] + dy, c[2] + dz]) else {
                    continue;
                };
                let d = (map.center_of(idx) - p).norm();
                if d > radius || !voxel_clear(map, idx, d_min) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bi)) => d < bd || (d == bd && idx < bi),
                };
                if better {
                    best = Some((d, idx));
                }
            }
        }
    }
    best.map(|(_, idx)| idx)
}

fn step_units(dx: i64, dy: i64, dz: i64, multiplier: f64) -> u64 {
    let len = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
    (len * COST_SCALE * multiplier).round() as u64
}

/// Heuristic in cost units. Every step costs at least
/// `(COST_SCALE - 0.5) * length`, so scaling the Euclidean distance slightly
/// below `COST_SCALE` keeps the estimate admissible and consistent despite
/// per-step rounding.
fn heuristic_units(a: VoxelIndex, b: VoxelIndex) -> u64 {
    let d: f64 = (0..3)
        .map(|k| {
            let v = a[k] as f64 - b[k] as f64;
            v * v
        })
        .sum::<f64>()
        .sqrt();
    (d * (COST_SCALE - 10.0)).floor() as u64
}

/// 26-connected A* from `req.start` to `req.goal`. The returned path runs
/// through voxel centers, with its endpoints replaced by the exact start and
/// goal positions when those were not snapped.
pub fn find_path(req: &PlanRequest<'_>) -> PlanResult {
    let t0 = Instant::now();
    let map = req.map;
    let frame = req.start.frame;
    let fail = |outcome, nodes| PlanResult {
        path: None,
        outcome,
        nodes_expanded: nodes,
        elapsed: t0.elapsed().as_secs_f64(),
        cost_units: None,
    };
    let radius = 2.0 * req.d_min;
    let Some(start) = snap_to_clear(map, &req.start.position, req.d_min, radius) else {
        return fail(PlanOutcome::StartBlocked, 0);
    };
    let Some(goal) = snap_to_clear(map, &req.goal.position, req.d_min, radius) else {
        return fail(PlanOutcome::GoalBlocked, 0);
    };
    let penalty = req.unknown_penalty.max(1.0);
    let dims = map.dims();
    let n = map.voxel_count();
    let mut g = vec![u64::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut clear_cache: Vec<u8> = vec![0; n]; // 0 unknown, 1 clear, 2 blocked
    let mut open = BinaryHeap::new();
    let s = map.linear_index(start);
    g[s] = 0;
    open.push(Reverse((heuristic_units(start, goal), start, 0u64)));
    let mut expanded = 0usize;
    let goal_l = map.linear_index(goal);
    while let Some(Reverse((_, idx, gi))) = open.pop() {
        let l = map.linear_index(idx);
        if closed[l] || gi > g[l] {
            continue;
        }
        closed[l] = true;
        expanded += 1;
        if l == goal_l {
            break;
        }
        if expanded % 4096 == 0 && t0.elapsed() > req.timeout {
            return fail(PlanOutcome::Timeout, expanded);
        }
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let nb = [idx[0] as i64 + dx, idx[1] as i64 + dy, idx[2] as i64 + dz];
                    if nb.iter().zip(dims.iter()).any(|(&v, &d)| v < 0 || v >= d as i64) {
                        continue;
                    }
                    let nb = [nb[0] as usize, nb[1] as usize, nb[2] as usize];
                    let nl = map.linear_index(nb);
                    if closed[nl] {
                        continue;
                    }
                    if clear_cache[nl] == 0 {
                        clear_cache[nl] = if voxel_clear(map, nb, req.d_min) { 1 } else { 2 };
                    }
                    if clear_cache[nl] == 2 {
                        continue;
                    }
                    let mult = if map.state_at(nb) == CellState::Unknown { penalty } else { 1.0 };
                    let ng = gi + step_units(dx, dy, dz, mult);
                    if ng < g[nl] {
                        g[nl] = ng;
                        parent[nl] = l as u32;
                        open.push(Reverse((ng + heuristic_units(nb, goal), nb, ng)));
                    }
                }
            }
        }
    }
    if !closed[goal_l] {
        return fail(PlanOutcome::Unreachable, expanded);
    }
    let mut cells = vec![goal_l];
    while *cells.last().unwrap() != s {
        cells.push(parent[*cells.last().unwrap()] as usize);
    }
    cells.reverse();
    let mut positions: Vec<Vec3> = cells
        .iter()
        .map(|&l| map.center_of(map.voxel_from_linear(l)))
        .collect();
    if map.index_of(&req.start.position) == Some(start) {
        positions[0] = req.start.position;
    }
    if map.index_of(&req.goal.position) == Some(goal) {
        *positions.last_mut().unwrap() = req.goal.position;
    }
    if positions.len() == 2 && positions[0] == positions[1] {
        positions.pop();
    }
    PlanResult {
        path: Some(Path::from_positions(frame, positions)),
        outcome: PlanOutcome::Found,
        nodes_expanded: expanded,
        elapsed: t0.elapsed().as_secs_f64(),
        cost_units: Some(g[goal_l]),
    }
}

/// True when both endpoints lie in the map and every voxel the segment
/// `a`-`b` passes through satisfies the clearance.
pub fn segment_clear(map: &OccupancyMap, a: &Vec3, b: &Vec3, d_min: f64) -> bool {
    if map.index_of(a).is_none() || map.index_of(b).is_none() {
        return false;
    }
    let mut clear = true;
    map.traverse(a, b, |idx, _| {
        clear = voxel_clear(map, idx, d_min);
        clear
    });
    clear
}

/// Greedy shortcutting: from each kept pose jump to the farthest later pose
/// reachable by a clear straight segment, repeated until a pass changes
/// nothing. Endpoints are preserved.
pub fn postprocess(path: &Path, map: &OccupancyMap, d_min: f64) -> Path {
    let mut poses: Vec<Pose> = path.poses().to_vec();
    loop {
        let n = poses.len();
        if n <= 2 {
            break;
        }
        let mut out = vec![poses[0]];
        let mut i = 0;
        while i < n - 1 {
            let mut j = n - 1;
            while j > i + 1 && !segment_clear(map, &poses[i].position, &poses[j].position, d_min) {
                j -= 1;
            }
            out.push(poses[j]);
            i = j;
        }
        let changed = out.len() != poses.len();
        poses = out;
        if !changed {
            break;
        }
    }
    Path::new(path.frame(), poses).expect("poses share the path frame")
}

/// Interior headings follow the outgoing segment in the horizontal plane;
/// the last pose takes `goal_heading`.
pub fn assign_headings(path: &Path, goal_heading: f64) -> Path {
    let mut poses: Vec<Pose> = path.poses().to_vec();
    let n = poses.len();
    let mut prev = goal_heading;
    for i in 0..n.saturating_sub(1) {
        let d = poses[i + 1].position - poses[i].position;
        if d.x != 0.0 || d.y != 0.0 {
            prev = d.y.atan2(d.x);
        }
        poses[i].heading = prev;
    }
    if let Some(last) = poses.last_mut() {
        last.heading = goal_heading;
    }
    Path::new(path.frame(), poses).expect("poses share the path frame")
}

/// Full planning pipeline: search, shortcut, headings toward the goal pose.
pub fn plan(req: &PlanRequest<'_>) -> PlanResult {
    let mut res = find_path(req);
    if let Some(path) = res.path.take() {
        let short = postprocess(&path, req.map, req.d_min);
        res.path = Some(assign_headings(&short, req.goal.heading));
    }
    res
}

/// CSV rows `x,y,z,heading` with a header line.
pub fn path_to_csv(path: &Path) -> String {
    let mut s = String::from("x,y,z,heading\n");
    for p in path.poses() {
        let _ = writeln!(s, "{},{},{},{}", p.position.x, p.position.y, p.position.z, p.heading);
    }
    s
}
