//! Cooperative planning for the primary/secondary pair: guiding-viewpoint
//! selection on polygon regions, the planning step, re-expression of the
//! secondary's path in its body frame, and the mission state machine.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{apply_path, FrameMismatch, Path, Pose, Transform4Dof, Vec3};
use crate::planner::{plan, PlanRequest};
use crate::poly2d::{
    buffer_polyline, difference, distance_to, intersection, pole_of_inaccessibility, raster_union,
    rasterize_centers, svg_layers, MultiPolygon, Polygon, Vec2,
};
use crate::voxel_map::OccupancyMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("invalid guidance parameter: {0}")]
    InvalidParameter(String),
}

/// Tunables of the planning and guiding loop. Distances in meters, rates in
/// hertz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceParams {
    /// Footprint width of the occupied box inserted at the primary.
    pub w_p: f64,
    pub h_p: f64,
    /// Footprint width of the occupied box inserted at the secondary.
    pub w_s: f64,
    pub h_s: f64,
    /// Primary obstacle clearance.
    pub d_p: f64,
    /// Secondary obstacle clearance.
    pub d_s: f64,
    /// Rays per visibility region.
    pub n_samples: usize,
    pub d_ray: f64,
    /// Keep-out radius around the secondary's path for the viewpoint.
    pub d_buffer: f64,
    /// Distance under which a leading waypoint counts as visited.
    pub delta: f64,
    pub replan_rate: f64,
    pub guide_rate: f64,
    /// Re-send the remaining path at `guide_rate`; when false the path is
    /// sent once.
    pub periodic_guiding: bool,
    pub unknown_penalty: f64,
    pub plan_timeout: f64,
    /// Pole-of-inaccessibility precision; `None` means half the map
    /// resolution.
    pub poi_precision: Option<f64>,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        GuidanceParams {
            w_p: 1.5,
            h_p: 10.0,
            w_s: 1.3,
            h_s: 10.0,
            d_p: 0.9,
            d_s: 0.8,
            n_samples: 500,
            d_ray: 6.0,
            d_buffer: 2.0,
            delta: 0.5,
            replan_rate: 1.0,
            guide_rate: 5.0,
            periodic_guiding: true,
            unknown_penalty: 2.0,
            plan_timeout: 10.0,
            poi_precision: None,
        }
    }
}

impl GuidanceParams {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        let positive = [
            ("w_p", self.w_p),
            ("h_p", self.h_p),
            ("w_s", self.w_s),
            ("h_s", self.h_s),
            ("d_p", self.d_p),
            ("d_s", self.d_s),
            ("d_ray", self.d_ray),
            ("d_buffer", self.d_buffer),
            ("delta", self.delta),
            ("replan_rate", self.replan_rate),
            ("guide_rate", self.guide_rate),
            ("plan_timeout", self.plan_timeout),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GuidanceError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_samples < 8 {
            return Err(GuidanceError::InvalidParameter(format!(
                "n_samples must be at least 8, got {}",
                self.n_samples
            )));
        }
        if !(self.unknown_penalty >= 1.0) {
            return Err(GuidanceError::InvalidParameter("unknown_penalty must be at least 1".into()));
        }
        if let Some(p) = self.poi_precision {
            if !(p > 0.0) {
                return Err(GuidanceError::InvalidParameter("poi_precision must be positive".into()));
            }
        }
        Ok(())
    }

    fn precision(&self, map: &OccupancyMap) -> f64 {
        self.poi_precision.unwrap_or(map.resolution() / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    Idle,
    Planning,
    PrimaryMoving,
    SecondaryMoving,
    GoalReached,
    Failure,
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FsmState::Idle => "IDLE",
            FsmState::Planning => "PLANNING",
            FsmState::PrimaryMoving => "PRIMARY_MOVING",
            FsmState::SecondaryMoving => "SECONDARY_MOVING",
            FsmState::GoalReached => "GOAL_REACHED",
            FsmState::Failure => "FAILURE",
        })
    }
}

/// Planner memory: state plus the active paths and viewpoint, all in the
/// local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceState {
    pub fsm: FsmState,
    pub path_p: Option<Path>,
    pub path_s: Option<Path>,
    pub viewpoint: Option<Vec3>,
    pub goal: Option<Pose>,
}

impl Default for GuidanceState {
    fn default() -> Self {
        GuidanceState {
            fsm: FsmState::Idle,
            path_p: None,
            path_s: None,
            viewpoint: None,
            goal: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Regions

fn xy(p: &Vec3) -> Vec2 {
    Vec2::new(p.x, p.y)
}

/// Star-shaped region seen from `waypoint` within `d_ray`, at the waypoint's
/// altitude: vertices are the first occupied-voxel entry points (or ray ends)
/// of `n_samples` equiangular horizontal rays, in angular order. A waypoint
/// inside an occupied voxel yields a degenerate polygon.
pub fn visibility_region(map: &OccupancyMap, waypoint: &Pose, params: &GuidanceParams) -> Polygon {
    let p = waypoint.position;
    let n = params.n_samples;
    let mut ring: Vec<Vec2> = Vec::with_capacity(n);
    for k in 0..n {
        let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let end = p + Vec3::new(a.cos(), a.sin(), 0.0) * params.d_ray;
        let hit = match map.first_hit(&p, &end) {
            Some((_, entry)) => entry,
            None => end,
        };
        let v = xy(&hit);
        if ring.last() != Some(&v) {
            ring.push(v);
        }
    }
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    Polygon { outer: ring, holes: Vec::new() }
}

/// Merged voxel squares at altitude `z` whose centers have obstacle distance
/// above `d_p` and lie in the union of `vis`.
pub fn safe_region(map: &OccupancyMap, z: f64, d_p: f64, vis: &[MultiPolygon]) -> MultiPolygon {
    let res = map.resolution();
    let o = map.origin();
    let [nx, ny, nz] = map.dims();
    let kz = ((z - o.z) / res).floor();
    if kz < 0.0 || kz >= nz as f64 {
        return MultiPolygon::empty();
    }
    let kz = kz as usize;
    let origin = Vec2::new(o.x, o.y);
    let mut inside = vec![false; nx * ny];
    for v in vis {
        rasterize_centers(v, origin, res, nx, ny, &mut inside);
    }
    let mask: Vec<bool> = (0..nx * ny)
        .map(|l| inside[l] && map.obs_dist_at([l % nx, l / nx, kz]) > d_p)
        .collect();
    raster_union(origin, res, nx, ny, |i, j| mask[j * nx + i])
}

/// Number of leading waypoints of `path` with unobstructed line of sight
/// from `from`, each ray cast at the waypoint's altitude and no longer than
/// `max_range` when given.
pub fn los_prefix(map: &OccupancyMap, from: &Vec2, path: &Path, max_range: Option<f64>) -> usize {
    path.poses()
        .iter()
        .take_while(|w| {
            let a = Vec3::new(from.x, from.y, w.position.z);
            let in_range = max_range.is_none_or(|r| (a - w.position).norm() <= r);
            in_range && map.line_of_sight(&a, &w.position)
        })
        .count()
}

/// Every intermediate product of the viewpoint search, kept for inspection.
#[derive(Debug, Clone, Default)]
pub struct ViewpointSearch {
    pub viewpoint: Option<Vec3>,
    /// Keep-out buffer around the secondary's path.
    pub buffer: MultiPolygon,
    /// Visibility region of each waypoint minus the buffer.
    pub visibility: Vec<MultiPolygon>,
    pub safe: MultiPolygon,
    pub safe_closest: MultiPolygon,
    /// Safe region intersected with the longest run of visibility regions.
    pub intersection: MultiPolygon,
    /// How many visibility regions the intersection covers.
    pub covered: usize,
    /// True when the pole-of-inaccessibility candidate failed validation and
    /// a grid cell of the intersection was used instead.
    pub used_fallback: bool,
}

impl ViewpointSearch {
    /// SVG with one layer per region.
    pub fn to_svg(&self, path: &Path) -> String {
        let union_v = self
            .visibility
            .iter()
            .fold(MultiPolygon::empty(), |acc, v| crate::poly2d::union(&acc, v));
        let pts: Vec<Vec2> = path.positions().map(|p| xy(&p)).collect();
        let vp: Vec<Vec2> = self.viewpoint.iter().map(xy).collect();
        let mut lines: Vec<(&str, &[Vec2], &str)> = vec![("path_S", &pts, "red")];
        if !vp.is_empty() {
            lines.push(("g_P", &vp, "black"));
        }
        svg_layers(
            &[
                ("V_all", &union_v, "#3a7bd5"),
                ("B", &self.buffer, "#d53a3a"),
                ("S", &self.safe, "#3ad56b"),
                ("I_all", &self.intersection, "#d5a33a"),
            ],
            &lines,
        )
    }
}

fn viewpoint_valid(map: &OccupancyMap, p: &Vec3, buffer: &MultiPolygon, wp0: &Vec3, d_p: f64) -> bool {
    map.index_of(p).is_some_and(|idx| map.obs_dist_at(idx) > d_p)
        && !buffer.contains(&xy(p))
        && map.line_of_sight(p, wp0)
}

/// Guiding viewpoint for the primary, at its current altitude: the pole of
/// inaccessibility (nearest the primary) of the closest safe region
/// intersected with as many consecutive waypoint visibility regions as
/// possible, starting from the first waypoint.
pub fn find_guiding_viewpoint(
    map: &OccupancyMap,
    path_s: &Path,
    x_p: &Vec3,
    params: &GuidanceParams,
) -> ViewpointSearch {
    let mut out = ViewpointSearch::default();
    let pts: Vec<Vec2> = path_s.positions().map(|p| xy(&p)).collect();
    let Ok(buffer) = buffer_polyline(&pts, params.d_buffer) else {
        return out;
    };
    map.prepare();
    out.visibility = path_s
        .poses()
        .iter()
        .map(|w| difference(&MultiPolygon::from(visibility_region(map, w, params)), &buffer))
        .collect();
    out.buffer = buffer;
    out.safe = safe_region(map, x_p.z, params.d_p, &out.visibility);
    let here = xy(x_p);
    let closest = out
        .safe
        .parts
        .iter()
        .map(|part| {
            let d = distance_to(&here, &MultiPolygon::new(vec![part.clone()])).unwrap_or(f64::INFINITY);
            (d, part)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let Some((_, closest)) = closest else {
        return out;
    };
    out.safe_closest = MultiPolygon::new(vec![closest.clone()]);
    let mut inter = out.safe_closest.clone();
    for v in &out.visibility {
        let next = intersection(&inter, v);
        if next.is_empty() {
            break;
        }
        inter = next;
        out.covered += 1;
    }
    if out.covered == 0 {
        return out;
    }
    out.intersection = inter;
    let precision = params.precision(map);
    let mut poles: Vec<(f64, Vec2)> = out
        .intersection
        .parts
        .iter()
        .filter_map(|part| pole_of_inaccessibility(part, precision).ok())
        .filter(|(_, clearance)| *clearance > 0.0)
        .map(|(p, _)| ((p - here).norm(), p))
        .collect();
    poles.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.x.total_cmp(&b.1.x))
            .then(a.1.y.total_cmp(&b.1.y))
    });
    let wp0 = path_s.first().expect("nonempty path").position;
    let lift = |p: &Vec2| Vec3::new(p.x, p.y, x_p.z);
    if let Some((_, p)) = poles
        .iter()
        .find(|(_, p)| viewpoint_valid(map, &lift(p), &out.buffer, &wp0, params.d_p))
    {
        out.viewpoint = Some(lift(p));
        return out;
    }
    // the nearest pole failed a point check; fall back to the valid grid cell
    // of the intersection closest to it
    let anchor = poles.first().map(|(_, p)| *p).unwrap_or(here);
    let res = map.resolution();
    let o = map.origin();
    let [nx, ny, _] = map.dims();
    let mut mask = vec![false; nx * ny];
    rasterize_centers(&out.intersection, Vec2::new(o.x, o.y), res, nx, ny, &mut mask);
    let mut cells: Vec<(f64, usize)> = (0..nx * ny)
        .filter(|&l| mask[l])
        .map(|l| {
            let c = Vec2::new(o.x + ((l % nx) as f64 + 0.5) * res, o.y + ((l / nx) as f64 + 0.5) * res);
            ((c - anchor).norm(), l)
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, l) in cells {
        let c = Vec2::new(o.x + ((l % nx) as f64 + 0.5) * res, o.y + ((l / nx) as f64 + 0.5) * res);
        if viewpoint_valid(map, &lift(&c), &out.buffer, &wp0, params.d_p) {
            out.viewpoint = Some(lift(&c));
            out.used_fallback = true;
            return out;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Planning step

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanFailure {
    SecondaryPath,
    Viewpoint,
    PrimaryPath,
}

impl fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanFailure::SecondaryPath => "no_secondary_path",
            PlanFailure::Viewpoint => "no_viewpoint",
            PlanFailure::PrimaryPath => "no_primary_path",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PlanStep {
    pub state: FsmState,
    pub path_p: Option<Path>,
    pub path_s: Option<Path>,
    pub viewpoint: Option<Vec3>,
    pub failure: Option<PlanFailure>,
    pub search: Option<ViewpointSearch>,
}

impl PlanStep {
    fn terminal(state: FsmState, failure: Option<PlanFailure>) -> Self {
        PlanStep { state, path_p: None, path_s: None, viewpoint: None, failure, search: None }
    }
}

/// One planning round for both vehicles (all poses in the local frame).
pub fn plan_step(
    map: &OccupancyMap,
    pose_p: &Pose,
    pose_s: &Pose,
    goal_s: &Pose,
    params: &GuidanceParams,
) -> PlanStep {
    let res = map.resolution();
    if (pose_s.position - goal_s.position).norm() < res {
        return PlanStep::terminal(FsmState::GoalReached, None);
    }
    let timeout = Duration::from_secs_f64(params.plan_timeout);
    let map_s = map.add_obstacle_box(&pose_p.position, params.w_p, params.h_p);
    let mut req = PlanRequest::new(&map_s, *pose_s, *goal_s, params.d_s);
    req.unknown_penalty = params.unknown_penalty;
    req.timeout = timeout;
    let Some(path_s) = plan(&req).path else {
        return PlanStep::terminal(FsmState::Failure, Some(PlanFailure::SecondaryPath));
    };
    let search = find_guiding_viewpoint(map, &path_s, &pose_p.position, params);
    let Some(g_p) = search.viewpoint else {
        let mut step = PlanStep::terminal(FsmState::Failure, Some(PlanFailure::Viewpoint));
        step.path_s = Some(path_s);
        step.search = Some(search);
        return step;
    };
    if (pose_p.position - g_p).norm() < res {
        return PlanStep {
            state: FsmState::SecondaryMoving,
            path_p: None,
            path_s: Some(path_s),
            viewpoint: Some(g_p),
            failure: None,
            search: Some(search),
        };
    }
    let first = path_s.first().expect("planned paths are nonempty").position;
    let theta_p = (first.y - g_p.y).atan2(first.x - g_p.x);
    let map_p = map.add_obstacle_box(&pose_s.position, params.w_s, params.h_s);
    let goal_p = Pose::new(g_p, theta_p, pose_p.frame);
    let mut req = PlanRequest::new(&map_p, *pose_p, goal_p, params.d_p);
    req.unknown_penalty = params.unknown_penalty;
    req.timeout = timeout;
    let Some(path_p) = plan(&req).path else {
        let mut step = PlanStep::terminal(FsmState::Failure, Some(PlanFailure::PrimaryPath));
        step.path_s = Some(path_s);
        step.viewpoint = Some(g_p);
        step.search = Some(search);
        return step;
    };
    PlanStep {
        state: FsmState::PrimaryMoving,
        path_p: Some(path_p),
        path_s: Some(path_s),
        viewpoint: Some(g_p),
        failure: None,
        search: Some(search),
    }
}

/// Re-expresses the stored path in the secondary's body frame through
/// `t_sl` (local to body) and drops the leading poses closer than `delta`
/// to the body origin. Returns the body-frame path and how many leading
/// poses were dropped.
pub fn guide_step(path_s: &Path, t_sl: &Transform4Dof, delta: f64) -> Result<(Path, usize), FrameMismatch> {
    let body = apply_path(t_sl, path_s)?;
    let pruned = body
        .poses()
        .iter()
        .take_while(|p| p.position.norm() < delta)
        .count();
    Ok((body.skip(pruned), pruned))
}

// ---------------------------------------------------------------------------
// State machine

/// What the state machine sees at each tick. Positions are in the local
/// frame; `pose_s` and `t_sl` are the current relative-localization
/// estimates.
#[derive(Debug, Clone, Copy)]
pub struct FsmInputs {
    pub t: f64,
    pub pose_p: Pose,
    pub pose_s: Pose,
    pub t_sl: Transform4Dof,
    pub primary_idle: bool,
    pub secondary_idle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    /// Path for the primary, local frame.
    PrimaryPath(Path),
    /// Path for the secondary, its body frame.
    SecondaryPath(Path),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub state: FsmState,
    pub event: String,
}

/// Mission executive driving [`plan_step`] and [`guide_step`].
#[derive(Debug, Clone)]
pub struct GuidanceFsm {
    pub params: GuidanceParams,
    pub state: GuidanceState,
    queue: VecDeque<Pose>,
    /// When set, reaching a goal queues another one offset by this vector.
    pub auto_increment: Option<Vec3>,
    next_guide_t: f64,
    guided: bool,
    last_plan_t: f64,
    trace: Vec<TraceRow>,
    /// Regions of the most recent viewpoint search.
    pub last_search: Option<(Path, ViewpointSearch)>,
    /// Every planning outcome with its time, for offline inspection.
    pub plan_log: Vec<(f64, FsmState, Option<PlanFailure>)>,
}

impl GuidanceFsm {
    pub fn new(params: GuidanceParams) -> Result<Self, GuidanceError> {
        params.validate()?;
        Ok(GuidanceFsm {
            params,
            state: GuidanceState::default(),
            queue: VecDeque::new(),
            auto_increment: None,
            next_guide_t: 0.0,
            guided: false,
            last_plan_t: f64::NEG_INFINITY,
            trace: Vec::new(),
            last_search: None,
            plan_log: Vec::new(),
        })
    }

    pub fn push_goal(&mut self, goal: Pose) {
        self.queue.push_back(goal);
    }

    pub fn pending_goals(&self) -> usize {
        self.queue.len()
    }

    pub fn fsm(&self) -> FsmState {
        self.state.fsm
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Trace as CSV `t,state,event`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("t,state,event\n");
        for r in &self.trace {
            let _ = writeln!(s, "{:.2},{},{}", r.t, r.state, r.event);
        }
        s
    }

    fn enter(&mut self, t: f64, state: FsmState, event: impl Into<String>) {
        self.state.fsm = state;
        self.trace.push(TraceRow { t, state, event: event.into() });
    }

    fn next_goal(&mut self) -> Option<Pose> {
        if let Some(g) = self.queue.pop_front() {
            return Some(g);
        }
        match (self.auto_increment, self.state.goal) {
            (Some(inc), Some(g)) => Some(Pose::new(g.position + inc, g.heading, g.frame)),
            _ => None,
        }
    }

    /// Advances the machine by one tick and returns messages to send.
    pub fn tick(&mut self, map: &OccupancyMap, inp: &FsmInputs) -> Vec<Outbound> {
        let mut out = Vec::new();
        let res = map.resolution();
        match self.state.fsm {
            FsmState::Idle | FsmState::GoalReached | FsmState::Failure => {
                let external = !self.queue.is_empty();
                let resume = self.state.fsm == FsmState::GoalReached || external;
                if resume {
                    if let Some(goal) = self.next_goal() {
                        self.state = GuidanceState { goal: Some(goal), ..GuidanceState::default() };
                        self.enter(inp.t, FsmState::Planning, "new_goal");
                    }
                }
            }
            FsmState::Planning => {}
            FsmState::PrimaryMoving => {
                let vp = self.state.viewpoint.expect("viewpoint set while primary moves");
                let end = self.state.path_p.as_ref().and_then(|p| p.last()).map(|p| p.position);
                let at_vp = (inp.pose_p.position - vp).norm() < res;
                let finished = inp.primary_idle && end.is_some_and(|e| (inp.pose_p.position - e).norm() < res);
                if at_vp || finished {
                    self.start_guiding(inp.t);
                }
            }
            FsmState::SecondaryMoving => {}
        }
        if self.state.fsm == FsmState::Planning
            && inp.primary_idle
            && inp.secondary_idle
            && inp.t - self.last_plan_t >= 1.0 / self.params.replan_rate - 1e-9
        {
            self.last_plan_t = inp.t;
            let goal = self.state.goal.expect("goal set while planning");
            let step = plan_step(map, &inp.pose_p, &inp.pose_s, &goal, &self.params);
            self.plan_log.push((inp.t, step.state, step.failure));
            if let (Some(search), Some(path)) = (step.search.clone(), step.path_s.clone()) {
                self.last_search = Some((path, search));
            }
            match step.state {
                FsmState::GoalReached => self.enter(inp.t, FsmState::GoalReached, "goal_reached"),
                FsmState::Failure => {
                    let why = step.failure.map(|f| f.to_string()).unwrap_or_default();
                    self.enter(inp.t, FsmState::Failure, why);
                }
                FsmState::SecondaryMoving => {
                    self.adopt_snapped_goal(step.path_s.as_ref());
                    self.state.path_s = step.path_s;
                    self.state.viewpoint = step.viewpoint;
                    self.start_guiding(inp.t);
                }
                FsmState::PrimaryMoving => {
                    self.adopt_snapped_goal(step.path_s.as_ref());
                    self.state.path_s = step.path_s;
                    self.state.viewpoint = step.viewpoint;
                    let path_p = step.path_p.expect("primary path present");
                    out.push(Outbound::PrimaryPath(path_p.clone()));
                    self.state.path_p = Some(path_p);
                    self.enter(inp.t, FsmState::PrimaryMoving, "primary_path_sent");
                }
                other => unreachable!("plan_step never yields {other}"),
            }
        }
        if self.state.fsm == FsmState::SecondaryMoving {
            let goal = self.state.goal.expect("goal set while guiding");
            let due = inp.t >= self.next_guide_t - 1e-9;
            if due && (self.params.periodic_guiding || !self.guided) {
                if let Some(path) = self.state.path_s.as_ref() {
                    if let Ok((body, pruned)) = guide_step(path, &inp.t_sl, self.params.delta) {
                        self.state.path_s = Some(path.skip(pruned));
                        out.push(Outbound::SecondaryPath(body));
                        self.guided = true;
                    }
                }
                self.next_guide_t = inp.t + 1.0 / self.params.guide_rate;
            }
            if (inp.pose_s.position - goal.position).norm() < res {
                self.state.path_s = None;
                self.state.path_p = None;
                self.state.viewpoint = None;
                self.enter(inp.t, FsmState::GoalReached, "goal_reached");
            }
        }
        out
    }

    /// The planner may move a blocked goal to the nearest clear voxel; the
    /// arrival test then uses the end of the planned path.
    fn adopt_snapped_goal(&mut self, path_s: Option<&Path>) {
        if let (Some(goal), Some(end)) = (self.state.goal.as_mut(), path_s.and_then(|p| p.last())) {
            goal.position = end.position;
        }
    }

    fn start_guiding(&mut self, t: f64) {
        self.guided = false;
        self.next_guide_t = t;
        self.enter(t, FsmState::SecondaryMoving, "guiding_started");
    }
}
