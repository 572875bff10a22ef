//! Seeded closed-loop experiments and their CSV reports.
//!
//! One run simulates both vehicles at a fixed step: the primary is perfectly
//! localized in the local frame, which coincides with the world frame; the
//! secondary flies on its own odometry estimate and receives paths in its
//! body frame through the wire codec. The relative pose the guidance loop
//! sees is the true pose perturbed by a correlated noise process.

use std::fmt::Write as _;

use coguide::frames::{apply_path, invert, FrameId, Pose, Transform4Dof, Vec3};
use coguide::guidance::{FsmInputs, FsmState, GuidanceFsm, GuidanceParams, Outbound};
use coguide::planner::{plan, PlanRequest};
use coguide::voxel_map::OccupancyMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_path, encode_odometry, encode_path, size_histogram_csv, BandwidthMeter, MessageKind};
use crate::lidar::{simulate_scan, LidarSpec};
use crate::localization::{vio_step, LocalizationModel, RelativeNoise, VioState};
use crate::vehicle::{uav_step, UavState};
use crate::world::{self, gap_layout, ForestSpec, World};

/// Collision radius of the primary airframe.
pub const PRIMARY_RADIUS: f64 = 0.35;
/// Collision radius of the secondary airframe.
pub const SECONDARY_RADIUS: f64 = 0.225;
/// Flight altitude in the room worlds and at the forest start.
pub const FLIGHT_ALTITUDE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    /// Two rooms joined by a gap in the dividing wall.
    Gap,
    /// The same rooms without the dividing wall.
    Open,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    /// Built from the primary's lidar.
    PrimaryBuilt,
    /// Built from a lidar on the secondary, registered with its true pose.
    SecondaryBuilt,
    /// Exact voxelization of the world.
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidingMode {
    Periodic,
    Once,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mission {
    /// Through the gap to a goal in the second room, then back to the
    /// start.
    RoundTrip,
    /// One crossing to the start point mirrored through the gap center.
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Primary guides the secondary.
    Coop,
    /// The primary flies the mission alone with its own clearance.
    SinglePrimary,
}

/// Everything that defines an experiment. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    pub world: WorldKind,
    pub localization: LocalizationModel,
    pub map_source: MapSource,
    pub guiding: GuidingMode,
    pub baseline: Baseline,
    /// Mission flown in the room worlds.
    pub mission: Mission,
    /// Secondary clearances to sweep.
    pub d_s_values: Vec<f64>,
    /// Explicit gap widths; when empty each case uses `2 d_s + 1.5 res`.
    pub gap_widths: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub resolution: f64,
    pub dt: f64,
    pub speed: f64,
    /// Simulated time limit per run, seconds.
    pub max_time: f64,
    /// Guidance tunables; `d_s` is overwritten by each sweep value and
    /// `periodic_guiding` by `guiding`.
    pub guidance: GuidanceParams,
    pub lidar: LidarSpec,
    /// The map is re-integrated only after the scanning vehicle moved this
    /// far or turned by `rescan_yaw` since the last integrated scan.
    pub rescan_distance: f64,
    pub rescan_yaw: f64,
    pub forest: ForestSpec,
    /// Number of consecutive goals in the forest world.
    pub forest_goals: usize,
    /// Offset between consecutive forest goals.
    pub goal_increment: [f64; 3],
    /// Keep per-run FSM traces in the report.
    pub keep_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: "coop".into(),
            world: WorldKind::Gap,
            localization: LocalizationModel::ground_truth(),
            map_source: MapSource::GroundTruth,
            guiding: GuidingMode::Periodic,
            baseline: Baseline::Coop,
            mission: Mission::RoundTrip,
            d_s_values: vec![0.4],
            gap_widths: Vec::new(),
            runs: 10,
            seed: 1,
            resolution: 0.1,
            dt: 0.05,
            speed: 1.0,
            max_time: 240.0,
            guidance: GuidanceParams { delta: 0.1, ..GuidanceParams::default() },
            lidar: LidarSpec::default(),
            rescan_distance: 0.5,
            rescan_yaw: 0.3,
            forest: ForestSpec::default(),
            forest_goals: 1,
            goal_increment: [4.0, 0.0, 0.0],
            keep_traces: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.d_s_values.is_empty() {
            return bad("d_s_values must not be empty".into());
        }
        if let Some(d) = self.d_s_values.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return bad(format!("d_s {d} must be positive"));
        }
        if let Some(w) = self.gap_widths.iter().find(|w| !(**w > 0.0 && **w < gap_layout::ROOM_WIDTH)) {
            return bad(format!("gap width {w} must be in (0, {})", gap_layout::ROOM_WIDTH));
        }
        for (name, v) in [
            ("resolution", self.resolution),
            ("dt", self.dt),
            ("speed", self.speed),
            ("max_time", self.max_time),
            ("lidar.rate", self.lidar.rate),
            ("lidar.max_range", self.lidar.max_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.localization.rel_mae < 0.0 {
            return bad("localization.rel_mae must be non-negative".into());
        }
        if self.world == WorldKind::Forest && self.forest_goals == 0 {
            return bad("forest_goals must be at least 1".into());
        }
        if self.world != WorldKind::Forest && self.baseline == Baseline::Coop && self.guidance.d_p <= 0.0 {
            return bad("guidance.d_p must be positive".into());
        }
        self.case_params(self.d_s_values[0]).validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    fn case_params(&self, d_s: f64) -> GuidanceParams {
        GuidanceParams {
            d_s,
            periodic_guiding: self.guiding == GuidingMode::Periodic,
            ..self.guidance.clone()
        }
    }

    /// `(d_s, gap width)` pairs in report order.
    pub fn cases(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &d in &self.d_s_values {
            if self.gap_widths.is_empty() {
                out.push((d, world::gap_width(d, self.resolution)));
            } else {
                out.extend(self.gap_widths.iter().map(|&w| (d, w)));
            }
        }
        out
    }
}

/// Parses `start:end:step` into the inclusive list of values, rounded to
/// the number of decimals written in the step.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || ConfigError::Invalid(format!("sweep {spec:?} must be start:end:step"));
    if parts.len() == 1 {
        return Ok(vec![parts[0].trim().parse().map_err(|_| err())?]);
    }
    if parts.len() != 3 {
        return Err(err());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| err())?;
    let (a, b, s) = (nums[0], nums[1], nums[2]);
    if !(s > 0.0) || b < a {
        return Err(err());
    }
    let decimals = parts[2].trim().split('.').nth(1).map_or(0, str::len).max(
        parts[0].trim().split('.').nth(1).map_or(0, str::len),
    );
    let scale = 10f64.powi(decimals as i32);
    let n = ((b - a) / s + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((a + k as f64 * s) * scale).round() / scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Collision,
    FsmFailure,
    Timeout,
}

impl Outcome {
    pub fn tag(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::FsmFailure => "FSM_FAILURE",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub d_s: f64,
    pub gap_width: f64,
    pub run: usize,
    pub seed: u64,
    pub outcome: Outcome,
    /// Failure detail, such as the planning failure or which vehicle hit.
    pub detail: String,
    pub sim_time: f64,
    pub goals_reached: usize,
    /// Smallest true distance from the secondary (or the lone primary) to
    /// any obstacle surface over the run.
    pub min_clearance: f64,
    pub bandwidth: BandwidthMeter,
    pub trace: Option<String>,
    /// True positions of the primary and secondary, sampled at 2 Hz.
    pub trajectories: [Vec<Vec3>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSummary {
    pub d_s: f64,
    pub gap_width: f64,
    pub successes: usize,
    pub runs: usize,
    pub collisions: usize,
    pub fsm_failures: usize,
    pub timeouts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub label: String,
    pub cases: Vec<CaseSummary>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn total_successes(&self) -> usize {
        self.cases.iter().map(|c| c.successes).sum()
    }

    pub fn case(&self, d_s: f64, gap_width: f64) -> Option<&CaseSummary> {
        self.cases
            .iter()
            .find(|c| (c.d_s - d_s).abs() < 1e-9 && (c.gap_width - gap_width).abs() < 1e-9)
    }

    /// Summary CSV, one row per case.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("label,d_s,gap_width,successes,runs,collisions,fsm_failures,timeouts\n");
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{},{:.3},{:.3},{},{},{},{},{}",
                self.label, c.d_s, c.gap_width, c.successes, c.runs, c.collisions, c.fsm_failures, c.timeouts
            );
        }
        s
    }

    /// Per-run CSV.
    pub fn runs_csv(&self) -> String {
        let mut s = String::from(
            "label,d_s,gap_width,run,seed,outcome,detail,sim_time,goals_reached,min_clearance,\
             path_messages,path_bytes,odometry_messages,odometry_bytes\n",
        );
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{:.3},{:.3},{},{},{},{},{:.2},{},{:.4},{},{},{},{}",
                self.label,
                r.d_s,
                r.gap_width,
                r.run,
                r.seed,
                r.outcome.tag(),
                r.detail,
                r.sim_time,
                r.goals_reached,
                r.min_clearance,
                r.bandwidth.path.messages,
                r.bandwidth.path.bytes,
                r.bandwidth.odometry.messages,
                r.bandwidth.odometry.bytes,
            );
        }
        s
    }

    /// Histogram of every path message size across runs, 32-byte bins.
    pub fn path_size_histogram_csv(&self) -> String {
        let sizes: Vec<usize> = self.runs.iter().flat_map(|r| r.bandwidth.path_sizes.iter().copied()).collect();
        size_histogram_csv(&sizes, crate::codec::POSE_BYTES)
    }

    /// Per-run traces, each row prefixed with its case and run.
    pub fn traces_csv(&self) -> String {
        let mut s = String::from("d_s,gap_width,run,t,state,event\n");
        for r in &self.runs {
            if let Some(trace) = &r.trace {
                for line in trace.lines().skip(1) {
                    let _ = writeln!(s, "{:.3},{:.3},{},{}", r.d_s, r.gap_width, r.run, line);
                }
            }
        }
        s
    }
}

/// Seed of run `run` of an experiment with base seed `base`. Shared across
/// cases and configurations so that sweeps compare like with like.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(run as u64)
}

/// Runs every case of `config`; runs execute in parallel and are reported in
/// a fixed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    config.validate()?;
    let jobs: Vec<(usize, f64, f64, usize)> = config
        .cases()
        .into_iter()
        .enumerate()
        .flat_map(|(i, (d, w))| (0..config.runs).map(move |r| (i, d, w, r)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(_, d_s, w, run)| simulate_run(config, d_s, w, run))
        .collect();
    let cases = config
        .cases()
        .into_iter()
        .map(|(d_s, gap_width)| {
            let rs: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.d_s == d_s && r.gap_width == gap_width)
                .collect();
            let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
            CaseSummary {
                d_s,
                gap_width,
                successes: count(Outcome::Success),
                runs: rs.len(),
                collisions: count(Outcome::Collision),
                fsm_failures: count(Outcome::FsmFailure),
                timeouts: count(Outcome::Timeout),
            }
        })
        .collect();
    Ok(ExperimentReport { label: config.label.clone(), cases, runs })
}

/// Start poses and goals of one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: World,
    pub primary: Pose,
    pub secondary: Pose,
    pub goals: Vec<Pose>,
    pub map: OccupancyMap,
}

/// Draws the scenario of one run: room worlds get random starts in the
/// first room, the goals of the configured mission, and a random sub-voxel
/// offset of the map grid.
pub fn make_scenario(config: &ExperimentConfig, gap_width: f64, rng: &mut impl Rng) -> Scenario {
    let res = config.resolution;
    let z = FLIGHT_ALTITUDE;
    match config.world {
        WorldKind::Gap | WorldKind::Open => {
            let world = if config.world == WorldKind::Gap {
                world::make_gap_world_with_width(gap_width)
            } else {
                world::make_open_world()
            };
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let (s, p, goals) = match config.mission {
                Mission::RoundTrip => {
                    // The secondary starts and turns around on the same side
                    // of the gap axis and the primary starts on the other
                    // side, so the returning secondary is seen through the
                    // gap from the primary's side of its path.
                    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let s = Vec3::new(rng.gen_range(-5.0..-2.5), side * rng.gen_range(1.5..2.5), z);
                    let p = Vec3::new(rng.gen_range(-8.0..-2.0), -side * rng.gen_range(0.5..2.5), z);
                    let g = Vec3::new(rng.gen_range(1.2..2.5), side * rng.gen_range(1.0..2.5), z);
                    (s, p, vec![g, s])
                }
                Mission::Pass => {
                    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let s = Vec3::new(rng.gen_range(-4.0..-2.0), side * rng.gen_range(0.0..2.0), z);
                    let p = Vec3::new(rng.gen_range(-8.0..-2.0), -side * rng.gen_range(1.5..2.5), z);
                    (s, p, vec![Vec3::new(-s.x, -s.y, z)])
                }
            };
            let offset = Vec3::new(rng.gen_range(0.0..res), rng.gen_range(0.0..res), rng.gen_range(0.0..res));
            let half = gap_layout::ROOM_DEPTH + gap_layout::WALL;
            let half_y = gap_layout::ROOM_WIDTH / 2.0 + gap_layout::WALL;
            let origin = Vec3::new(-half - res, -half_y - res, 0.0) + offset;
            let dims = [
                ((2.0 * half) / res).ceil() as usize + 2,
                ((2.0 * half_y) / res).ceil() as usize + 2,
                (3.0 / res).round() as usize,
            ];
            let map = OccupancyMap::new(res, origin, dims).expect("valid room map");
            Scenario {
                world,
                primary: Pose::new(p, heading, FrameId::Local),
                secondary: Pose::new(s, heading, FrameId::Local),
                goals: goals.into_iter().map(|g| Pose::new(g, 0.0, FrameId::Local)).collect(),
                map,
            }
        }
        WorldKind::Forest => {
            let seed = rng.gen::<u64>();
            let (world, _) = world::make_forest_world(seed, &config.forest);
            let s = Vec3::new(0.0, -0.9, z);
            let p = Vec3::new(0.0, 0.9, z);
            let inc = Vec3::from(config.goal_increment);
            let goals = (1..=config.forest_goals)
                .map(|k| Pose::new(s + inc * k as f64, 0.0, FrameId::Local))
                .collect();
            let map = OccupancyMap::new(res, Vec3::new(p.x - 10.0, p.y - 10.0, 0.0), [
                (20.0 / res).round() as usize,
                (20.0 / res).round() as usize,
                (4.0 / res).round() as usize,
            ])
            .expect("valid forest map");
            Scenario {
                world,
                primary: Pose::new(p, 0.0, FrameId::Local),
                secondary: Pose::new(s, 0.0, FrameId::Local),
                goals,
                map,
            }
        }
    }
}

struct Scanner {
    last: Option<Pose>,
    next_t: f64,
}

impl Scanner {
    fn new() -> Self {
        Scanner { last: None, next_t: 0.0 }
    }

    fn maybe_scan(&mut self, t: f64, pose: &Pose, cfg: &ExperimentConfig, world: &World, map: &mut OccupancyMap) {
        if t + 1e-9 < self.next_t {
            return;
        }
        self.next_t = t + 1.0 / cfg.lidar.rate;
        let moved = self.last.is_none_or(|l| {
            (l.position - pose.position).norm() >= cfg.rescan_distance
                || coguide::frames::wrap_angle(l.heading - pose.heading).abs() >= cfg.rescan_yaw
        });
        if moved {
            let scan = simulate_scan(world, pose, &cfg.lidar);
            map.integrate_scan(&pose.position, &scan.hits, &scan.misses, cfg.lidar.max_range);
            self.last = Some(*pose);
        }
    }
}

/// Regenerates the scenario of a recorded run.
pub fn scenario_of(config: &ExperimentConfig, record: &RunRecord) -> Scenario {
    make_scenario(config, record.gap_width, &mut ChaCha8Rng::seed_from_u64(record.seed))
}

/// Simulates one run of one case.
pub fn simulate_run(config: &ExperimentConfig, d_s: f64, gap_width: f64, run: usize) -> RunRecord {
    let seed = run_seed(config.seed, run);
    let mut scenario_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let scenario = make_scenario(config, gap_width, &mut scenario_rng);
    let mut record = match config.baseline {
        Baseline::Coop => run_coop(config, d_s, scenario, &mut noise_rng),
        Baseline::SinglePrimary => run_single(config, scenario),
    };
    record.d_s = d_s;
    record.gap_width = gap_width;
    record.run = run;
    record.seed = seed;
    record
}

fn empty_record() -> RunRecord {
    RunRecord {
        d_s: 0.0,
        gap_width: 0.0,
        run: 0,
        seed: 0,
        outcome: Outcome::Timeout,
        detail: String::new(),
        sim_time: 0.0,
        goals_reached: 0,
        min_clearance: f64::INFINITY,
        bandwidth: BandwidthMeter::default(),
        trace: None,
        trajectories: [Vec::new(), Vec::new()],
    }
}

fn prepare_map(config: &ExperimentConfig, scenario: &mut Scenario) {
    if config.map_source == MapSource::GroundTruth {
        scenario.world.rasterize(&mut scenario.map);
    }
}

/// Rotates `v` about the vertical axis.
fn rot(v: &Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

fn run_coop(config: &ExperimentConfig, d_s: f64, mut sc: Scenario, rng: &mut ChaCha8Rng) -> RunRecord {
    prepare_map(config, &mut sc);
    let mut rec = empty_record();
    let params = config.case_params(d_s);
    let mut fsm = GuidanceFsm::new(params).expect("validated parameters");
    for g in &sc.goals {
        fsm.push_goal(*g);
    }
    let loc = &config.localization;
    let mut primary = UavState::new(sc.primary);
    let mut true_s = sc.secondary;
    let mut vio = VioState::new(sc.secondary);
    let mut follower = UavState::new(vio.estimate);
    let mut noise = RelativeNoise::default();
    let mut scanner = Scanner::new();
    let mut path_seq = 0u32;
    let mut odom_seq = 0u32;
    let mut next_odom = 0.0;
    let mut next_sample = 0.0;
    let mut reached = 0usize;
    let mut trace_len = 0usize;
    let steps = (config.max_time / config.dt).ceil() as usize;
    let mut t = 0.0;
    rec.outcome = Outcome::Timeout;
    for step in 0..=steps {
        t = step as f64 * config.dt;
        match config.map_source {
            MapSource::PrimaryBuilt => scanner.maybe_scan(t, &primary.pose, config, &sc.world, &mut sc.map),
            MapSource::SecondaryBuilt => {
                let p = Pose { frame: FrameId::Local, ..true_s };
                scanner.maybe_scan(t, &p, config, &sc.world, &mut sc.map)
            }
            MapSource::GroundTruth => {}
        }
        if config.world == WorldKind::Forest {
            let c = sc.map.center();
            if (primary.pose.position.xy() - c.xy()).norm() > 5.0 {
                let target = Vec3::new(primary.pose.position.x, primary.pose.position.y, c.z);
                sc.map.recenter(&target);
            }
        }
        noise.step(loc, config.dt, rng);
        let t_ls_true = Transform4Dof::from_pose(&Pose { frame: FrameId::Local, ..true_s }, FrameId::Secondary);
        let t_ls = noise.apply(&t_ls_true);
        let pose_s_est = Pose::new(t_ls.translation, t_ls.yaw, FrameId::Local);
        let inputs = FsmInputs {
            t,
            pose_p: primary.pose,
            pose_s: pose_s_est,
            t_sl: invert(&t_ls),
            primary_idle: primary.idle(),
            secondary_idle: follower.idle(),
        };
        for msg in fsm.tick(&sc.map, &inputs) {
            match msg {
                Outbound::PrimaryPath(p) => primary.set_path(&p),
                Outbound::SecondaryPath(p) => {
                    let bytes = encode_path(&p, path_seq).expect("path fits the codec");
                    path_seq = path_seq.wrapping_add(1);
                    rec.bandwidth.record(MessageKind::Path, bytes.len());
                    let (_, body) = decode_path(&bytes, FrameId::Secondary).expect("own encoding decodes");
                    if !body.is_empty() {
                        let t_vs = Transform4Dof::from_pose(&vio.estimate, FrameId::Secondary);
                        follower.set_path(&apply_path(&t_vs, &body).expect("body-frame path"));
                    }
                }
            }
        }
        for row in &fsm.trace()[trace_len..] {
            if row.state == FsmState::GoalReached {
                reached += 1;
            }
        }
        trace_len = fsm.trace().len();
        rec.goals_reached = reached;
        match fsm.fsm() {
            FsmState::GoalReached if reached >= sc.goals.len() && fsm.pending_goals() == 0 => {
                rec.outcome = Outcome::Success;
                break;
            }
            FsmState::Failure => {
                rec.outcome = Outcome::FsmFailure;
                rec.detail = fsm.trace().last().map(|r| r.event.clone()).unwrap_or_default();
                break;
            }
            _ => {}
        }
        if t >= next_odom - 1e-9 {
            let bytes = encode_odometry(&vio.estimate, odom_seq);
            odom_seq = odom_seq.wrapping_add(1);
            rec.bandwidth.record(MessageKind::Odometry, bytes.len());
            next_odom += 0.5;
        }
        if t >= next_sample - 1e-9 {
            rec.trajectories[0].push(primary.pose.position);
            rec.trajectories[1].push(true_s.position);
            next_sample += 0.5;
        }

        uav_step(&mut primary, config.speed, config.dt);
        follower.pose = vio.estimate;
        let est_heading = vio.estimate.heading;
        let cmd = uav_step(&mut follower, config.speed, config.dt);
        let body = rot(&cmd.translation, -est_heading);
        true_s.position += rot(&body, true_s.heading);
        true_s.heading = coguide::frames::wrap_angle(true_s.heading + cmd.yaw);
        vio_step(&mut vio, &body, cmd.yaw, config.dt, loc, rng);
        follower.pose = vio.estimate;

        let cs = sc.world.distance(&true_s.position);
        rec.min_clearance = rec.min_clearance.min(cs);
        let cp = sc.world.distance(&primary.pose.position);
        if cs < SECONDARY_RADIUS || cp < PRIMARY_RADIUS {
            rec.outcome = Outcome::Collision;
            rec.detail = if cs < SECONDARY_RADIUS { "secondary" } else { "primary" }.into();
            break;
        }
    }
    rec.sim_time = t;
    if config.keep_traces {
        rec.trace = Some(fsm.trace_csv());
    }
    rec
}

/// The primary alone flies to each goal with its own clearance, replanning
/// on arrival.
fn run_single(config: &ExperimentConfig, mut sc: Scenario) -> RunRecord {
    prepare_map(config, &mut sc);
    let mut rec = empty_record();
    let params = &config.guidance;
    let mut primary = UavState::new(sc.secondary);
    let mut scanner = Scanner::new();
    let mut goal_idx = 0usize;
    let mut trace = String::from("t,state,event\n");
    let mut planned = false;
    let mut next_plan = 0.0;
    let steps = (config.max_time / config.dt).ceil() as usize;
    let mut t = 0.0;
    rec.outcome = Outcome::Timeout;
    for step in 0..=steps {
        t = step as f64 * config.dt;
        if config.map_source != MapSource::GroundTruth {
            scanner.maybe_scan(t, &primary.pose, config, &sc.world, &mut sc.map);
        }
        let goal = sc.goals[goal_idx];
        if primary.idle() {
            if (primary.pose.position - goal.position).norm() < config.resolution {
                let _ = writeln!(trace, "{t:.2},GOAL_REACHED,goal_reached");
                goal_idx += 1;
                rec.goals_reached = goal_idx;
                planned = false;
                if goal_idx == sc.goals.len() {
                    rec.outcome = Outcome::Success;
                    break;
                }
                continue;
            }
            if planned && t + 1e-9 < next_plan {
                continue;
            }
            next_plan = t + 1.0 / params.replan_rate;
            let mut req = PlanRequest::new(&sc.map, primary.pose, goal, params.d_p);
            req.unknown_penalty = params.unknown_penalty;
            req.timeout = std::time::Duration::from_secs_f64(params.plan_timeout);
            match plan(&req).path {
                Some(p) => {
                    let _ = writeln!(trace, "{t:.2},PRIMARY_MOVING,primary_path_sent");
                    sc.goals[goal_idx].position = p.last().expect("nonempty path").position;
                    primary.set_path(&p);
                    planned = true;
                }
                None => {
                    let _ = writeln!(trace, "{t:.2},FAILURE,no_primary_path");
                    rec.outcome = Outcome::FsmFailure;
                    rec.detail = "no_primary_path".into();
                    break;
                }
            }
        }
        uav_step(&mut primary, config.speed, config.dt);
        let c = sc.world.distance(&primary.pose.position);
        rec.min_clearance = rec.min_clearance.min(c);
        if c < PRIMARY_RADIUS {
            rec.outcome = Outcome::Collision;
            rec.detail = "primary".into();
            break;
        }
    }
    rec.sim_time = t;
    if config.keep_traces {
        rec.trace = Some(trace);
    }
    rec
}
