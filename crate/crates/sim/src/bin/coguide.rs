//! Command-line front end: experiment sweeps, forest missions, and one-shot
//! planning and viewpoint queries on saved maps.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coguide::frames::{FrameId, Path, Pose, Vec3};
use coguide::guidance::{find_guiding_viewpoint, GuidanceParams};
use coguide::planner::{path_to_csv, plan, PlanRequest};
use coguide::voxel_map::OccupancyMap;
use coguide_sim::experiment::{
    parse_sweep, run_experiment, scenario_of, ExperimentConfig, RunRecord, WorldKind, FLIGHT_ALTITUDE,
};
use coguide_sim::render::trajectories_svg;

#[derive(Parser)]
#[command(name = "coguide", version, about = "Cooperative guidance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the secondary clearance in the two-room gap world.
    SimGap {
        /// `start:end:step` or a single value.
        #[arg(long, default_value = "0.3:0.8:0.05")]
        ds_sweep: String,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Experiment config JSON; command-line values override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Fly consecutive goals through a seeded forest.
    SimForest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        goals: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Plan a path on a saved voxmap and print it as CSV.
    Plan {
        #[arg(long)]
        map: PathBuf,
        /// `x,y,z`
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        #[arg(long, default_value_t = 0.8)]
        d_min: f64,
        #[arg(long, default_value_t = 2.0)]
        unknown_penalty: f64,
    },
    /// Find a guiding viewpoint for a path CSV on a saved voxmap.
    Viewpoint {
        #[arg(long)]
        map: PathBuf,
        /// CSV with header `x,y,z,heading`.
        #[arg(long)]
        path: PathBuf,
        /// Current primary position `x,y,z`.
        #[arg(long, allow_hyphen_values = true)]
        primary: String,
        /// Guidance parameters JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Write the region render here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn load_config(path: &Option<PathBuf>) -> Res<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    })
}

fn parse_vec(s: &str) -> Res<Vec3> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    if v.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}").into());
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn write(dir: &FsPath, name: &str, body: &str) -> Res<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn run(cli: Cli) -> Res<()> {
    match cli.command {
        Command::SimGap { ds_sweep, runs, config, seed, out } => {
            let mut c = load_config(&config)?;
            c.d_s_values = parse_sweep(&ds_sweep)?;
            c.runs = runs;
            c.keep_traces = true;
            if let Some(s) = seed {
                c.seed = s;
            }
            let report = run_experiment(&c)?;
            print!("{}", report.summary_csv());
            write(&out, "summary.csv", &report.summary_csv())?;
            write(&out, "runs.csv", &report.runs_csv())?;
            write(&out, "traces.csv", &report.traces_csv())?;
            write(&out, "path_sizes.csv", &report.path_size_histogram_csv())?;
            if let Some(r) = report.runs.first() {
                write(&out, "run0.svg", &render_run(&c, r))?;
            }
        }
        Command::SimForest { seed, goals, config, out } => {
            let mut c = load_config(&config)?;
            c.world = WorldKind::Forest;
            c.forest_goals = goals;
            c.seed = seed;
            c.runs = 1;
            c.keep_traces = true;
            c.max_time = c.max_time.max(120.0 * goals as f64);
            let report = run_experiment(&c)?;
            let r = &report.runs[0];
            println!(
                "outcome={} goals_reached={} sim_time={:.2} min_clearance={:.3}",
                r.outcome.tag(),
                r.goals_reached,
                r.sim_time,
                r.min_clearance
            );
            write(&out, "forest_runs.csv", &report.runs_csv())?;
            write(&out, "forest_trace.csv", r.trace.as_deref().unwrap_or(""))?;
            write(&out, "forest.svg", &render_run(&c, r))?;
        }
        Command::Plan { map, start, goal, d_min, unknown_penalty } => {
            let m = OccupancyMap::from_voxmap(&fs::read_to_string(map)?)?;
            let s = Pose::new(parse_vec(&start)?, 0.0, FrameId::Local);
            let g = Pose::new(parse_vec(&goal)?, 0.0, FrameId::Local);
            let mut req = PlanRequest::new(&m, s, g, d_min);
            req.unknown_penalty = unknown_penalty;
            let r = plan(&req);
            match r.path {
                Some(p) => print!("{}", path_to_csv(&p)),
                None => return Err(format!("no path: {:?}", r.outcome).into()),
            }
        }
        Command::Viewpoint { map, path, primary, params, svg } => {
            let m = OccupancyMap::from_voxmap(&fs::read_to_string(map)?)?;
            let params: GuidanceParams = match params {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => GuidanceParams::default(),
            };
            params.validate()?;
            let p = read_path_csv(&fs::read_to_string(path)?)?;
            let search = find_guiding_viewpoint(&m, &p, &parse_vec(&primary)?, &params);
            match search.viewpoint {
                Some(v) => println!("{:.4},{:.4},{:.4}", v.x, v.y, v.z),
                None => println!("none"),
            }
            if let Some(out) = svg {
                fs::write(&out, search.to_svg(&p))?;
            }
        }
    }
    Ok(())
}

fn render_run(c: &ExperimentConfig, r: &RunRecord) -> String {
    let sc = scenario_of(c, r);
    trajectories_svg(
        &sc.world,
        FLIGHT_ALTITUDE,
        &[("primary", &r.trajectories[0], "#d62728"), ("secondary", &r.trajectories[1], "#1f77b4")],
    )
}

fn read_path_csv(text: &str) -> Res<Path> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with('x') || line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>()?;
        if v.len() != 4 {
            return Err(format!("line {}: expected x,y,z,heading", i + 1).into());
        }
        poses.push(Pose::new(Vec3::new(v[0], v[1], v[2]), v[3], FrameId::Local));
    }
    Ok(Path::new(FrameId::Local, poses)?)
}
