//! `tribar` command line: simulator rollouts, estimation replay, action
//! table generation, gait expansion, trajectory planning, and the limbo
//! scenario. Exit codes: 0 success, 1 domain error (infeasible gait,
//! planner failure), 2 I/O or configuration error.

mod svg;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tribar_core::estimation;
use tribar_core::files;
use tribar_core::gait::{gait_by_name, Gait};
use tribar_core::planner::{self, ClosedLoopOptions, CostWeights, Trajectory};
use tribar_core::presets;
use tribar_core::sensing::{log_rollout, seeded_rng, NoiseSpec};
use tribar_core::sim::{self, SimConfig};
use tribar_core::symmetry::{self, FaceId};
use tribar_core::topology::RobotTopology;

#[derive(Parser)]
#[command(name = "tribar", version, about = "Software twin of a 3-bar rolling tensegrity robot")]
struct Cli {
    /// RNG seed for synthetic sensor noise. The TRIBAR_SEED environment
    /// variable overrides this flag.
    #[arg(long, global = true, default_value_t = 1337)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a gait in the quasistatic simulator.
    Rollout(RolloutArgs),
    /// Replay sensor frames through the state estimator.
    Estimate(EstimateArgs),
    /// Tabulate the planar transform of all 51 locomotion actions.
    Tabulate(TabulateArgs),
    /// Closed-loop trajectory following against the simulator.
    Plan(PlanArgs),
    /// Print a gait (translated, reversed, pivot-swapped, or fully
    /// expanded over one face period) as JSON.
    GaitExpand(GaitExpandArgs),
    /// Limbo scenario: shrink, roll under the bar, reverse, repeat.
    Limbo(LimboArgs),
}

#[derive(Args)]
struct RolloutArgs {
    /// Library gait name (quasistatic, dynamic, ccw_turn, cw_turn,
    /// crawl_left_cw, crawl_left_ccw, quasistatic_impact).
    #[arg(long, default_value = "quasistatic")]
    gait: String,
    /// Load the gait from a JSON file instead of the library.
    #[arg(long, conflicts_with = "gait")]
    gait_file: Option<PathBuf>,
    /// Parameter preset overriding the gait's controller parameters
    /// (floor, grass, ice, pebbles, sand, incline_DEG, morph_RANGE,
    /// turn_in_place, crawling, gradual, dynamic, impact, actions, limbo).
    #[arg(long)]
    preset: Option<String>,
    /// Gait cycles to execute.
    #[arg(long, default_value_t = 3)]
    cycles: usize,
    /// Incline angle in degrees (tilts gravity; picks the matching incline
    /// preset when none is given explicitly).
    #[arg(long)]
    incline: Option<f64>,
    /// Execute the gait reversed (per-face reverse mapping).
    #[arg(long)]
    reversed: bool,
    /// Relative tendon-length noise for the sensor log.
    #[arg(long, default_value_t = 0.0)]
    sensor_noise: f64,
    /// Bar-direction noise for the sensor log, degrees.
    #[arg(long, default_value_t = 0.0)]
    bar_noise_deg: f64,
    /// Also write sensor frames and ground-truth shapes for estimation
    /// replay.
    #[arg(long)]
    sensor_log: bool,
    /// Output directory.
    #[arg(long, default_value = "out/rollout")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sensor frame CSV (as written by rollout --sensor-log).
    #[arg(long)]
    frames: PathBuf,
    /// Ground-truth node CSV; enables the RMSE report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out/estimate")]
    out: PathBuf,
}

#[derive(Args)]
struct TabulateArgs {
    /// Output CSV path.
    #[arg(long, default_value = "out/action_table.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajPreset {
    Line,
    Circle,
    Triangle,
}

#[derive(Args)]
struct PlanArgs {
    /// Action table CSV; tabulated on the fly when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Trajectory CSV (x_m, y_m, segment_id).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Built-in trajectory preset with its matching cost weights.
    #[arg(long, value_enum)]
    preset: Option<TrajPreset>,
    /// Distance weight override.
    #[arg(long)]
    wd: Option<f64>,
    /// Angle weight override.
    #[arg(long)]
    wa: Option<f64>,
    /// Progression weight override.
    #[arg(long)]
    wp: Option<f64>,
    /// Abort after this many consecutive plans without progress
    /// (corner maneuvers stall the progress metric for a while).
    #[arg(long, default_value_t = 60)]
    stall_window: usize,
    /// Maximum planning steps.
    #[arg(long, default_value_t = 400)]
    max_plans: usize,
    /// Output directory.
    #[arg(long, default_value = "out/plan")]
    out: PathBuf,
}

#[derive(Args)]
struct GaitExpandArgs {
    /// Library gait name.
    #[arg(long, default_value = "quasistatic")]
    gait: String,
    /// Bottom face the gait executes from.
    #[arg(long, default_value = "F0")]
    face: String,
    /// Apply the per-face reverse mapping.
    #[arg(long)]
    reverse: bool,
    /// Swap the pivot side (crawling turns).
    #[arg(long)]
    swap_pivot: bool,
    /// Expand over one full face period (three cycles).
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct LimboArgs {
    /// Starting limbo bar height, m.
    #[arg(long)]
    bar_height: f64,
    /// Bar lowering per round, m.
    #[arg(long, default_value_t = 0.040)]
    lowering: f64,
    /// Maximum rounds.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    /// Output directory.
    #[arg(long, default_value = "out/limbo")]
    out: PathBuf,
}

enum Failure {
    /// Infeasible gaits, planner failures, estimator faults.
    Domain(String),
    /// Missing files, malformed inputs, unknown names.
    Config(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Config(msg.into()))
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    if let Ok(seed) = std::env::var("TRIBAR_SEED") {
        match seed.parse() {
            Ok(s) => cli.seed = s,
            Err(_) => {
                eprintln!("error: TRIBAR_SEED must be an integer, got {seed:?}");
                return ExitCode::from(2);
            }
        }
    }
    let result = match cli.command {
        Command::Rollout(ref args) => cmd_rollout(args, cli.seed),
        Command::Estimate(ref args) => cmd_estimate(args),
        Command::Tabulate(ref args) => cmd_tabulate(args),
        Command::Plan(ref args) => cmd_plan(args),
        Command::GaitExpand(ref args) => cmd_gait_expand(args),
        Command::Limbo(ref args) => cmd_limbo(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn create(path: &Path) -> Result<File, Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    }
    File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn resolve_gait(args: &RolloutArgs) -> Result<Gait, Failure> {
    let mut gait = if let Some(path) = &args.gait_file {
        files::read_gait(open(path)?).map_err(|e| Failure::Config(e.to_string()))?
    } else {
        gait_by_name(&args.gait).map_err(|e| Failure::Config(e.to_string()))?
    };
    if let Some(name) = &args.preset {
        gait.params = presets::lookup(name).ok_or_else(|| {
            Failure::Config(format!(
                "unknown preset {name:?}; available: {}",
                presets::names().join(", ")
            ))
        })?;
    } else if let Some(deg) = args.incline {
        if deg >= 0.0 && deg.fract() == 0.0 {
            if let Some(params) = presets::incline(deg as u32) {
                gait.params = params;
            }
        }
    }
    Ok(gait)
}

fn cmd_rollout(args: &RolloutArgs, seed: u64) -> Result<(), Failure> {
    let mut config = SimConfig::default();
    if let Some(deg) = args.incline {
        config = config.with_incline(deg);
    }
    let gait = resolve_gait(args)?;
    let topo = config.topology;
    let start = sim::initial_state(&config);
    let trace = sim::rollout_from(start, &gait, args.cycles, args.reversed, &config)?;

    files::write_com_trace(create(&args.out.join("com_trace.csv"))?, &trace)
        .map_err(|e| Failure::Config(e.to_string()))?;

    let mut plot = svg::Plot::new(&format!(
        "{} x{} cycles, CoM ground path",
        gait.name, args.cycles
    ));
    plot.polyline(
        trace.samples.iter().map(|s| {
            let c = s.com();
            (c.x, c.y)
        }),
        "#0066cc",
        1.6,
    );
    plot.marker((trace.initial_com.x, trace.initial_com.y), "#11aa11", 4.0);
    let end = trace.final_state.com();
    plot.marker((end.x, end.y), "#cc2222", 4.0);
    std::io::Write::write_all(
        &mut create(&args.out.join("rollout.svg"))?,
        plot.render().as_bytes(),
    )
    .map_err(|e| Failure::Config(e.to_string()))?;

    if args.sensor_log {
        let noise = NoiseSpec::new(args.sensor_noise, args.bar_noise_deg.to_radians());
        let mut rng = seeded_rng(seed);
        let (frames, truth) = log_rollout(&trace, &topo, &noise, 5, &mut rng);
        files::write_sensor_frames(create(&args.out.join("frames.csv"))?, &frames)
            .map_err(|e| Failure::Config(e.to_string()))?;
        files::write_truth_shapes(create(&args.out.join("truth.csv"))?, &truth)
            .map_err(|e| Failure::Config(e.to_string()))?;
    }

    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} cycles of {:?}: {} face changes, net displacement ({:+.3}, {:+.3}) m",
        args.cycles,
        gait.name,
        trace.face_changes.len(),
        trace.net_displacement().x,
        trace.net_displacement().y
    );
    println!(
        "mean speed: {:.2} bar lengths per minute over {:.2} s",
        trace.mean_speed_bl_per_min(topo.bar_length),
        trace.duration()
    );
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let topo = RobotTopology::default();
    let frames = files::read_sensor_frames(open(&args.frames)?)
        .map_err(|e| Failure::Config(e.to_string()))?;
    if frames.is_empty() {
        return config_err("no frames in input");
    }
    let estimates = estimation::replay(&frames, &topo).map_err(|e| Failure::Domain(e.to_string()))?;
    let records: Vec<files::EstimateRecord> = frames
        .iter()
        .zip(&estimates)
        .map(|(f, e)| files::EstimateRecord::new(f.timestamp, e))
        .collect();
    files::write_estimates(create(&args.out.join("estimates.jsonl"))?, &records)
        .map_err(|e| Failure::Config(e.to_string()))?;

    if let Some(truth_path) = &args.truth {
        let truth = files::read_truth_shapes(open(truth_path)?)
            .map_err(|e| Failure::Config(e.to_string()))?;
        if truth.len() != estimates.len() {
            return config_err(format!(
                "truth has {} rows but there are {} frames",
                truth.len(),
                estimates.len()
            ));
        }
        let rows: Vec<(f64, f64)> = estimates
            .iter()
            .zip(&truth)
            .map(|(e, (t, shape))| (*t, estimation::rmse_nodes(e, shape, &topo)))
            .collect();
        files::write_rmse(create(&args.out.join("rmse.csv"))?, &rows)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let mut vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
        vals.sort_by(f64::total_cmp);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        println!(
            "replayed {} frames: node RMSE mean {:.2}% / median {:.2}% / max {:.2}% of bar length",
            frames.len(),
            mean * 100.0,
            vals[vals.len() / 2] * 100.0,
            vals.last().unwrap() * 100.0
        );
    } else {
        println!("replayed {} frames", frames.len());
    }
    Ok(())
}

fn cmd_tabulate(args: &TabulateArgs) -> Result<(), Failure> {
    let config = SimConfig::default();
    let table = sim::build_action_table(&config)?;
    files::write_action_table(create(&args.out)?, &table)
        .map_err(|e| Failure::Config(e.to_string()))?;
    println!("tabulated {} actions to {}", table.len(), args.out.display());
    Ok(())
}

fn preset_trajectory(preset: TrajPreset) -> (Trajectory, CostWeights) {
    match preset {
        TrajPreset::Line => (
            Trajectory::line(Vector2::new(0.0, 0.0), Vector2::new(2.0, 0.0), 0.02),
            CostWeights::STRAIGHT_LINE,
        ),
        TrajPreset::Circle => (
            Trajectory::arc(
                Vector2::new(0.0, 1.0),
                1.0,
                -std::f64::consts::FRAC_PI_2,
                std::f64::consts::FRAC_PI_2,
                0.02,
            ),
            CostWeights::CIRCULAR_ARC,
        ),
        TrajPreset::Triangle => (
            Trajectory::polyline(
                &[
                    Vector2::new(0.0, 0.0),
                    Vector2::new(1.2, 0.0),
                    Vector2::new(1.2, 1.2),
                    Vector2::new(0.0, 0.0),
                ],
                0.02,
                &[0, 1, 2],
            ),
            CostWeights::RIGHT_TRIANGLE,
        ),
    }
}

fn cmd_plan(args: &PlanArgs) -> Result<(), Failure> {
    let config = SimConfig::default();
    let (traj, mut weights) = match (&args.trajectory, args.preset) {
        (Some(path), _) => {
            let traj = files::read_trajectory(open(path)?)
                .map_err(|e| Failure::Config(e.to_string()))?;
            (traj, CostWeights::STRAIGHT_LINE)
        }
        (None, Some(preset)) => preset_trajectory(preset),
        (None, None) => return config_err("need --trajectory or --preset"),
    };
    if let Some(wd) = args.wd {
        weights.w_d = wd;
    }
    if let Some(wa) = args.wa {
        weights.w_a = wa;
    }
    if let Some(wp) = args.wp {
        weights.w_p = wp;
    }
    let table = match &args.table {
        Some(path) => {
            files::read_action_table(open(path)?).map_err(|e| Failure::Config(e.to_string()))?
        }
        None => {
            eprintln!("no --table given; tabulating 51 actions first (slow)");
            sim::build_action_table(&config)?
        }
    };
    let start = sim::initial_state(&config);
    let run = planner::step_and_replan(
        start,
        &traj,
        &table,
        &weights,
        &config,
        &ClosedLoopOptions {
            max_plans: args.max_plans,
            stall_window: args.stall_window,
        },
    )?;

    files::write_plan_log(create(&args.out.join("plan_log.jsonl"))?, &run.records)
        .map_err(|e| Failure::Config(e.to_string()))?;
    files::write_tracking_error(
        create(&args.out.join("tracking_error.csv"))?,
        &run.records,
        config.topology.bar_length,
    )
    .map_err(|e| Failure::Config(e.to_string()))?;

    let mut plot = svg::Plot::new("trajectory following: target (gray), CoM (blue)");
    plot.polyline(traj.waypoints().iter().map(|p| (p.x, p.y)), "#999999", 1.0);
    let mut com_path = Vec::new();
    for trace in &run.traces {
        com_path.extend(trace.samples.iter().map(|s| {
            let c = s.com();
            (c.x, c.y)
        }));
    }
    plot.polyline(com_path, "#0066cc", 1.6);
    for r in &run.records {
        plot.marker((r.measured_pose.t.x, r.measured_pose.t.y), "#cc8800", 2.5);
    }
    std::io::Write::write_all(
        &mut create(&args.out.join("plan.svg"))?,
        plot.render().as_bytes(),
    )
    .map_err(|e| Failure::Config(e.to_string()))?;

    println!(
        "reached: {} after {} plans, {} segment switches, {} reversals",
        run.reached,
        run.records.len(),
        run.segment_switches,
        run.reversals
    );
    let end = run.final_state.com();
    let goal = traj.last_waypoint();
    println!(
        "final CoM ({:+.3}, {:+.3}), endpoint ({:+.3}, {:+.3}), distance {:.3} m",
        end.x,
        end.y,
        goal.x,
        goal.y,
        (Vector2::new(end.x, end.y) - goal).norm()
    );
    Ok(())
}

fn parse_face(name: &str) -> Result<FaceId, Failure> {
    match name {
        "F0" | "f0" => Ok(FaceId::F0),
        "F1" | "f1" => Ok(FaceId::F1),
        "F2" | "f2" => Ok(FaceId::F2),
        other => config_err(format!("unknown face {other:?} (use F0, F1, F2)")),
    }
}

fn cmd_gait_expand(args: &GaitExpandArgs) -> Result<(), Failure> {
    let face = parse_face(&args.face)?;
    let base = gait_by_name(&args.gait).map_err(|e| Failure::Config(e.to_string()))?;
    let gait = match (args.reverse, args.swap_pivot, args.full) {
        (false, false, false) => symmetry::translate_gait(&base, face),
        (true, false, false) => symmetry::reverse_gait(&base, face),
        (false, true, false) => symmetry::swap_pivot(&base, face),
        (false, false, true) => symmetry::expand_full_gait(&base, face, base.cycle_face_advance),
        (true, false, true) => symmetry::expand_reverse_gait(&base, face),
        (false, true, true) => {
            let swapped = symmetry::swap_pivot(&base, face);
            symmetry::expand_full_gait(&swapped, face, swapped.cycle_face_advance)
        }
        _ => return config_err("--reverse and --swap-pivot are mutually exclusive"),
    };
    let file = files::GaitFile::from_gait(&gait);
    println!("{}", serde_json::to_string_pretty(&file).map_err(|e| Failure::Config(e.to_string()))?);
    Ok(())
}

fn cmd_limbo(args: &LimboArgs) -> Result<(), Failure> {
    let config = SimConfig::default();
    let log = planner::run_limbo(args.bar_height, args.lowering, args.rounds, &config)?;
    // Height trace CSV: t, robot height, bar height.
    {
        let mut w = create(&args.out.join("height_trace.csv"))?;
        use std::io::Write as _;
        writeln!(w, "t,robot_height_m,bar_height_m").map_err(|e| Failure::Config(e.to_string()))?;
        for (t, h, bar) in &log.height_trace {
            writeln!(w, "{t:?},{h:?},{bar:?}").map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    {
        let mut w = create(&args.out.join("rounds.jsonl"))?;
        use std::io::Write as _;
        for r in &log.rounds {
            writeln!(
                w,
                "{}",
                serde_json::to_string(r).map_err(|e| Failure::Config(e.to_string()))?
            )
            .map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    for r in &log.rounds {
        println!(
            "round {}: bar {:.3} m -> range {:.3} m, {} cycles, reversed {}, max robot height {:.3} m, reached {}",
            r.round, r.bar_height, r.range, r.cycles, r.reversed, r.max_robot_height, r.reached
        );
    }
    if log.rounds.is_empty() {
        println!(
            "bar at {:.3} m is already too low to fit under; nothing to do",
            args.bar_height
        );
    } else if log.rounds.last().is_some_and(|r| !r.reached) {
        println!(
            "limbo ended after {} rounds: the remaining range is too small to keep rolling",
            log.rounds.len()
        );
    } else {
        println!("limbo ended after {} rounds (bar too low to continue)", log.rounds.len());
    }
    Ok(())
}
