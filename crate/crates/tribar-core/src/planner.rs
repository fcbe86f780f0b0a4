//! Model-based trajectory following: the tabulated-action cost search,
//! segment switching with the roll-direction rule, and the limbo height
//! rule.

use crate::pose::{cross2, Pose2D};
use crate::sim::{
    execute_action, ActionTable, RolloutTrace, SimConfig, SimError, SimState, TabulatedAction,
};
use crate::symmetry::FaceId;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segment endpoint radius: a segment is done when the CoM is within this
/// distance of its last waypoint.
pub const ENDPOINT_RADIUS: f64 = 0.27;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("action table is empty")]
    EmptyTable,
    #[error("no progress over {plans} consecutive plans")]
    NonProgress { plans: usize },
    #[error("bar too low for limbo: {bar_height} m leaves no usable range")]
    BarTooLow { bar_height: f64 },
    #[error("trajectory needs at least 2 waypoints per segment")]
    DegenerateTrajectory,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Ordered 2D waypoints, optionally partitioned into straight segments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<Vector2<f64>>,
    segment_ids: Vec<usize>,
    pub endpoint_radius: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vector2<f64>>) -> Result<Self, PlanError> {
        let n = waypoints.len();
        Self::with_segments(waypoints, vec![0; n])
    }

    pub fn with_segments(
        waypoints: Vec<Vector2<f64>>,
        segment_ids: Vec<usize>,
    ) -> Result<Self, PlanError> {
        if waypoints.len() < 2 || waypoints.len() != segment_ids.len() {
            return Err(PlanError::DegenerateTrajectory);
        }
        for w in waypoints.windows(2) {
            if (w[1] - w[0]).norm() < 1e-12 {
                return Err(PlanError::DegenerateTrajectory);
            }
        }
        Ok(Self {
            waypoints,
            segment_ids,
            endpoint_radius: ENDPOINT_RADIUS,
        })
    }

    /// Straight line sampled every `spacing` meters.
    pub fn line(from: Vector2<f64>, to: Vector2<f64>, spacing: f64) -> Self {
        Self::polyline(&[from, to], spacing, &[0])
    }

    /// Polyline through corner points, one segment id per leg.
    pub fn polyline(corners: &[Vector2<f64>], spacing: f64, ids: &[usize]) -> Self {
        assert!(corners.len() >= 2 && ids.len() == corners.len() - 1);
        let mut waypoints = Vec::new();
        let mut segment_ids = Vec::new();
        for (leg, w) in corners.windows(2).enumerate() {
            let len = (w[1] - w[0]).norm();
            let steps = (len / spacing).ceil().max(1.0) as usize;
            let start = if leg == 0 { 0 } else { 1 };
            for k in start..=steps {
                waypoints.push(w[0] + (w[1] - w[0]) * (k as f64 / steps as f64));
                segment_ids.push(ids[leg]);
            }
        }
        Self::with_segments(waypoints, segment_ids).expect("polyline produces a valid trajectory")
    }

    /// Circular arc from `a0` to `a1` (radians) sampled every `spacing`.
    pub fn arc(center: Vector2<f64>, radius: f64, a0: f64, a1: f64, spacing: f64) -> Self {
        let len = radius * (a1 - a0).abs();
        let steps = (len / spacing).ceil().max(2.0) as usize;
        let waypoints = (0..=steps)
            .map(|k| {
                let a = a0 + (a1 - a0) * k as f64 / steps as f64;
                center + radius * Vector2::new(a.cos(), a.sin())
            })
            .collect();
        Self::new(waypoints).expect("arc produces a valid trajectory")
    }

    pub fn waypoints(&self) -> &[Vector2<f64>] {
        &self.waypoints
    }

    pub fn segment_ids(&self) -> &[usize] {
        &self.segment_ids
    }

    pub fn segment_count(&self) -> usize {
        self.segment_ids.iter().copied().max().unwrap_or(0) + 1
    }

    /// The waypoints of one segment as a standalone trajectory.
    pub fn segment(&self, id: usize) -> Trajectory {
        let pts: Vec<Vector2<f64>> = self
            .waypoints
            .iter()
            .zip(&self.segment_ids)
            .filter(|(_, &s)| s == id)
            .map(|(p, _)| *p)
            .collect();
        let n = pts.len();
        Trajectory {
            waypoints: pts,
            segment_ids: vec![id; n],
            endpoint_radius: self.endpoint_radius,
        }
    }

    /// Index of the waypoint nearest to `x`; ties resolve toward larger
    /// indices (progress-favoring).
    pub fn nearest_index(&self, x: Vector2<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.waypoints.iter().enumerate() {
            let d = (p - x).norm();
            if d <= best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Unit tangent at waypoint `i`; the last waypoint reuses the final
    /// segment direction.
    pub fn tangent_at(&self, i: usize) -> Vector2<f64> {
        let n = self.waypoints.len();
        let (a, b) = if i + 1 < n {
            (self.waypoints[i], self.waypoints[i + 1])
        } else {
            (self.waypoints[n - 2], self.waypoints[n - 1])
        };
        (b - a).normalize()
    }

    pub fn last_waypoint(&self) -> Vector2<f64> {
        *self.waypoints.last().unwrap()
    }

    /// Arc length from waypoint `i` to the end.
    pub fn remaining_length(&self, i: usize) -> f64 {
        self.waypoints[i..]
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Hand-tuned weights for distance, angle, and progression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_d: f64,
    pub w_a: f64,
    pub w_p: f64,
}

impl CostWeights {
    pub const STRAIGHT_LINE: CostWeights = CostWeights {
        w_d: 500.0,
        w_a: 200.0,
        w_p: 300.0,
    };
    pub const CIRCULAR_ARC: CostWeights = CostWeights {
        w_d: 400.0,
        w_a: 100.0,
        w_p: 300.0,
    };
    pub const RIGHT_TRIANGLE: CostWeights = CostWeights {
        w_d: 600.0,
        w_a: 100.0,
        w_p: 300.0,
    };
}

/// Planner view of the robot: planar pose (theta is the principal-axis
/// angle, flipped by pi while rolling reversed) plus face and direction.
#[derive(Debug, Clone, Copy)]
pub struct PlannerState {
    pub pose: Pose2D,
    pub face: FaceId,
    pub reversed: bool,
}

impl PlannerState {
    pub fn principal_axis(&self) -> Vector2<f64> {
        Vector2::new(self.pose.theta.cos(), self.pose.theta.sin())
    }

    pub fn heading(&self) -> Vector2<f64> {
        crate::pose::rot90_ccw(self.principal_axis())
    }

    fn from_sim(state: &SimState, reversed: bool) -> Self {
        let raw = state.pose();
        let pose = if reversed {
            Pose2D::new(raw.theta + std::f64::consts::PI, raw.t)
        } else {
            raw
        };
        Self {
            pose,
            face: state.face,
            reversed,
        }
    }
}

/// Trajectory-following cost of a pose: weighted distance to the nearest
/// waypoint, heading-tangent misalignment, and remaining progression.
pub fn cost(pose: &Pose2D, traj: &Trajectory, weights: &CostWeights) -> f64 {
    let x = pose.t;
    let i = traj.nearest_index(x);
    let n = (traj.waypoints().len() - 1).max(1) as f64;
    let heading = crate::pose::rot90_ccw(Vector2::new(pose.theta.cos(), pose.theta.sin()));
    let tangent = traj.tangent_at(i);
    let align = heading.dot(&tangent).clamp(-1.0, 1.0);
    weights.w_d * (traj.waypoints()[i] - x).norm()
        + weights.w_a * align.acos().abs()
        + weights.w_p * (1.0 - i as f64 / n)
}

/// A two-ply plan: the chosen action pair, the predicted poses after each
/// action, and the depth-two cost.
#[derive(Debug, Clone, Copy)]
pub struct TwoPlyPlan {
    pub first: TabulatedAction,
    pub second: TabulatedAction,
    pub predicted: [Pose2D; 2],
    pub cost: f64,
}

/// Transform an action contributes to the planner pose. Rolling actions in
/// reversed mode move along the flipped heading, so the tabulated transform
/// applies unchanged in the flipped frame. Turn-in-place actions are always
/// dispatched in their forward form (reversing them yields the same turning
/// direction anyway), so in the flipped frame their translation negates.
fn effective_transform(action: &TabulatedAction, reversed: bool) -> Pose2D {
    let t = action.transform;
    if reversed && action.spec.kind != crate::sim::ActionKind::Rolling {
        Pose2D::new(t.dtheta, -t.translation())
    } else {
        t.as_pose()
    }
}

/// Whether the dispatched gait is mapped through the per-face reverse
/// permutations for this action while the robot is in reversed mode.
pub fn dispatch_reversed(action: &TabulatedAction, reversed: bool) -> bool {
    reversed && action.spec.kind == crate::sim::ActionKind::Rolling
}

/// Exhaustive depth-two search over the action table. The cost function is
/// evaluated at the depth-two pose; ties break lexicographically by action
/// id pair, so the result is deterministic.
pub fn plan_two_ply(
    state: &PlannerState,
    table: &ActionTable,
    traj: &Trajectory,
    weights: &CostWeights,
) -> Result<TwoPlyPlan, PlanError> {
    if table.is_empty() {
        return Err(PlanError::EmptyTable);
    }
    let mut best: Option<TwoPlyPlan> = None;
    for first in table {
        let p1 = state.pose.compose(&effective_transform(first, state.reversed));
        for second in table {
            let p2 = p1.compose(&effective_transform(second, state.reversed));
            let c = cost(&p2, traj, weights);
            if best.as_ref().is_none_or(|b| c < b.cost) {
                best = Some(TwoPlyPlan {
                    first: *first,
                    second: *second,
                    predicted: [p1, p2],
                    cost: c,
                });
            }
        }
    }
    Ok(best.unwrap())
}

/// One executed plan step of the closed loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanRecord {
    pub step: usize,
    pub chosen_actions: [usize; 2],
    pub predicted_pose: Pose2D,
    pub measured_pose: Pose2D,
    pub cost: f64,
    pub segment: usize,
    pub reversed: bool,
    /// Distance from the trajectory at this planning step (to the nearest
    /// waypoint of the full trajectory), for error-vs-arclength reports.
    pub cross_track_error: f64,
    /// Fraction of the full trajectory arc length passed.
    pub progress: f64,
}

#[derive(Debug)]
pub struct ClosedLoopRun {
    pub records: Vec<PlanRecord>,
    pub reached: bool,
    pub segment_switches: usize,
    pub reversals: usize,
    pub final_state: SimState,
    pub traces: Vec<RolloutTrace>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClosedLoopOptions {
    pub max_plans: usize,
    pub stall_window: usize,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            max_plans: 200,
            stall_window: 10,
        }
    }
}

/// Decide whether the next segment is followed forward or reversed: the
/// robot keeps its typical forward rolling iff the cross product of its
/// principal axis with the segment direction is non-negative.
pub fn forward_for_segment(principal_axis: Vector2<f64>, segment_dir: Vector2<f64>) -> bool {
    cross2(principal_axis, segment_dir) >= 0.0
}

/// Closed-loop trajectory following against the simulator: plan two
/// actions, execute the first, measure, re-plan. Segments advance when the
/// endpoint rule fires; each new segment re-evaluates the roll direction.
pub fn step_and_replan(
    start: SimState,
    traj: &Trajectory,
    table: &ActionTable,
    weights: &CostWeights,
    config: &SimConfig,
    opts: &ClosedLoopOptions,
) -> Result<ClosedLoopRun, PlanError> {
    if table.is_empty() {
        return Err(PlanError::EmptyTable);
    }
    let mut sim_state = start;
    let mut reversed = false;
    let mut segment = 0usize;
    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut segment_switches = 0usize;
    let mut reversals = 0usize;
    let mut stall = 0usize;
    let mut last_remaining = f64::INFINITY;
    let full_length = traj.remaining_length(0);

    for step in 0..opts.max_plans {
        let planner_state = PlannerState::from_sim(&sim_state, reversed);
        let x = planner_state.pose.t;

        // Endpoint rule, possibly crossing several short segments.
        loop {
            let seg_traj = traj.segment(segment);
            let at_end = (x - seg_traj.last_waypoint()).norm() <= traj.endpoint_radius
                || seg_traj.nearest_index(x) == seg_traj.waypoints().len() - 1;
            if !at_end {
                break;
            }
            if segment + 1 >= traj.segment_count() {
                return Ok(ClosedLoopRun {
                    records,
                    reached: true,
                    segment_switches,
                    reversals,
                    final_state: sim_state,
                    traces,
                });
            }
            segment += 1;
            segment_switches += 1;
            let next = traj.segment(segment);
            let dir = next.tangent_at(next.nearest_index(x));
            if !forward_for_segment(planner_state.principal_axis(), dir) {
                reversed = !reversed;
                reversals += 1;
            }
        }

        let planner_state = PlannerState::from_sim(&sim_state, reversed);
        let seg_traj = traj.segment(segment);
        let plan = plan_two_ply(&planner_state, table, &seg_traj, weights)?;
        let (next_state, trace) = execute_action(
            sim_state,
            &plan.first.spec,
            dispatch_reversed(&plan.first, reversed),
            config,
        )?;
        sim_state = next_state;

        let measured = PlannerState::from_sim(&sim_state, reversed);
        let nearest_full = traj.nearest_index(measured.pose.t);
        records.push(PlanRecord {
            step,
            chosen_actions: [plan.first.id, plan.second.id],
            predicted_pose: plan.predicted[0],
            measured_pose: measured.pose,
            cost: plan.cost,
            segment,
            reversed,
            cross_track_error: (traj.waypoints()[nearest_full] - measured.pose.t).norm(),
            progress: if full_length > 0.0 {
                1.0 - traj.remaining_length(nearest_full) / full_length
            } else {
                1.0
            },
        });
        traces.push(trace);

        let remaining = traj.remaining_length(nearest_full) + records.last().unwrap().cross_track_error;
        if remaining < last_remaining - 1e-4 {
            stall = 0;
            last_remaining = remaining;
        } else {
            stall += 1;
            if stall >= opts.stall_window {
                return Err(PlanError::NonProgress { plans: stall });
            }
        }
    }
    Err(PlanError::NonProgress {
        plans: opts.max_plans,
    })
}

/// Gait range for rolling under a limbo bar: the measured bar height minus
/// 120 mm, capped at 140 mm and rounded down to the nearest 10 mm.
pub fn limbo_range(bar_height: f64) -> Result<f64, PlanError> {
    if bar_height <= 0.130 + 1e-12 {
        return Err(PlanError::BarTooLow { bar_height });
    }
    let capped = (bar_height - 0.120).min(0.140);
    Ok(((capped + 1e-9) / 0.010).floor() * 0.010)
}

/// One pass under the limbo bar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimboRound {
    pub round: usize,
    pub bar_height: f64,
    pub range: f64,
    pub reversed: bool,
    pub cycles: usize,
    pub reached: bool,
    pub max_robot_height: f64,
}

#[derive(Debug)]
pub struct LimboLog {
    pub rounds: Vec<LimboRound>,
    /// (time, robot height, bar height) samples over the whole run.
    pub height_trace: Vec<(f64, f64, f64)>,
    pub final_state: SimState,
}

/// Limbo scenario: shrink the gait range to fit under the bar, roll a
/// 70 cm path, restore full height, lower the bar, and come back reversed.
/// Ends when the bar gets too low; resumption is automatic here rather
/// than manually triggered.
pub fn run_limbo(
    start_bar_height: f64,
    lowering: f64,
    max_rounds: usize,
    config: &SimConfig,
) -> Result<LimboLog, PlanError> {
    const PATH_LENGTH: f64 = 0.70;
    let mut state = crate::sim::initial_state(config);
    let mut bar = start_bar_height;
    let mut log = LimboLog {
        rounds: Vec::new(),
        height_trace: Vec::new(),
        final_state: state.clone(),
    };
    for round in 0..max_rounds {
        let range = match limbo_range(bar) {
            Ok(r) => r,
            Err(PlanError::BarTooLow { .. }) => break,
            Err(e) => return Err(e),
        };
        let reversed = round % 2 == 1;
        let params = crate::gait::action_params(range, range);
        let gait = crate::gait::Gait::new(
            "limbo_roll",
            crate::gait::QUASISTATIC_STEPS.to_vec(),
            params,
            1,
        );
        let heading = if reversed {
            -PlannerState::from_sim(&state, false).heading()
        } else {
            PlannerState::from_sim(&state, false).heading()
        };
        let start_com = state.com();
        let start_xy = Vector2::new(start_com.x, start_com.y);
        let endpoint = start_xy + heading * PATH_LENGTH;
        let mut cycles = 0usize;
        let mut reached = false;
        let mut max_height: f64 = 0.0;
        while cycles < 12 {
            let trace = crate::sim::rollout_from(state.clone(), &gait, 1, reversed, config)?;
            for s in &trace.samples {
                let h = s.shape.nodes().iter().map(|p| p.z).fold(0.0, f64::max);
                max_height = max_height.max(h);
                log.height_trace.push((s.t, h, bar));
            }
            state = trace.final_state;
            cycles += 1;
            let com = state.com();
            let com_xy = Vector2::new(com.x, com.y);
            // Endpoint rule, tolerant of the open-loop heading drift: done
            // when within the endpoint radius or once the distance covered
            // along the commanded direction spans the path.
            let along = (com_xy - start_xy).dot(&heading);
            if (com_xy - endpoint).norm() <= ENDPOINT_RADIUS
                || along >= PATH_LENGTH - ENDPOINT_RADIUS
            {
                reached = true;
                break;
            }
        }
        log.rounds.push(LimboRound {
            round,
            bar_height: bar,
            range,
            reversed,
            cycles,
            reached,
            max_robot_height: max_height,
        });
        if !reached {
            // The range left under the bar is too small to keep rolling;
            // the game is over.
            break;
        }
        // Back to full height at the maximum range before the bar lowers.
        let tall_params = crate::gait::action_params(0.140, 0.140);
        let tall = crate::gait::Gait::new("limbo_rest", vec![[1.0; 6]], tall_params, 0);
        let trace = crate::sim::rollout_from(state.clone(), &tall, 1, false, config)?;
        for s in &trace.samples {
            let h = s.shape.nodes().iter().map(|p| p.z).fold(0.0, f64::max);
            log.height_trace.push((s.t, h, bar));
        }
        state = trace.final_state;
        bar -= lowering;
    }
    log.final_state = state;
    Ok(log)
}
