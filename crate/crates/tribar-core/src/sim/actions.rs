//! The planner's action space: 49 rolling actions (every left/right range
//! combination from 90 mm to 150 mm in 10 mm steps) plus the two turn-in-
//! place gaits at 100 mm range, each tabulated as a planar transform in the
//! pre-action body frame.

use super::{initial_state, rollout_from, RolloutTrace, SimConfig, SimError, SimState};
use crate::gait::{action_params, Gait, CCW_TURN_STEPS, CW_TURN_STEPS, QUASISTATIC_STEPS};
use crate::pose::wrap_angle;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Rolling,
    CcwTurn,
    CwTurn,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Rolling => "rolling",
            ActionKind::CcwTurn => "ccw_turn",
            ActionKind::CwTurn => "cw_turn",
        }
    }
}

/// One locomotion action. Rolling actions with equal ranges move straight;
/// unequal ranges turn gradually, analogous to differential drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub kind: ActionKind,
    /// Range on the left side (odd triangle), m.
    pub left_range: f64,
    /// Range on the right side (even triangle), m.
    pub right_range: f64,
}

/// Planar rigid transform produced by one action, in the pre-action body
/// frame: rotation of the principal axis about z, and translation
/// t^0 = R_W^0 d^W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTransform {
    pub dtheta: f64,
    pub tx: f64,
    pub ty: f64,
}

impl ActionTransform {
    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.tx, self.ty)
    }

    pub fn as_pose(&self) -> crate::Pose2D {
        crate::Pose2D::new(self.dtheta, self.translation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulatedAction {
    pub id: usize,
    pub spec: ActionSpec,
    pub transform: ActionTransform,
}

pub type ActionTable = Vec<TabulatedAction>;

const RANGE_MM: [u32; 7] = [90, 100, 110, 120, 130, 140, 150];
const TURN_RANGE: f64 = 0.100;

/// All 51 actions in deterministic id order: rolling pairs first
/// (left-major), then the ccw and cw turns.
pub fn action_space() -> Vec<ActionSpec> {
    let mut actions = Vec::with_capacity(51);
    for left in RANGE_MM {
        for right in RANGE_MM {
            actions.push(ActionSpec {
                kind: ActionKind::Rolling,
                left_range: left as f64 * 1e-3,
                right_range: right as f64 * 1e-3,
            });
        }
    }
    actions.push(ActionSpec {
        kind: ActionKind::CcwTurn,
        left_range: TURN_RANGE,
        right_range: TURN_RANGE,
    });
    actions.push(ActionSpec {
        kind: ActionKind::CwTurn,
        left_range: TURN_RANGE,
        right_range: TURN_RANGE,
    });
    actions
}

/// The gait an action dispatches: the quasistatic rolling steps with the
/// action's per-side ranges, or a turn gait at the fixed turn range.
pub fn gait_for_action(spec: &ActionSpec) -> Gait {
    let params = action_params(spec.left_range, spec.right_range);
    match spec.kind {
        ActionKind::Rolling => Gait::new("roll_action", QUASISTATIC_STEPS.to_vec(), params, 1),
        ActionKind::CcwTurn => Gait::new("ccw_turn_action", CCW_TURN_STEPS.to_vec(), params, 0),
        ActionKind::CwTurn => Gait::new("cw_turn_action", CW_TURN_STEPS.to_vec(), params, -1),
    }
}

/// Execute one cycle of an action's gait from a state. `reversed` applies
/// the per-face reverse mapping (the robot rolling backward).
pub fn execute_action(
    state: SimState,
    spec: &ActionSpec,
    reversed: bool,
    config: &SimConfig,
) -> Result<(SimState, RolloutTrace), SimError> {
    let gait = gait_for_action(spec);
    let trace = rollout_from(state, &gait, 1, reversed, config)?;
    Ok((trace.final_state.clone(), trace))
}

/// Measure the planar transform one action produces from a state.
pub fn measure_action(
    state: SimState,
    spec: &ActionSpec,
    config: &SimConfig,
) -> Result<(ActionTransform, SimState), SimError> {
    let pose_before = state.pose();
    let (after, _) = execute_action(state, spec, false, config)?;
    let pose_after = after.pose();
    let dtheta = wrap_angle(pose_after.theta - pose_before.theta);
    let d_world = pose_after.t - pose_before.t;
    let t_body = pose_before.rotation().transpose() * d_world;
    Ok((
        ActionTransform {
            dtheta,
            tx: t_body.x,
            ty: t_body.y,
        },
        after,
    ))
}

/// Tabulate one action from the canonical rest state.
pub fn tabulate_action(spec: &ActionSpec, config: &SimConfig) -> Result<ActionTransform, SimError> {
    let (transform, _) = measure_action(initial_state(config), spec, config)?;
    Ok(transform)
}

/// Tabulate the whole action space. Deterministic given the config.
pub fn build_action_table(config: &SimConfig) -> Result<ActionTable, SimError> {
    let rest = initial_state(config);
    action_space()
        .iter()
        .enumerate()
        .map(|(id, spec)| {
            let (transform, _) = measure_action(rest.clone(), spec, config)?;
            Ok(TabulatedAction {
                id,
                spec: *spec,
                transform,
            })
        })
        .collect()
}
