//! Gait execution: tendon-length normalization, per-tendon PID with
//! saturation, first-reach latching, and the library of named gaits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Control loop rate used by the gait engine and the simulator.
pub const TICK_HZ: f64 = 100.0;
pub const TICK_DT: f64 = 1.0 / TICK_HZ;

/// Tendon speed at full duty cycle (command 99), in m/s. Calibrated so a
/// full-range contraction at max speed takes on the order of one second.
pub const MOTOR_FULL_SPEED: f64 = 0.15;

/// Hard travel limits for a tendon plant, in meters.
pub const PLANT_MIN_LENGTH: f64 = 0.010;
pub const PLANT_MAX_LENGTH: f64 = 0.600;

/// Default per-step tick budget before a step is declared stuck.
pub const DEFAULT_STEP_BUDGET: usize = 3000;

#[derive(Debug, Error)]
pub enum GaitError {
    /// A step failed to latch all six tendons within the tick budget,
    /// usually a sign of infeasible targets (triangle-inequality conflict).
    #[error("gait step timed out after {ticks} ticks; unlatched tendons: {unlatched:?}")]
    StepTimeout { ticks: usize, unlatched: Vec<usize> },
    #[error("invalid gait parameters: {0}")]
    InvalidParams(String),
    #[error("unknown gait {0:?}")]
    UnknownGait(String),
}

/// Which denominator the position normalization uses.
///
/// The robot's control law divides by `minimum length + range`, which
/// disagrees with the stated meaning of the scale (0 at the minimum
/// length, 1 at minimum plus range). We implement the as-written form as
/// the default and keep the intended form selectable; the simulator
/// uses [`NormalizationRule::RangeOnly`] so that commanded target lengths
/// stay geometrically reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationRule {
    #[default]
    MinPlusRange,
    RangeOnly,
}

impl NormalizationRule {
    fn denominator(self, min_length: f64, range: f64) -> f64 {
        match self {
            NormalizationRule::MinPlusRange => min_length + range,
            NormalizationRule::RangeOnly => range,
        }
    }
}

/// Position of a tendon on the normalized scale.
pub fn normalize(length: f64, min_length: f64, range: f64, rule: NormalizationRule) -> f64 {
    (length - min_length) / rule.denominator(min_length, range)
}

/// Inverse of [`normalize`].
pub fn denormalize(position: f64, min_length: f64, range: f64, rule: NormalizationRule) -> f64 {
    min_length + position * rule.denominator(min_length, range)
}

/// Per-gait controller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    /// Minimum tendon length (position 0), m.
    pub min_length: f64,
    /// Range on the left side (tendons A, B, C on the odd triangle), m.
    pub range_left: f64,
    /// Range on the right side (tendons D, E, F on the even triangle), m.
    pub range_right: f64,
    /// Tolerance for targets closer to 1, as a fraction of the range.
    pub tolerance_high: f64,
    /// Tolerance for targets closer to 0.
    pub tolerance_low: f64,
    /// Command saturation bound; 99 is the maximum duty cycle.
    pub max_speed: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    #[serde(default)]
    pub normalization: NormalizationRule,
}

impl GaitParams {
    /// Symmetric-range parameters with a single tolerance.
    pub fn uniform(min_length: f64, range: f64, tolerance: f64, max_speed: f64, kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            min_length,
            range_left: range,
            range_right: range,
            tolerance_high: tolerance,
            tolerance_low: tolerance,
            max_speed,
            kp,
            ki,
            kd,
            normalization: NormalizationRule::default(),
        }
    }

    /// Range for tendon index 0..=5 (A..F).
    pub fn range_for(&self, tendon: usize) -> f64 {
        if tendon < 3 {
            self.range_left
        } else {
            self.range_right
        }
    }

    pub fn with_ranges(mut self, left: f64, right: f64) -> Self {
        self.range_left = left;
        self.range_right = right;
        self
    }

    pub fn with_normalization(mut self, rule: NormalizationRule) -> Self {
        self.normalization = rule;
        self
    }

    /// Tolerance band for a target: targets above 0.5 use the high tolerance.
    pub fn tolerance_for(&self, target: f64) -> f64 {
        if target > 0.5 {
            self.tolerance_high
        } else {
            self.tolerance_low
        }
    }

    pub fn position(&self, tendon: usize, length: f64) -> f64 {
        normalize(length, self.min_length, self.range_for(tendon), self.normalization)
    }

    pub fn length_for_position(&self, tendon: usize, position: f64) -> f64 {
        denormalize(position, self.min_length, self.range_for(tendon), self.normalization)
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        let ok = self.min_length > 0.0
            && self.range_left > 0.0
            && self.range_right > 0.0
            && self.tolerance_high > 0.0
            && self.tolerance_high < 1.0
            && self.tolerance_low > 0.0
            && self.tolerance_low < 1.0
            && self.max_speed > 0.0
            && self.max_speed <= 99.0;
        if ok {
            Ok(())
        } else {
            Err(GaitError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// PID command from an error history: `u = Kp e_T + Ki sum(e) + Kd (e_T - e_{T-1})`,
/// scaled by max speed and clamped to [-max_speed, max_speed].
pub fn pid_command(errors: &[f64], params: &GaitParams) -> f64 {
    assert!(!errors.is_empty(), "pid_command needs at least one error sample");
    let e_t = *errors.last().unwrap();
    let sum: f64 = errors.iter().sum();
    let de = if errors.len() >= 2 {
        e_t - errors[errors.len() - 2]
    } else {
        0.0
    };
    let u = params.kp * e_t + params.ki * sum + params.kd * de;
    (u * params.max_speed).clamp(-params.max_speed, params.max_speed)
}

/// Incremental form of [`pid_command`]; one per tendon, reset at step start.
#[derive(Debug, Clone, Copy, Default)]
pub struct PidState {
    integral: f64,
    prev_error: Option<f64>,
}

impl PidState {
    pub fn update(&mut self, error: f64, params: &GaitParams) -> f64 {
        self.integral += error;
        let de = match self.prev_error {
            Some(prev) => error - prev,
            None => 0.0,
        };
        self.prev_error = Some(error);
        let u = params.kp * error + params.ki * self.integral + params.kd * de;
        (u * params.max_speed).clamp(-params.max_speed, params.max_speed)
    }
}

/// One target shape: six normalized target lengths in tendon order A..F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GaitStep {
    pub targets: [f64; 6],
}

impl GaitStep {
    pub fn new(targets: [f64; 6]) -> Self {
        debug_assert!(targets.iter().all(|t| (0.0..=1.0).contains(t)));
        Self { targets }
    }
}

/// A repeating sequence of target shapes plus its controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gait {
    pub name: String,
    pub steps: Vec<GaitStep>,
    pub params: GaitParams,
    /// Faces advanced per full cycle: +1 for forward rolling, -1 for gaits
    /// that roll onto faces in the opposite sequence, 0 for gaits that keep
    /// the same face.
    pub cycle_face_advance: i8,
}

impl Gait {
    pub fn new(name: &str, steps: Vec<[f64; 6]>, params: GaitParams, cycle_face_advance: i8) -> Self {
        assert!(!steps.is_empty(), "a gait needs at least one step");
        Self {
            name: name.to_string(),
            steps: steps.into_iter().map(GaitStep::new).collect(),
            params,
            cycle_face_advance,
        }
    }
}

/// Drives one gait step to completion: commands unlatched tendons each tick
/// and latches each tendon the first time it reaches its tolerance band.
#[derive(Debug, Clone)]
pub struct StepExecutor {
    pub targets: [f64; 6],
    latched: [bool; 6],
    pids: [PidState; 6],
    pub ticks: usize,
}

impl StepExecutor {
    pub fn new(step: &GaitStep) -> Self {
        Self {
            targets: step.targets,
            latched: [false; 6],
            pids: [PidState::default(); 6],
            ticks: 0,
        }
    }

    pub fn all_latched(&self) -> bool {
        self.latched.iter().all(|&l| l)
    }

    pub fn latched(&self) -> [bool; 6] {
        self.latched
    }

    /// One control tick. Takes the current tendon lengths, returns motor
    /// commands (zero for latched tendons). Latch checks happen before
    /// commanding, so a tendon already in its band is stopped immediately.
    pub fn tick(&mut self, lengths: &[f64; 6], params: &GaitParams) -> [f64; 6] {
        let mut commands = [0.0; 6];
        for (i, cmd) in commands.iter_mut().enumerate() {
            if self.latched[i] {
                continue;
            }
            let position = params.position(i, lengths[i]);
            let target = self.targets[i];
            if (position - target).abs() <= params.tolerance_for(target) {
                self.latched[i] = true;
                continue;
            }
            let error = position - target;
            *cmd = self.pids[i].update(error, params);
        }
        self.ticks += 1;
        commands
    }
}

/// First-order tendon plant: each commanded tendon contracts (positive
/// command) or extends (negative) at a rate proportional to duty cycle.
#[derive(Debug, Clone, Copy)]
pub struct TendonPlant {
    pub lengths: [f64; 6],
    pub full_speed: f64,
}

impl TendonPlant {
    pub fn new(lengths: [f64; 6]) -> Self {
        Self {
            lengths,
            full_speed: MOTOR_FULL_SPEED,
        }
    }

    pub fn apply(&mut self, commands: &[f64; 6], dt: f64) {
        for (length, cmd) in self.lengths.iter_mut().zip(commands) {
            let rate = -self.full_speed * cmd / 99.0;
            *length = (*length + rate * dt).clamp(PLANT_MIN_LENGTH, PLANT_MAX_LENGTH);
        }
    }
}

/// Trace of one completed step on a scalar plant.
#[derive(Debug, Clone)]
pub struct StepTrace {
    /// Tendon lengths after every tick, including the initial state.
    pub lengths: Vec<[f64; 6]>,
    /// Commands issued at every tick.
    pub commands: Vec<[f64; 6]>,
    pub ticks: usize,
    pub duration_s: f64,
}

/// Run one gait step against a first-order plant until all six tendons
/// latch. Errors with [`GaitError::StepTimeout`] when the tick budget runs
/// out, which signals infeasible targets.
pub fn step_until_reached(
    plant: &mut TendonPlant,
    step: &GaitStep,
    params: &GaitParams,
    budget: usize,
) -> Result<StepTrace, GaitError> {
    params.validate()?;
    let mut exec = StepExecutor::new(step);
    let mut trace = StepTrace {
        lengths: vec![plant.lengths],
        commands: Vec::new(),
        ticks: 0,
        duration_s: 0.0,
    };
    while !exec.all_latched() {
        if exec.ticks >= budget {
            let unlatched = (0..6).filter(|&i| !exec.latched[i]).collect();
            return Err(GaitError::StepTimeout {
                ticks: exec.ticks,
                unlatched,
            });
        }
        let commands = exec.tick(&plant.lengths, params);
        plant.apply(&commands, TICK_DT);
        trace.commands.push(commands);
        trace.lengths.push(plant.lengths);
    }
    trace.ticks = exec.ticks;
    trace.duration_s = exec.ticks as f64 * TICK_DT;
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Gait library
// ---------------------------------------------------------------------------

/// Floor parameters for the quasistatic gait (terrain table, floor column).
pub fn floor_params() -> GaitParams {
    GaitParams::uniform(0.100, 0.090, 0.12, 99.0, 8.0, 0.01, 0.5)
}

/// Parameters shared by all planner actions: min 100 mm, tolerance 20%,
/// max speed 99, Kp 6, Ki 0.01, Kd 0.5.
pub fn action_params(range_left: f64, range_right: f64) -> GaitParams {
    let mut p = GaitParams::uniform(0.100, 0.100, 0.20, 99.0, 6.0, 0.01, 0.5);
    p.range_left = range_left;
    p.range_right = range_right;
    p
}

pub const QUASISTATIC_STEPS: [[f64; 6]; 2] =
    [[1.0, 1.0, 0.1, 1.0, 1.0, 0.1], [0.0, 1.0, 1.0, 0.0, 1.0, 0.1]];

pub const DYNAMIC_STEPS: [[f64; 6]; 1] = [[0.0, 1.0, 1.0, 0.0, 1.0, 0.1]];

pub const CCW_TURN_STEPS: [[f64; 6]; 4] = [
    [1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0, 0.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
];

pub const CW_TURN_STEPS: [[f64; 6]; 4] = [
    [0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.8, 0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
];

pub const CRAWL_LEFT_CW_STEPS: [[f64; 6]; 3] = [
    [0.0, 0.0, 0.0, 0.1, 0.1, 0.1],
    [0.0, 0.0, 0.0, 1.0, 0.1, 1.0],
    [0.0, 0.0, 0.0, 1.0, 1.0, 0.1],
];

pub const CRAWL_LEFT_CCW_STEPS: [[f64; 6]; 3] = [
    [0.0, 0.0, 0.0, 0.1, 0.1, 0.1],
    [0.0, 0.0, 0.0, 1.0, 1.0, 0.1],
    [0.0, 0.0, 0.0, 1.0, 0.1, 1.0],
];

pub const QUASISTATIC_IMPACT_STEPS: [[f64; 6]; 3] = [
    [1.0, 1.0, 0.1, 1.0, 1.0, 0.1],
    [0.0, 1.0, 1.0, 0.0, 1.0, 0.1],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
];

/// The named gaits, each with the parameter set its experiments used.
pub fn gait_library() -> Vec<Gait> {
    let turn_params = GaitParams::uniform(0.100, 0.100, 0.15, 80.0, 6.0, 0.01, 0.5);
    let crawl_params = GaitParams::uniform(0.100, 0.090, 0.17, 99.0, 6.0, 0.01, 0.5);
    let dynamic_params = GaitParams::uniform(0.100, 0.090, 0.07, 99.0, 10.0, 0.01, 0.5);
    let impact_params = GaitParams::uniform(0.100, 0.100, 0.12, 99.0, 6.0, 0.01, 0.5);
    vec![
        Gait::new("quasistatic", QUASISTATIC_STEPS.to_vec(), floor_params(), 1),
        Gait::new("dynamic", DYNAMIC_STEPS.to_vec(), dynamic_params, 1),
        Gait::new("ccw_turn", CCW_TURN_STEPS.to_vec(), turn_params, 0),
        Gait::new("cw_turn", CW_TURN_STEPS.to_vec(), turn_params, -1),
        Gait::new("crawl_left_cw", CRAWL_LEFT_CW_STEPS.to_vec(), crawl_params, 0),
        Gait::new("crawl_left_ccw", CRAWL_LEFT_CCW_STEPS.to_vec(), crawl_params, 0),
        Gait::new(
            "quasistatic_impact",
            QUASISTATIC_IMPACT_STEPS.to_vec(),
            impact_params,
            1,
        ),
    ]
}

pub fn gait_by_name(name: &str) -> Result<Gait, GaitError> {
    gait_library()
        .into_iter()
        .find(|g| g.name == name)
        .ok_or_else(|| GaitError::UnknownGait(name.to_string()))
}
