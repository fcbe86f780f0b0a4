//! Simplified quasistatic rolling simulator.
//!
//! The model alternates three cheap sub-steps at the control rate: solve the
//! equilibrium body shape for the current cable lengths (form-finding with
//! slack-capable cables), rigidly place that shape in the world so the
//! loaded contact nodes move as little as possible (no-slip, weighted by
//! the static load each foot carries), and topple over support-polygon
//! edges whenever the weight projection leaves the support region. Inertia
//! is ignored throughout; even the "dynamic" gait is rolled out
//! quasistatically.

mod actions;
mod contact;
mod formfind;

pub use actions::{
    action_space, build_action_table, execute_action, gait_for_action, tabulate_action,
    ActionKind, ActionSpec, ActionTable, ActionTransform, TabulatedAction,
};
pub use contact::{contact_nodes, convex_hull};
pub use formfind::{form_find, passive_energy};

use crate::gait::{Gait, GaitError, GaitParams, NormalizationRule, StepExecutor, MOTOR_FULL_SPEED,
    PLANT_MAX_LENGTH, PLANT_MIN_LENGTH, TICK_DT};
use crate::shape::{principal_axis_2d, BodyAxes, RobotShape};
use crate::symmetry::{reverse_step, translate_step, FaceId};
use crate::topology::{RobotTopology, REST_ACTUATED_LENGTH};
use crate::Pose2D;
use nalgebra::{Matrix3, Vector2, Vector3};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Commanded tendon lengths cannot be realized by any shape.
    #[error("infeasible tendon targets: constraint residual {residual:.3e} m")]
    InfeasibleTargets { residual: f64 },
    /// The topple loop failed to reach a stable support.
    #[error("settle diverged after {0} topple iterations")]
    SettleDivergence(usize),
    #[error(transparent)]
    Gait(#[from] GaitError),
    /// The shape's ground projection degenerated (no principal axis).
    #[error("degenerate pose: {0}")]
    DegeneratePose(#[from] crate::shape::GeomError),
}

/// Simulator configuration. All plain data; cloning is cheap.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub topology: RobotTopology,
    /// Rest length of the passive spring tendons, m. Well below their
    /// operating lengths: the silicone tendons run near 100% strain, which
    /// keeps every actuated cable taut across the whole command range.
    pub passive_rest_length: f64,
    /// Passive tendon stiffness, N/m.
    pub passive_stiffness: f64,
    /// Penalty stiffness standing in for inextensible cables, N/m.
    pub actuated_stiffness: f64,
    /// Gravity vector; inclines are modeled by tilting it.
    pub gravity: Vector3<f64>,
    /// A node within this height of the ground plane is in contact, m.
    pub contact_tol: f64,
    /// End cap radius, m. Contact patches sit inboard of the node centers
    /// by roughly this much, so the support polygon is inset by it when
    /// testing stability.
    pub cap_radius: f64,
    /// Normalization rule used when executing gaits in simulation. The
    /// prose (range-only) form keeps commanded lengths geometrically
    /// reachable, so the simulator defaults to it.
    pub normalization: NormalizationRule,
    /// Tick budget per gait step before declaring a timeout.
    pub step_budget: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: RobotTopology::default(),
            passive_rest_length: 0.150,
            passive_stiffness: 100.0,
            actuated_stiffness: 1.0e6,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            contact_tol: 1e-3,
            cap_radius: 0.022,
            normalization: NormalizationRule::RangeOnly,
            step_budget: 3000,
        }
    }
}

impl SimConfig {
    /// Tilt gravity to model an incline of `degrees`: climbing happens
    /// along the robot's initial heading (+x).
    pub fn with_incline(mut self, degrees: f64) -> Self {
        let a = degrees.to_radians();
        let g = self.gravity.norm();
        self.gravity = Vector3::new(-g * a.sin(), 0.0, -g * a.cos());
        self
    }
}

/// Twist of the analytic prism used to seed the rest-shape form-finding.
const CANONICAL_TWIST: f64 = 150.0 * std::f64::consts::PI / 180.0;

/// Symmetric 3-bar prism: odd triangle at y = -h/2, even at y = +h/2,
/// equilateral triangles of the rest tendon length, bar length from the
/// topology. The final reflection selects the chirality basin in which the
/// robot's forward roll travels along its heading, matching
/// [`crate::shape::CHIRALITY_SIGN`].
fn prism_init(twist: f64) -> RobotShape {
    let side = REST_ACTUATED_LENGTH;
    let r = side / 3f64.sqrt();
    let bar = crate::topology::DEFAULT_BAR_LENGTH;
    let h = (bar * bar - 2.0 * r * r * (1.0 - twist.cos())).sqrt();
    let mut nodes = [Vector3::zeros(); 6];
    for j in 0..3 {
        let odd_angle = j as f64 * 120f64.to_radians();
        let even_angle = odd_angle + twist;
        nodes[2 * j + 1] = Vector3::new(r * odd_angle.cos(), -h / 2.0, -r * odd_angle.sin());
        nodes[2 * j] = Vector3::new(r * even_angle.cos(), h / 2.0, -r * even_angle.sin());
    }
    RobotShape::new(nodes)
}

/// Express a shape in the body-frame convention: origin at the centroid,
/// y from the odd-triangle centroid toward the even-triangle centroid,
/// x along node 0 -> node 2 (orthogonalized), z right-handed.
fn to_body_frame(shape: &RobotShape) -> RobotShape {
    let centered = shape.centered();
    let y = (centered.even_centroid() - centered.odd_centroid()).normalize();
    let x_raw = centered.node(2) - centered.node(0);
    let x = (x_raw - y * x_raw.dot(&y)).normalize();
    let z = x.cross(&y);
    let rot = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    centered.rotated(&rot)
}

static REST_SHAPE: OnceLock<RobotShape> = OnceLock::new();

/// The canonical rest shape: the form-found equilibrium with all six
/// actuated tendons at the rest length, expressed in the body frame.
pub fn canonical_rest_shape() -> RobotShape {
    *REST_SHAPE.get_or_init(|| {
        let config = SimConfig::default();
        let init = prism_init(CANONICAL_TWIST);
        let found = form_find(&[REST_ACTUATED_LENGTH; 6], &config, &init)
            .expect("rest-shape form-finding must converge");
        to_body_frame(&found)
    })
}

/// Full simulator state at one instant.
#[derive(Debug, Clone)]
pub struct SimState {
    /// World-frame node positions, resting on the ground plane z = 0.
    pub shape: RobotShape,
    pub face: FaceId,
    pub time: f64,
    /// Commanded winch cable lengths (may exceed the realized edge length
    /// when a cable goes slack).
    pub cables: [f64; 6],
    /// Last equilibrium body shape, used to warm-start the next solve.
    intrinsic: RobotShape,
    contacts: Vec<usize>,
}

impl SimState {
    pub fn com(&self) -> Vector3<f64> {
        self.shape.centroid()
    }

    pub fn axes(&self) -> BodyAxes {
        principal_axis_2d(&self.shape).expect("grounded robot has a principal axis")
    }

    /// World pose: theta is the principal-axis angle against world +x,
    /// translation is the CoM ground projection.
    pub fn pose(&self) -> Pose2D {
        let axes = self.axes();
        let com = self.com();
        Pose2D::new(
            axes.principal_axis.y.atan2(axes.principal_axis.x),
            Vector2::new(com.x, com.y),
        )
    }

    pub fn contacts(&self) -> &[usize] {
        &self.contacts
    }

    pub fn realized_actuated_lengths(&self, topo: &RobotTopology) -> [f64; 6] {
        self.intrinsic.actuated_lengths(topo)
    }
}

fn detect_face(shape: &RobotShape, config: &SimConfig, prev: FaceId) -> FaceId {
    let contacts = contact_nodes(shape, config);
    if let Some(face) = FaceId::from_bottom_nodes(&contacts) {
        return face;
    }
    let four = shape.four_lowest();
    for f in FaceId::ALL {
        if f.bottom_nodes() == four {
            return f;
        }
    }
    prev
}

/// The rest state placed on the ground: face F0 down, heading along +x,
/// CoM above the origin.
pub fn initial_state(config: &SimConfig) -> SimState {
    let body = canonical_rest_shape();
    // Outward normal of the resting face's contact triangle {0, 2, 5}.
    let (p0, p2, p5) = (body.node(0), body.node(2), body.node(5));
    let mut normal = (p2 - p0).cross(&(p5 - p0));
    if normal.dot(&p0) < 0.0 {
        normal = -normal;
    }
    let down = nalgebra::Rotation3::rotation_between(&normal, &-Vector3::z())
        .expect("contact normal is never antiparallel to -z");
    let shape = body.rotated(down.matrix());
    // Spin about z so the principal axis points along -y (heading +x).
    let axes = principal_axis_2d(&shape).expect("rest shape has a principal axis");
    let current = axes.principal_axis.y.atan2(axes.principal_axis.x);
    let spin = nalgebra::Rotation3::from_axis_angle(
        &Vector3::z_axis(),
        -std::f64::consts::FRAC_PI_2 - current,
    );
    let mut shape = shape.rotated(spin.matrix());
    let com = shape.centroid();
    shape = shape.translated(Vector3::new(-com.x, -com.y, -shape.lowest_z()));
    contact::settle_shape(&mut shape, config).expect("rest placement settles");
    let contacts = contact_nodes(&shape, config);
    let face = detect_face(&shape, config, FaceId::F0);
    SimState {
        shape,
        face,
        time: 0.0,
        cables: body.actuated_lengths(&config.topology),
        intrinsic: body,
        contacts,
    }
}

/// One recorded simulator tick.
#[derive(Debug, Clone)]
pub struct TraceSample {
    pub t: f64,
    pub shape: RobotShape,
    pub face: FaceId,
}

impl TraceSample {
    pub fn com(&self) -> Vector3<f64> {
        self.shape.centroid()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FaceChange {
    pub t: f64,
    pub from: FaceId,
    pub to: FaceId,
}

/// Output of a gait rollout.
#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub samples: Vec<TraceSample>,
    pub face_changes: Vec<FaceChange>,
    /// Diagnostics, e.g. symbolic face tracking disagreeing with contact.
    pub warnings: Vec<String>,
    pub start_time: f64,
    pub initial_com: Vector3<f64>,
    pub initial_axes: BodyAxes,
    pub final_state: SimState,
    /// Completed (step index within gait, tick count) pairs.
    pub steps: Vec<(usize, usize)>,
}

impl RolloutTrace {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(self.start_time, |s| s.t) - self.start_time
    }

    pub fn net_displacement(&self) -> Vector2<f64> {
        let end = self.final_state.com();
        Vector2::new(end.x - self.initial_com.x, end.y - self.initial_com.y)
    }

    /// Mean speed in bar lengths per minute over the rollout.
    pub fn mean_speed_bl_per_min(&self, bar_length: f64) -> f64 {
        let d = self.duration();
        if d <= 0.0 {
            return 0.0;
        }
        self.net_displacement().norm() / bar_length / d * 60.0
    }
}

struct Engine<'a> {
    config: &'a SimConfig,
    state: SimState,
    samples: Vec<TraceSample>,
    face_changes: Vec<FaceChange>,
    warnings: Vec<String>,
    steps: Vec<(usize, usize)>,
}

impl<'a> Engine<'a> {
    fn new(state: SimState, config: &'a SimConfig) -> Self {
        Self {
            config,
            state,
            samples: Vec::new(),
            face_changes: Vec::new(),
            warnings: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn tick(&mut self, executor: &mut StepExecutor, params: &GaitParams) -> Result<(), SimError> {
        let lengths = self.state.intrinsic.actuated_lengths(&self.config.topology);
        let commands = executor.tick(&lengths, params);
        for (cable, cmd) in self.state.cables.iter_mut().zip(&commands) {
            let rate = -MOTOR_FULL_SPEED * cmd / 99.0;
            *cable = (*cable + rate * TICK_DT).clamp(PLANT_MIN_LENGTH, PLANT_MAX_LENGTH);
        }
        let solution = formfind::solve_taut(&self.state.cables, self.config, &self.state.intrinsic)?;
        let intrinsic = solution.chain.shape();
        let mut world = contact::place_on_ground(
            &intrinsic,
            &self.state.shape,
            &self.state.contacts,
            self.config.gravity,
        );
        contact::settle_shape(&mut world, self.config)?;
        self.state.intrinsic = intrinsic;
        self.state.shape = world;
        self.state.contacts = contact_nodes(&self.state.shape, self.config);
        let face = detect_face(&self.state.shape, self.config, self.state.face);
        if face != self.state.face {
            self.face_changes.push(FaceChange {
                t: self.state.time,
                from: self.state.face,
                to: face,
            });
            self.state.face = face;
        }
        self.state.time += TICK_DT;
        self.samples.push(TraceSample {
            t: self.state.time,
            shape: self.state.shape,
            face: self.state.face,
        });
        Ok(())
    }

    fn run_step(
        &mut self,
        step_index: usize,
        targets: crate::gait::GaitStep,
        params: &GaitParams,
    ) -> Result<(), SimError> {
        let mut executor = StepExecutor::new(&targets);
        while !executor.all_latched() {
            if executor.ticks >= self.config.step_budget {
                let unlatched = (0..6).filter(|&i| !executor.latched()[i]).collect();
                return Err(SimError::Gait(GaitError::StepTimeout {
                    ticks: executor.ticks,
                    unlatched,
                }));
            }
            self.tick(&mut executor, params)?;
        }
        self.steps.push((step_index, executor.ticks));
        Ok(())
    }

    fn run_gait(&mut self, gait: &Gait, cycles: usize, reversed: bool) -> Result<(), SimError> {
        let mut params = gait.params;
        params.normalization = self.config.normalization;
        params.validate().map_err(SimError::Gait)?;
        let advance = if reversed {
            -gait.cycle_face_advance
        } else {
            gait.cycle_face_advance
        };
        let mut symbolic = self.state.face;
        for _ in 0..cycles {
            for (si, step) in gait.steps.iter().enumerate() {
                let face = self.state.face;
                let targets = if reversed {
                    reverse_step(step, face)
                } else {
                    translate_step(step, face)
                };
                self.run_step(si, targets, &params)?;
            }
            symbolic = symbolic.advanced(advance as i32);
            if symbolic != self.state.face {
                self.warnings.push(format!(
                    "face tracking mismatch at t={:.2}s: symbolic {:?}, contact says {:?}",
                    self.state.time, symbolic, self.state.face
                ));
                symbolic = self.state.face;
            }
        }
        Ok(())
    }

    fn finish(self, start_time: f64, initial_com: Vector3<f64>, initial_axes: BodyAxes) -> RolloutTrace {
        RolloutTrace {
            samples: self.samples,
            face_changes: self.face_changes,
            warnings: self.warnings,
            start_time,
            initial_com,
            initial_axes,
            final_state: self.state,
            steps: self.steps,
        }
    }
}

/// Roll out `cycles` cycles of a gait from the canonical rest state.
pub fn rollout(gait: &Gait, cycles: usize, config: &SimConfig) -> Result<RolloutTrace, SimError> {
    rollout_from(initial_state(config), gait, cycles, false, config)
}

/// Roll out a gait from an arbitrary state, optionally in reversed mode
/// (each step mapped by the per-face reverse permutation).
pub fn rollout_from(
    state: SimState,
    gait: &Gait,
    cycles: usize,
    reversed: bool,
    config: &SimConfig,
) -> Result<RolloutTrace, SimError> {
    let start_time = state.time;
    let initial_com = state.com();
    let initial_axes = state.axes();
    let mut engine = Engine::new(state, config);
    engine.run_gait(gait, cycles, reversed)?;
    Ok(engine.finish(start_time, initial_com, initial_axes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::gait_by_name;
    use crate::topology::DEFAULT_BAR_LENGTH;
    use approx::assert_relative_eq;

    #[test]
    fn canonical_rest_shape_is_valid() {
        let topo = RobotTopology::default();
        let shape = canonical_rest_shape();
        assert!(shape.max_bar_length_error(&topo) < 1e-9);
        for &e in &topo.actuated_edges() {
            assert_relative_eq!(shape.edge_length(e), REST_ACTUATED_LENGTH, epsilon = 1e-6);
        }
        assert!(shape.centroid().norm() < 1e-9);
        // Body-frame convention: principal axis along +y.
        let y = shape.even_centroid() - shape.odd_centroid();
        assert!(y.y > 0.0);
        assert!(y.x.abs() < 1e-9 && y.z.abs() < 1e-9);
        assert_eq!(
            shape.chirality().signum(),
            crate::shape::CHIRALITY_SIGN,
            "canonical rest shape must match the handedness constant"
        );
    }

    #[test]
    fn initial_state_rests_on_f0() {
        let config = SimConfig::default();
        let state = initial_state(&config);
        assert_eq!(state.face, FaceId::F0);
        assert_eq!(state.shape.four_lowest(), [0, 2, 3, 5]);
        // Heading +x by construction.
        let axes = state.axes();
        assert_relative_eq!(axes.heading, Vector2::new(1.0, 0.0), epsilon = 1e-9);
        assert!(state.shape.lowest_z() >= -1e-9);
        assert!(state.contacts().len() >= 3);
    }

    #[test]
    fn quasistatic_cycle_rolls_forward_one_face() {
        let config = SimConfig::default();
        let gait = gait_by_name("quasistatic").unwrap();
        let trace = rollout(&gait, 1, &config).unwrap();
        assert_eq!(trace.final_state.face, FaceId::F1);
        assert_eq!(trace.face_changes.len(), 1);
        let heading = trace.initial_axes.heading;
        let moved = trace.net_displacement().dot(&heading);
        assert!(
            moved > 0.1 * DEFAULT_BAR_LENGTH,
            "expected forward motion along heading, got {moved:.4} m"
        );
        assert!(trace.warnings.is_empty(), "warnings: {:?}", trace.warnings);
    }

    #[test]
    fn three_cycles_return_to_f0_with_three_face_changes() {
        let config = SimConfig::default();
        let gait = gait_by_name("quasistatic").unwrap();
        let trace = rollout(&gait, 3, &config).unwrap();
        assert_eq!(trace.face_changes.len(), 3);
        assert_eq!(trace.final_state.face, FaceId::F0);
        let faces: Vec<FaceId> = trace.face_changes.iter().map(|c| c.to).collect();
        assert_eq!(faces, vec![FaceId::F1, FaceId::F2, FaceId::F0]);
    }

    #[test]
    fn reversed_quasistatic_moves_antiparallel() {
        let config = SimConfig::default();
        let gait = gait_by_name("quasistatic").unwrap();
        let fwd = rollout(&gait, 2, &config).unwrap();
        let rev = rollout_from(initial_state(&config), &gait, 2, true, &config).unwrap();
        let d = fwd.net_displacement().dot(&rev.net_displacement());
        assert!(d < 0.0, "forward and reversed displacements should oppose, dot = {d}");
        // Reversed rolling regresses through the face cycle.
        assert_eq!(rev.face_changes[0].to, FaceId::F2);
    }

    #[test]
    fn bar_lengths_conserved_and_no_penetration_throughout() {
        let config = SimConfig::default();
        let topo = RobotTopology::default();
        let gait = gait_by_name("quasistatic").unwrap();
        let trace = rollout(&gait, 1, &config).unwrap();
        assert!(!trace.samples.is_empty());
        for s in &trace.samples {
            assert!(s.shape.max_bar_length_error(&topo) < 1e-6 * DEFAULT_BAR_LENGTH);
            assert!(s.shape.lowest_z() >= -config.contact_tol);
        }
    }

    #[test]
    fn empty_targets_produce_zero_displacement() {
        let config = SimConfig::default();
        let state = initial_state(&config);
        // A gait whose targets equal the current normalized positions.
        let params = crate::gait::action_params(0.1, 0.1)
            .with_normalization(config.normalization);
        let lengths = state.realized_actuated_lengths(&config.topology);
        let mut targets = [0.0; 6];
        for i in 0..6 {
            targets[i] = params.position(i, lengths[i]).clamp(0.0, 1.0);
        }
        let gait = Gait::new("hold", vec![targets], params, 0);
        let trace = rollout_from(state, &gait, 1, false, &config).unwrap();
        // Zero commanded motion: only solver-level jitter remains.
        assert!(trace.net_displacement().norm() < 1e-4);
    }
}
