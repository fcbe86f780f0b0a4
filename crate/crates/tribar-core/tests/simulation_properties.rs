//! Simulator-level properties that span modules: the tendon labeling
//! against simulated rolls, action-table determinism, and incline runs.

use tribar_core::gait::gait_by_name;
use tribar_core::sim::{
    build_action_table, initial_state, rollout, rollout_from, tabulate_action, ActionKind,
    ActionSpec, SimConfig,
};
use tribar_core::symmetry::FaceId;
use tribar_core::topology::{RobotTopology, Tendon};

/// The labeling convention ties tendons A..F to the face cycle: the two
/// tendons spanning the four lowest nodes are {A, D} at rest, {C, F} after
/// one forward roll, and {B, E} after two.
#[test]
fn bottom_tendon_pairs_track_simulated_rolls() {
    let config = SimConfig::default();
    let gait = gait_by_name("quasistatic").unwrap();
    let expected: [(FaceId, [Tendon; 2]); 3] = [
        (FaceId::F1, [Tendon::C, Tendon::F]),
        (FaceId::F2, [Tendon::B, Tendon::E]),
        (FaceId::F0, [Tendon::A, Tendon::D]),
    ];

    let bottom_pair = |shape: &tribar_core::RobotShape| -> Vec<Tendon> {
        let four = shape.four_lowest();
        Tendon::ALL
            .into_iter()
            .filter(|t| {
                let (p, q) = t.endpoints();
                four.contains(&p) && four.contains(&q)
            })
            .collect()
    };

    let state = initial_state(&config);
    assert_eq!(bottom_pair(&state.shape), vec![Tendon::A, Tendon::D]);

    let mut state = state;
    for (face, pair) in expected {
        let trace = rollout_from(state, &gait, 1, false, &config).unwrap();
        state = trace.final_state;
        assert_eq!(state.face, face);
        assert_eq!(bottom_pair(&state.shape), pair.to_vec(), "on {face:?}");
    }
}

#[test]
fn action_table_is_bit_deterministic() {
    let config = SimConfig::default();
    let spec = ActionSpec {
        kind: ActionKind::Rolling,
        left_range: 0.110,
        right_range: 0.130,
    };
    let a = tabulate_action(&spec, &config).unwrap();
    let b = tabulate_action(&spec, &config).unwrap();
    assert_eq!(a.dtheta.to_bits(), b.dtheta.to_bits());
    assert_eq!(a.tx.to_bits(), b.tx.to_bits());
    assert_eq!(a.ty.to_bits(), b.ty.to_bits());
}

#[test]
fn table_covers_all_51_actions() {
    let config = SimConfig::default();
    let table = build_action_table(&config).unwrap();
    assert_eq!(table.len(), 51);
    for (i, entry) in table.iter().enumerate() {
        assert_eq!(entry.id, i);
        assert!(entry.transform.translation().norm() < 0.5);
    }
    // Forward motion dominates all symmetric rolling actions.
    for entry in table
        .iter()
        .filter(|e| e.spec.kind == ActionKind::Rolling && e.spec.left_range == e.spec.right_range)
    {
        assert!(entry.transform.ty > 0.05, "action {} ty {}", entry.id, entry.transform.ty);
    }
}

/// Climbing a tabulated incline still rolls forward, just less far; the
/// gravity vector is tilted rather than the ground plane.
#[test]
fn incline_rollout_climbs() {
    let topo = RobotTopology::default();
    let config = SimConfig::default().with_incline(10.0);
    let mut gait = gait_by_name("quasistatic").unwrap();
    gait.params = tribar_core::presets::incline(10).unwrap();
    let trace = rollout(&gait, 2, &config).unwrap();
    assert_eq!(trace.face_changes.len(), 2);
    let along = trace.net_displacement().dot(&trace.initial_axes.heading);
    assert!(
        along > 0.3 * topo.bar_length,
        "climbed {along:.3} m along heading"
    );
    for s in &trace.samples {
        assert!(s.shape.lowest_z() >= -config.contact_tol);
    }
}

/// Turning gaits rotate opposite ways and keep rotating over three cycles.
#[test]
fn turn_gaits_accumulate_opposite_rotations() {
    let config = SimConfig::default();
    let mut total = [0.0f64; 2];
    for (k, kind) in [ActionKind::CcwTurn, ActionKind::CwTurn].into_iter().enumerate() {
        let spec = ActionSpec {
            kind,
            left_range: 0.1,
            right_range: 0.1,
        };
        let mut state = initial_state(&config);
        for _ in 0..3 {
            let before = state.pose().theta;
            let (next, _) = tribar_core::sim::execute_action(state, &spec, false, &config).unwrap();
            state = next;
            total[k] += tribar_core::pose::wrap_angle(state.pose().theta - before);
        }
    }
    assert!(total[0] > 0.05, "ccw turn accumulated {:.3} rad", total[0]);
    assert!(total[1] < -0.05, "cw turn accumulated {:.3} rad", total[1]);
}
