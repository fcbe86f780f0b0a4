//! End-to-end estimation properties: replay of a simulated rolling trial
//! and noise-response monotonicity.

use tribar_core::estimation::{estimate_state, rmse_nodes, replay};
use tribar_core::gait::gait_by_name;
use tribar_core::sensing::{log_rollout, measure, seeded_rng, NoiseSpec};
use tribar_core::sim::{canonical_rest_shape, form_find, rollout, SimConfig};
use tribar_core::topology::RobotTopology;

/// Noiseless frames from a simulated rolling trial reconstruct every pose
/// to a small fraction of the bar length.
#[test]
fn noiseless_trial_replay_is_tight() {
    let config = SimConfig::default();
    let topo = RobotTopology::default();
    let gait = gait_by_name("quasistatic").unwrap();
    let trace = rollout(&gait, 2, &config).unwrap();
    let mut rng = seeded_rng(41);
    let (frames, truth) = log_rollout(&trace, &topo, &NoiseSpec::NONE, 10, &mut rng);
    assert!(frames.len() > 15);
    let estimates = replay(&frames, &topo).unwrap();
    let mut worst: f64 = 0.0;
    for (est, (_, truth_shape)) in estimates.iter().zip(&truth) {
        worst = worst.max(rmse_nodes(est, truth_shape, &topo));
    }
    assert!(
        worst < 0.005,
        "worst per-frame RMSE {:.4} of bar length (limit 0.5%)",
        worst
    );
}

/// Reconstruction error grows monotonically with injected length noise.
#[test]
fn rmse_grows_with_noise() {
    let config = SimConfig::default();
    let topo = RobotTopology::default();
    let rest = canonical_rest_shape();
    let mut rng = seeded_rng(42);
    let sigmas = [0.005, 0.01, 0.02, 0.04];
    let mut means = Vec::new();
    for sigma in sigmas {
        let noise = NoiseSpec::new(sigma, 0.0);
        let mut total = 0.0;
        let n = 30;
        for _ in 0..n {
            let shape = loop {
                let mut targets = [0.0; 6];
                for t in targets.iter_mut() {
                    *t = rng.random_range(0.16..0.22);
                }
                if let Ok(s) = form_find(&targets, &config, &rest) {
                    break s;
                }
            };
            let frame = measure(&shape, &nalgebra::Matrix3::identity(), &topo, &noise, 0.0, &mut rng);
            let est = estimate_state(&frame, &topo, None).unwrap();
            total += rmse_nodes(&est, &shape, &topo);
        }
        means.push(total / n as f64);
    }
    for w in means.windows(2) {
        assert!(
            w[1] > w[0],
            "mean RMSE should grow with noise: {means:?}"
        );
    }
}

use rand::Rng;
