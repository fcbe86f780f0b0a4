//! Two-stage state estimation: shape from the nine tendon lengths under
//! hard bar-length constraints, then global orientation from the two
//! instrumented bar directions.

use crate::sensing::{SensorFrame, INSTRUMENTED_BARS};
use crate::shape::{RobotShape, CHIRALITY_SIGN};
use crate::solver::{minimize, wahba_rotation, BarChain, LmOptions, Residual};
use crate::symmetry::FaceId;
use crate::topology::{RobotTopology, TENDON_COUNT};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use thiserror::Error;

/// Height band for the downward-face test, as a fraction of bar length.
pub const FACE_BAND_FRACTION: f64 = 0.05;

/// Residual RMS (relative to bar length) above which a converged fit is
/// treated as a sensor fault rather than a shape.
const INFEASIBLE_RMS_FRACTION: f64 = 0.05;

/// Extra perturbed starts tried when the warm start stalls.
const EXTRA_STARTS: usize = 8;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("shape optimization hit the iteration cap (gradient {gradient:.2e})")]
    NonConvergence { gradient: f64 },
    #[error("measured lengths are not realizable (residual RMS {rms_fraction:.3} of bar length)")]
    InfeasibleLengths { rms_fraction: f64 },
    #[error("bar directions are parallel; rotation about them is unobservable")]
    DegenerateObservation,
    #[error("tendon lengths must be positive")]
    NonPositiveLength,
}

/// Shape plus orientation relative to the global frame.
#[derive(Debug, Clone)]
pub struct StateEstimate {
    /// Body-frame shape, centroid at the origin.
    pub shape: RobotShape,
    /// Rotation taking body-frame coordinates to the global frame.
    pub rotation: Matrix3<f64>,
    /// (shape objective, orientation objective) at the solution.
    pub residuals: (f64, f64),
}

impl StateEstimate {
    /// Node positions in the global frame (translation is unobservable and
    /// left at the centroid).
    pub fn world_shape(&self) -> RobotShape {
        self.shape.rotated(&self.rotation)
    }

    /// ZYX Euler angles (yaw, pitch, roll) of the estimated orientation.
    pub fn euler_zyx(&self) -> (f64, f64, f64) {
        let r = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        let (roll, pitch, yaw) = r.euler_angles();
        (yaw, pitch, roll)
    }
}

fn tendon_residuals(frame: &SensorFrame, topo: &RobotTopology) -> Vec<Residual> {
    // The objective halves a double-counted sum over the triangle
    // edges, so every one of the nine tendon residuals carries unit weight.
    topo.tendon_edges()
        .iter()
        .zip(frame.tendon_lengths.iter())
        .map(|(&(p, q), &d)| Residual::EdgeLength {
            p,
            q,
            target: d,
            weight: 1.0,
        })
        .collect()
}

struct ShapeCandidate {
    shape: RobotShape,
    objective: f64,
    gradient_norm: f64,
    converged: bool,
}

/// Minimize the tendon objective from several starts and collect the
/// distinct minima found. The distance geometry occasionally has fold
/// pairs: two exact solutions separated by a fraction of a millimeter that
/// the nine lengths cannot distinguish. Local restarts around the first
/// solution surface the sibling branch so the orientation stage can pick.
fn shape_candidates(
    frame: &SensorFrame,
    topo: &RobotTopology,
    init: &RobotShape,
) -> Result<Vec<ShapeCandidate>, EstimationError> {
    if frame.tendon_lengths.iter().any(|&l| l <= 0.0) {
        return Err(EstimationError::NonPositiveLength);
    }
    let residuals = tendon_residuals(frame, topo);
    // The convergence contract is gradient norm below 1e-10 within 200
    // iterations; the solver pushes toward machine precision so noiseless
    // round trips recover orientation to microradians.
    let opts = LmOptions {
        max_iterations: 200,
        gradient_tol: 1e-13,
    };
    let run = |shape: &RobotShape| {
        let mut chain = BarChain::from_shape(shape, topo.bar_length);
        let report = minimize(&mut chain, &residuals, &opts);
        let mut solved = chain.shape().centered();
        if solved.chirality() * CHIRALITY_SIGN < 0.0 {
            solved = solved.mirrored();
        }
        ShapeCandidate {
            shape: solved,
            objective: report.objective,
            gradient_norm: report.gradient_norm,
            converged: report.converged || report.gradient_norm <= 1e-10,
        }
    };
    let distinct = |cands: &[ShapeCandidate], shape: &RobotShape| {
        cands.iter().all(|c| {
            (0..6).any(|i| (c.shape.node(i) - shape.node(i)).norm() > 1e-7)
        })
    };

    let mut rng = crate::sensing::seeded_rng(0x7314);
    let first = run(init);
    let mut candidates = vec![first];

    // Global restarts if the warm start stalled far from a fit.
    let noise_floor = 9.0 * (0.05 * topo.bar_length).powi(2);
    if !candidates[0].converged || candidates[0].objective >= noise_floor {
        for _ in 0..EXTRA_STARTS {
            let mut perturbed = *init;
            for i in 0..6 {
                *perturbed.node_mut(i) += Vector3::new(
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                );
            }
            let cand = run(&perturbed);
            if distinct(&candidates, &cand.shape) {
                candidates.push(cand);
            }
            if candidates.iter().any(|c| c.converged && c.objective < noise_floor) {
                break;
            }
        }
    }

    // Local restarts around the best solution to surface fold siblings.
    let best_idx = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .map(|(i, _)| i)
        .unwrap();
    let anchor = candidates[best_idx].shape;
    for _ in 0..6 {
        let mut perturbed = anchor;
        for i in 0..6 {
            *perturbed.node_mut(i) += Vector3::new(
                rng.random_range(-2.5e-3..2.5e-3),
                rng.random_range(-2.5e-3..2.5e-3),
                rng.random_range(-2.5e-3..2.5e-3),
            );
        }
        let cand = run(&perturbed);
        if distinct(&candidates, &cand.shape) {
            candidates.push(cand);
        }
    }
    Ok(candidates)
}

/// Reconstruct the body-frame shape from one sensor frame by minimizing the
/// squared tendon-length error subject to exact bar lengths (bars are
/// parameterized as midpoint plus unit direction, so the constraint holds
/// by construction). The output is centered at the origin with the robot's
/// fixed chirality.
pub fn estimate_shape(
    frame: &SensorFrame,
    topo: &RobotTopology,
    init: &RobotShape,
) -> Result<RobotShape, EstimationError> {
    let candidates = shape_candidates(frame, topo, init)?;
    let best = candidates
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .unwrap();
    let rms_fraction = (2.0 * best.objective / TENDON_COUNT as f64).sqrt() / topo.bar_length;
    if rms_fraction > INFEASIBLE_RMS_FRACTION {
        return Err(EstimationError::InfeasibleLengths { rms_fraction });
    }
    if !best.converged {
        return Err(EstimationError::NonConvergence {
            gradient: best.gradient_norm,
        });
    }
    Ok(best.shape)
}

/// Closed-form orientation fit: the proper rotation minimizing the squared
/// error between the rotated body-frame bar directions and the measured
/// global directions.
pub fn estimate_orientation(
    shape: &RobotShape,
    bar_dirs: &[Vector3<f64>; 2],
) -> Result<Matrix3<f64>, EstimationError> {
    let u0 = shape.bar_direction(INSTRUMENTED_BARS[0]);
    let u1 = shape.bar_direction(INSTRUMENTED_BARS[1]);
    if u0.cross(&u1).norm() < 1e-6 {
        return Err(EstimationError::DegenerateObservation);
    }
    let pairs = [(u0, bar_dirs[0].normalize()), (u1, bar_dirs[1].normalize())];
    Ok(wahba_rotation(&pairs))
}

pub fn orientation_objective(shape: &RobotShape, rotation: &Matrix3<f64>, bar_dirs: &[Vector3<f64>; 2]) -> f64 {
    INSTRUMENTED_BARS
        .iter()
        .zip(bar_dirs.iter())
        .map(|(&l, a)| (rotation * shape.bar_direction(l) - a).norm_squared())
        .sum()
}

fn shape_objective(shape: &RobotShape, frame: &SensorFrame, topo: &RobotTopology) -> f64 {
    topo.tendon_edges()
        .iter()
        .zip(frame.tendon_lengths.iter())
        .map(|(&e, &d)| (shape.edge_length(e) - d).powi(2))
        .sum()
}

/// Full two-step estimate: shape (warm-started from the previous estimate,
/// or the rest shape) then orientation, with the rotation applied to the
/// returned world coordinates.
///
/// Shape solutions with indistinguishable tendon objectives (fold pairs of
/// the distance geometry) are disambiguated by the orientation residual:
/// only the true branch lets the fitted rotation reproduce both measured
/// bar directions.
pub fn estimate_state(
    frame: &SensorFrame,
    topo: &RobotTopology,
    prev: Option<&StateEstimate>,
) -> Result<StateEstimate, EstimationError> {
    let rest = crate::sim::canonical_rest_shape();
    let init = prev.map_or(rest, |p| p.shape);
    let candidates = shape_candidates(frame, topo, &init)?;
    let best_obj = candidates
        .iter()
        .filter(|c| c.converged)
        .map(|c| c.objective)
        .fold(f64::INFINITY, f64::min);
    if !best_obj.is_finite() {
        let best = candidates
            .into_iter()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
            .unwrap();
        return Err(EstimationError::NonConvergence {
            gradient: best.gradient_norm,
        });
    }
    let rms_fraction = (2.0 * best_obj / TENDON_COUNT as f64).sqrt() / topo.bar_length;
    if rms_fraction > INFEASIBLE_RMS_FRACTION {
        return Err(EstimationError::InfeasibleLengths { rms_fraction });
    }
    let tie_band = best_obj * 1.05 + 1e-12;
    let mut best: Option<(StateEstimate, f64)> = None;
    for cand in candidates {
        if !cand.converged || cand.objective > tie_band {
            continue;
        }
        let rotation = estimate_orientation(&cand.shape, &frame.bar_dirs)?;
        let orient = orientation_objective(&cand.shape, &rotation, &frame.bar_dirs);
        if best.as_ref().is_none_or(|(_, o)| orient < *o) {
            best = Some((
                StateEstimate {
                    shape: cand.shape,
                    rotation,
                    residuals: (cand.objective * 2.0, orient),
                },
                orient,
            ));
        }
    }
    let (mut est, _) = best.unwrap();
    est.residuals.0 = shape_objective(&est.shape, frame, topo);
    Ok(est)
}

/// Replay a sequence of sensor frames, warm-starting each estimate from
/// the previous one.
pub fn replay(
    frames: &[SensorFrame],
    topo: &RobotTopology,
) -> Result<Vec<StateEstimate>, EstimationError> {
    let mut estimates: Vec<StateEstimate> = Vec::with_capacity(frames.len());
    for frame in frames {
        let prev = estimates.last();
        let est = estimate_state(frame, topo, prev)?;
        estimates.push(est);
    }
    Ok(estimates)
}

/// Node RMSE between an estimate and ground truth, as a fraction of bar
/// length. Translation is unobservable, so both point sets are compared
/// about their centroids.
pub fn rmse_nodes(estimate: &StateEstimate, truth: &RobotShape, topo: &RobotTopology) -> f64 {
    let est = estimate.world_shape().centered();
    let tru = truth.centered();
    let sum_sq: f64 = (0..6)
        .map(|i| (est.node(i) - tru.node(i)).norm_squared())
        .sum();
    (sum_sq / 6.0).sqrt() / topo.bar_length
}

/// Nodes defining the downward face of an estimate (gravity along -z).
///
/// Nodes within a 5%-of-bar-length band of the lowest node identify the
/// face; when they match one of the three rolling faces, the face's full
/// bottom-four set is returned, otherwise the banded nodes themselves.
pub fn downward_face(estimate: &StateEstimate, topo: &RobotTopology) -> Vec<usize> {
    let world = estimate.world_shape();
    let banded = world.bottom_nodes(FACE_BAND_FRACTION * topo.bar_length);
    match FaceId::from_bottom_nodes(&banded) {
        Some(face) => face.bottom_nodes().to_vec(),
        None => banded,
    }
}
