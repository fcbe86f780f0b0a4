//! Synthetic capacitive tendon sensing: linear calibration fits and
//! simulated sensor frames with configurable noise.

use crate::shape::RobotShape;
use crate::topology::{RobotTopology, TENDON_COUNT};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deterministic RNG used throughout the crate for seeded noise.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed)
}

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("calibration fit is degenerate: all capacitance samples are equal")]
    DegenerateFit,
    #[error("calibration needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Linear capacitance-to-length map for one sensor tendon.
///
/// Units at the calibration boundary are pF and mm; [`Self::length_m`]
/// converts to meters for the rest of the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    /// Slope of the fitted line, mm per pF.
    pub slope: f64,
    /// Intercept of the fitted line, mm.
    pub intercept: f64,
    /// RMS residual of the fit, mm.
    pub residual_rms: f64,
}

impl SensorCalibration {
    /// Tendon length in mm for a capacitance reading in pF.
    pub fn length_mm(&self, capacitance_pf: f64) -> f64 {
        self.slope * capacitance_pf + self.intercept
    }

    pub fn length_m(&self, capacitance_pf: f64) -> f64 {
        self.length_mm(capacitance_pf) * 1e-3
    }

    /// Inverse map: capacitance that would read as the given length.
    pub fn capacitance_pf(&self, length_mm: f64) -> f64 {
        (length_mm - self.intercept) / self.slope
    }
}

/// Least-squares line through (capacitance pF, known length mm) samples.
/// The procedure mirrors sensor bring-up: each tendon is stretched to a
/// handful of known lengths (five in practice) and a line is fitted.
pub fn fit_calibration(samples: &[(f64, f64)]) -> Result<SensorCalibration, SensingError> {
    if samples.len() < 2 {
        return Err(SensingError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean_c = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_l = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mean_c).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(SensingError::DegenerateFit);
    }
    let sxy: f64 = samples.iter().map(|s| (s.0 - mean_c) * (s.1 - mean_l)).sum();
    let slope = sxy / sxx;
    let intercept = mean_l - slope * mean_c;
    let sq_sum: f64 = samples
        .iter()
        .map(|&(c, l)| (slope * c + intercept - l).powi(2))
        .sum();
    Ok(SensorCalibration {
        slope,
        intercept,
        residual_rms: (sq_sum / n).sqrt(),
    })
}

/// Measurement noise model: independent zero-mean Gaussian per channel.
/// Length noise is a fraction of the current length; bar-direction noise is
/// a small-angle perturbation about a random perpendicular axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of tendon-length noise as a fraction of length.
    pub length_rel_sigma: f64,
    /// Standard deviation of bar-direction angular noise, rad.
    pub bar_angle_sigma: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        length_rel_sigma: 0.0,
        bar_angle_sigma: 0.0,
    };

    pub fn new(length_rel_sigma: f64, bar_angle_sigma: f64) -> Self {
        Self {
            length_rel_sigma,
            bar_angle_sigma,
        }
    }

    pub fn is_none(&self) -> bool {
        self.length_rel_sigma == 0.0 && self.bar_angle_sigma == 0.0
    }
}

/// Which bars carry the orientation sensors. Only two of the three IMUs are
/// used; we fix bars 0 and 1.
pub const INSTRUMENTED_BARS: [usize; 2] = [0, 1];

/// One snapshot of all on-board sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Nine tendon lengths (m) in fixed order: A..F, then passive
    /// (0,3), (1,4), (2,5).
    pub tendon_lengths: [f64; TENDON_COUNT],
    /// Global-frame unit direction of each instrumented bar.
    pub bar_dirs: [Vector3<f64>; 2],
    /// Seconds since the start of the trial.
    pub timestamp: f64,
}

/// Simulate the sensor suite for a body-frame shape carried at a global
/// orientation. Tendon lengths see multiplicative Gaussian noise; bar
/// directions see a small random tilt.
pub fn measure(
    shape: &RobotShape,
    rotation: &Matrix3<f64>,
    topo: &RobotTopology,
    noise: &NoiseSpec,
    timestamp: f64,
    rng: &mut impl Rng,
) -> SensorFrame {
    let mut tendon_lengths = shape.tendon_lengths(topo);
    if noise.length_rel_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.length_rel_sigma).unwrap();
        for l in tendon_lengths.iter_mut() {
            *l *= 1.0 + normal.sample(rng);
            *l = l.max(1e-4);
        }
    }
    let mut bar_dirs = INSTRUMENTED_BARS.map(|l| rotation * shape.bar_direction(l));
    if noise.bar_angle_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.bar_angle_sigma).unwrap();
        for dir in bar_dirs.iter_mut() {
            *dir = tilt(*dir, normal.sample(rng), rng);
        }
    }
    SensorFrame {
        tendon_lengths,
        bar_dirs,
        timestamp,
    }
}

/// Sensor-log a simulated rollout: one frame per `stride` samples, with the
/// world shape playing the role of the body carried at identity rotation
/// (tendon lengths are frame-invariant; bar directions are already global).
pub fn log_rollout(
    trace: &crate::sim::RolloutTrace,
    topo: &RobotTopology,
    noise: &NoiseSpec,
    stride: usize,
    rng: &mut impl Rng,
) -> (Vec<SensorFrame>, Vec<(f64, RobotShape)>) {
    let identity = Matrix3::identity();
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for sample in trace.samples.iter().step_by(stride.max(1)) {
        frames.push(measure(&sample.shape, &identity, topo, noise, sample.t, rng));
        truth.push((sample.t, sample.shape));
    }
    (frames, truth)
}

/// Rotate a unit vector by `angle` about a random axis perpendicular to it.
fn tilt(dir: Vector3<f64>, angle: f64, rng: &mut impl Rng) -> Vector3<f64> {
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let helper = if dir.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let p1 = dir.cross(&helper).normalize();
    let p2 = dir.cross(&p1);
    let axis = p1 * phi.cos() + p2 * phi.sin();
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    (rot * dir).normalize()
}
