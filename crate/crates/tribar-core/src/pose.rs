//! Planar rigid transforms for pose bookkeeping and action composition.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * std::f64::consts::PI);
    if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

/// A planar pose: rotation angle plus translation, expressed in a parent
/// frame (usually the world frame, or the body frame before an action).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Pose2DRepr", into = "Pose2DRepr")]
pub struct Pose2D {
    /// Rotation angle, normalized to (-pi, pi].
    pub theta: f64,
    /// Translation of the frame origin in parent coordinates.
    pub t: Vector2<f64>,
}

/// Canonical JSON encoding: `{"theta": .., "tx": .., "ty": ..}`.
#[derive(Serialize, Deserialize)]
struct Pose2DRepr {
    theta: f64,
    tx: f64,
    ty: f64,
}

impl From<Pose2DRepr> for Pose2D {
    fn from(r: Pose2DRepr) -> Self {
        Pose2D::new(r.theta, Vector2::new(r.tx, r.ty))
    }
}

impl From<Pose2D> for Pose2DRepr {
    fn from(p: Pose2D) -> Self {
        Pose2DRepr {
            theta: p.theta,
            tx: p.t.x,
            ty: p.t.y,
        }
    }
}

impl Pose2D {
    pub fn new(theta: f64, t: Vector2<f64>) -> Self {
        Self {
            theta: wrap_angle(theta),
            t,
        }
    }

    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            t: Vector2::zeros(),
        }
    }

    /// Rotation matrix of this pose's frame with respect to the parent frame.
    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// Map a point expressed in this pose's frame into the parent frame.
    pub fn apply(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.rotation() * p + self.t
    }

    /// Compose with a pose expressed in this pose's frame.
    ///
    /// With `self` describing frame 1 in the world and `rhs` describing
    /// frame 2 in frame 1, the result describes frame 2 in the world:
    /// `R_2^W = R_1^W R_2^1`, `t_2^W = t_1^W + R_1^W t_2^1`.
    pub fn compose(&self, rhs: &Pose2D) -> Pose2D {
        Pose2D::new(self.theta + rhs.theta, self.t + self.rotation() * rhs.t)
    }

    pub fn inverse(&self) -> Pose2D {
        let r_inv = self.rotation().transpose();
        Pose2D::new(-self.theta, -(r_inv * self.t))
    }
}

/// Rotate a 2D vector by +90 degrees (counterclockwise).
pub fn rot90_ccw(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Scalar 2D cross product `a x b = a.x * b.y - a.y * b.x`.
pub fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}
