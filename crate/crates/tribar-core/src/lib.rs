//! Software twin of a 3-bar rolling tensegrity robot.
//!
//! The crate models the full control stack of a desk-scale 3-bar tensegrity:
//! capacitive tendon sensing, two-stage shape/orientation estimation, the
//! PID gait engine with first-reach latching, the face-symmetry gait algebra,
//! a simplified quasistatic rolling simulator, and a receding-horizon
//! trajectory planner driven by a tabulated action space.
//!
//! Lengths are meters, angles radians, unless a function says otherwise.

pub mod estimation;
pub mod files;
pub mod gait;
pub mod planner;
pub mod pose;
pub mod presets;
pub mod sensing;
pub mod shape;
pub mod sim;
pub(crate) mod solver;
pub mod symmetry;
pub mod topology;

pub use pose::Pose2D;
pub use shape::{BodyAxes, RobotShape};
pub use symmetry::FaceId;
pub use topology::{RobotTopology, Tendon};
