//! Node-position geometry: shapes, centroids, chirality, and body axes.

use crate::topology::{RobotTopology, BARS, TENDON_COUNT};
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Handedness of the robot's chiral topology. Every shape produced or
/// reconstructed by this crate must have `chirality().signum()` equal to
/// this constant; distance-only reconstructions flip their mirror image to
/// match it. The sign is pinned by the rest shape: with this handedness the
/// robot's forward roll (face F0 to F1) travels along its heading.
pub const CHIRALITY_SIGN: f64 = 1.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeomError {
    /// The two side-triangle centroids project to (almost) the same ground
    /// point, so no principal axis exists.
    #[error("degenerate principal axis: triangle centroids coincide in the ground plane")]
    DegenerateAxis,
}

/// Six node positions. Serialized canonically as an array of six `[x, y, z]`
/// triples in node order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ShapeRepr", into = "ShapeRepr")]
pub struct RobotShape {
    nodes: [Vector3<f64>; 6],
}

type ShapeRepr = [[f64; 3]; 6];

impl From<ShapeRepr> for RobotShape {
    fn from(r: ShapeRepr) -> Self {
        RobotShape {
            nodes: r.map(|p| Vector3::new(p[0], p[1], p[2])),
        }
    }
}

impl From<RobotShape> for ShapeRepr {
    fn from(s: RobotShape) -> Self {
        s.nodes.map(|p| [p.x, p.y, p.z])
    }
}

impl RobotShape {
    pub fn new(nodes: [Vector3<f64>; 6]) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Vector3<f64>; 6] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vector3<f64> {
        self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut Vector3<f64> {
        &mut self.nodes[i]
    }

    /// Center of mass: the centroid of the six end caps.
    pub fn centroid(&self) -> Vector3<f64> {
        self.nodes.iter().sum::<Vector3<f64>>() / 6.0
    }

    pub fn translated(&self, v: Vector3<f64>) -> Self {
        Self {
            nodes: self.nodes.map(|p| p + v),
        }
    }

    pub fn rotated(&self, r: &Matrix3<f64>) -> Self {
        Self {
            nodes: self.nodes.map(|p| r * p),
        }
    }

    /// Same shape with the centroid moved to the origin.
    pub fn centered(&self) -> Self {
        self.translated(-self.centroid())
    }

    /// Point reflection through the origin. Preserves every pairwise
    /// distance while flipping chirality.
    pub fn mirrored(&self) -> Self {
        Self {
            nodes: self.nodes.map(|p| -p),
        }
    }

    /// Unit vector along bar `l`, pointing from node `2l+1` to node `2l`.
    pub fn bar_direction(&self, l: usize) -> Vector3<f64> {
        let (even, odd) = BARS[l];
        (self.nodes[even] - self.nodes[odd]).normalize()
    }

    /// Triple product of the three bar directions (red, green, blue order).
    /// Its sign is the shape's handedness.
    pub fn chirality(&self) -> f64 {
        let u0 = self.bar_direction(0);
        let u1 = self.bar_direction(1);
        let u2 = self.bar_direction(2);
        u0.dot(&u1.cross(&u2))
    }

    pub fn edge_length(&self, edge: (usize, usize)) -> f64 {
        (self.nodes[edge.0] - self.nodes[edge.1]).norm()
    }

    /// The nine tendon lengths in sensor order (A..F, then passive).
    pub fn tendon_lengths(&self, topo: &RobotTopology) -> [f64; TENDON_COUNT] {
        topo.tendon_edges().map(|e| self.edge_length(e))
    }

    pub fn actuated_lengths(&self, topo: &RobotTopology) -> [f64; 6] {
        topo.actuated_edges().map(|e| self.edge_length(e))
    }

    pub fn lowest_z(&self) -> f64 {
        self.nodes.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }

    /// Node ids within `band` of the lowest node, ascending.
    pub fn bottom_nodes(&self, band: f64) -> Vec<usize> {
        let floor = self.lowest_z();
        (0..6).filter(|&i| self.nodes[i].z <= floor + band).collect()
    }

    /// The four lowest nodes by height, ascending by id.
    pub fn four_lowest(&self) -> [usize; 4] {
        let mut ids = [0usize, 1, 2, 3, 4, 5];
        ids.sort_by(|&a, &b| self.nodes[a].z.total_cmp(&self.nodes[b].z));
        let mut low: [usize; 4] = ids[..4].try_into().unwrap();
        low.sort_unstable();
        low
    }

    /// Centroid of the odd-node triangle {1, 3, 5} (the robot's left side).
    pub fn odd_centroid(&self) -> Vector3<f64> {
        (self.nodes[1] + self.nodes[3] + self.nodes[5]) / 3.0
    }

    /// Centroid of the even-node triangle {0, 2, 4} (the right side).
    pub fn even_centroid(&self) -> Vector3<f64> {
        (self.nodes[0] + self.nodes[2] + self.nodes[4]) / 3.0
    }

    /// Check bar lengths against the topology within `tol` (absolute, m).
    pub fn max_bar_length_error(&self, topo: &RobotTopology) -> f64 {
        BARS.iter()
            .map(|&e| (self.edge_length(e) - topo.bar_length).abs())
            .fold(0.0, f64::max)
    }
}

/// The planar body axes used for pose extraction and planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyAxes {
    /// Unit 2D projection of the vector from the odd-triangle centroid to
    /// the even-triangle centroid.
    pub principal_axis: Vector2<f64>,
    /// The principal axis rotated +90 degrees in the ground plane.
    pub heading: Vector2<f64>,
}

/// Ground-plane principal axis and heading of a shape.
///
/// Fails with [`GeomError::DegenerateAxis`] when the two triangle centroids
/// project to the same point (within 1e-9 m).
pub fn principal_axis_2d(shape: &RobotShape) -> Result<BodyAxes, GeomError> {
    let axis3 = shape.even_centroid() - shape.odd_centroid();
    let axis2 = Vector2::new(axis3.x, axis3.y);
    if axis2.norm() < 1e-9 {
        return Err(GeomError::DegenerateAxis);
    }
    let principal_axis = axis2.normalize();
    Ok(BodyAxes {
        principal_axis,
        heading: crate::pose::rot90_ccw(principal_axis),
    })
}
