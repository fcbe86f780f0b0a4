//! Ground contact: support polygons, toppling, and no-slip placement.

use super::{SimConfig, SimError};
use crate::shape::RobotShape;
use nalgebra::{Unit, Vector2, Vector3};

const MAX_TOPPLES: usize = 20;

/// Node ids resting on the ground plane (z within the contact tolerance).
pub fn contact_nodes(shape: &RobotShape, config: &SimConfig) -> Vec<usize> {
    (0..6).filter(|&i| shape.node(i).z <= config.contact_tol).collect()
}

/// Indices into `pts` forming the convex hull, counterclockwise.
/// Monotone chain over at most six points.
pub fn convex_hull(pts: &[Vector2<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .x
            .total_cmp(&pts[b].x)
            .then(pts[a].y.total_cmp(&pts[b].y))
    });
    order.dedup_by(|&mut a, &mut b| (pts[a] - pts[b]).norm() < 1e-12);
    if order.len() < 3 {
        return order;
    }
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a].x - pts[o].x) * (pts[b].y - pts[o].y) - (pts[a].y - pts[o].y) * (pts[b].x - pts[o].x)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(order.len() * 2);
    for &p in &order {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-15 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in order.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-15 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Result of a support test: either stable, or a pivot line to topple over.
pub(crate) enum Support {
    Stable,
    /// Pivot line through `point` with horizontal direction `axis` (unit).
    /// The axis is oriented so that a positive (right-hand) rotation about
    /// it tips the body outward, away from the support region.
    Topple {
        point: Vector2<f64>,
        axis: Vector2<f64>,
    },
}

/// Where the weight vector through the CoM pierces the ground plane.
pub(crate) fn weight_projection(com: Vector3<f64>, gravity: Vector3<f64>) -> Vector2<f64> {
    let scale = com.z / gravity.z;
    Vector2::new(com.x - scale * gravity.x, com.y - scale * gravity.y)
}

/// Check the CoM ground projection against the support region and pick the
/// pivot for toppling when outside. `inset` shrinks the support polygon
/// inward (end caps contact the ground inboard of the node centers).
pub(crate) fn support_check(
    contact_xy: &[Vector2<f64>],
    com_proj: Vector2<f64>,
    inset: f64,
) -> Support {
    match contact_xy.len() {
        0 => Support::Stable, // nothing to do; caller guarantees contact
        1 => {
            let offset = com_proj - contact_xy[0];
            if offset.norm() < 1e-9 {
                Support::Stable
            } else {
                Support::Topple {
                    point: contact_xy[0],
                    axis: crate::pose::rot90_ccw(offset.normalize()),
                }
            }
        }
        _ => {
            let hull = convex_hull(contact_xy);
            if hull.len() < 3 {
                return segment_check(contact_xy, com_proj);
            }
            // A heavily contracted support polygon can be smaller than the
            // cap radius; keep a nonempty stable region by capping the
            // inset below the centroid's edge clearance.
            let centroid = hull.iter().map(|&i| contact_xy[i]).sum::<Vector2<f64>>()
                / hull.len() as f64;
            let mut clearance = f64::INFINITY;
            for i in 0..hull.len() {
                let a = contact_xy[hull[i]];
                let b = contact_xy[hull[(i + 1) % hull.len()]];
                let edge = (b - a).normalize();
                let inward = Vector2::new(-edge.y, edge.x);
                clearance = clearance.min((centroid - a).dot(&inward));
            }
            let inset = inset.min(0.8 * clearance.max(0.0));
            // Inside test against the ccw hull, remembering the violated
            // edge nearest to the CoM.
            let mut best: Option<(f64, Vector2<f64>, Vector2<f64>)> = None;
            let mut inside = true;
            for i in 0..hull.len() {
                let a = contact_xy[hull[i]];
                let b = contact_xy[hull[(i + 1) % hull.len()]];
                let edge = (b - a).normalize();
                let outward = Vector2::new(edge.y, -edge.x);
                let violation = (com_proj - a).dot(&outward) + inset;
                if violation > 1e-12 {
                    inside = false;
                    let d = distance_to_segment(com_proj, a, b);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, edge));
                    }
                }
            }
            if inside {
                Support::Stable
            } else {
                let (_, point, axis) = best.unwrap();
                Support::Topple { point, axis }
            }
        }
    }
}

fn segment_check(contact_xy: &[Vector2<f64>], com_proj: Vector2<f64>) -> Support {
    // Collinear contacts: find the extreme pair and treat it as a segment.
    let (mut a, mut b) = (contact_xy[0], contact_xy[0]);
    let mut max_d = -1.0;
    for &p in contact_xy {
        for &q in contact_xy {
            let d = (p - q).norm();
            if d > max_d {
                max_d = d;
                a = p;
                b = q;
            }
        }
    }
    if max_d < 1e-12 {
        return support_check(&[a], com_proj, 0.0);
    }
    let dir = (b - a).normalize();
    let t = (com_proj - a).dot(&dir);
    let perp = com_proj - a - dir * t;
    if perp.norm() < 1e-9 && t >= 0.0 && t <= max_d {
        return Support::Stable;
    }
    if t < 0.0 || t > max_d {
        let end = if t < 0.0 { a } else { b };
        let offset = com_proj - end;
        Support::Topple {
            point: end,
            axis: crate::pose::rot90_ccw(offset.normalize()),
        }
    } else {
        Support::Topple {
            point: a,
            axis: crate::pose::rot90_ccw(perp.normalize()),
        }
    }
}

fn distance_to_segment(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Smallest rotation about the axis line that lands another node on the
/// ground. `point`/`axis` describe a horizontal line at z = 0. Rotation
/// sign is chosen so the body falls with gravity.
fn topple_once(
    shape: &mut RobotShape,
    point: Vector2<f64>,
    axis: Vector2<f64>,
    contact_tol: f64,
) -> Result<(), SimError> {
    let a3 = Vector3::new(point.x, point.y, 0.0);
    let e3 = Vector3::new(axis.x, axis.y, 0.0).normalize();
    // Descending ground crossing per node: z(alpha) = wz cos a + c sin a
    // has its falling zero at atan2(c, wz) + pi/2.
    let mut best: Option<f64> = None;
    for k in 0..6 {
        let r = shape.node(k) - a3;
        let r_par = e3 * r.dot(&e3);
        let w = r - r_par;
        let wz = w.z;
        let c = e3.cross(&w).z;
        if (wz * wz + c * c).sqrt() < 1e-9 {
            continue; // on the axis
        }
        let alpha = f64::atan2(c, wz) + std::f64::consts::FRAC_PI_2;
        if alpha <= 1e-9 || alpha > 0.98 * std::f64::consts::PI {
            continue;
        }
        if shape.node(k).z <= contact_tol && alpha < 1e-6 {
            continue; // already grounded at the pivot
        }
        if best.is_none_or(|b| alpha < b) {
            best = Some(alpha);
        }
    }
    let Some(alpha) = best else {
        return Err(SimError::SettleDivergence(MAX_TOPPLES));
    };
    let rot = nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(e3), alpha);
    for i in 0..6 {
        let p = shape.node(i);
        *shape.node_mut(i) = a3 + rot * (p - a3);
    }
    let snap = shape.lowest_z();
    *shape = shape.translated(Vector3::new(0.0, 0.0, -snap));
    Ok(())
}

/// Topple the shape over support-polygon edges until its weight projection
/// falls inside the support region. Returns the number of topples.
///
/// Two regimes: a weight projection outside the node-to-node support hull
/// must tip over it (even through a slightly higher landing, standing in
/// for the momentum that carries the real robot through); one merely within
/// the cap-radius margin of an edge topples only when the landing actually
/// lowers the potential. Revisiting an earlier support set means the body
/// is rocking, not rolling, and settles where it stands.
pub(crate) fn settle_shape(shape: &mut RobotShape, config: &SimConfig) -> Result<usize, SimError> {
    let mut visited: Vec<Vec<usize>> = Vec::new();
    visited.push(contact_nodes(shape, config));
    for iter in 0..MAX_TOPPLES {
        let contacts = contact_nodes(shape, config);
        let contact_xy: Vec<Vector2<f64>> = contacts
            .iter()
            .map(|&i| Vector2::new(shape.node(i).x, shape.node(i).y))
            .collect();
        let com = shape.centroid();
        let com_proj = weight_projection(com, config.gravity);
        let strict = support_check(&contact_xy, com_proj, 0.0);
        let (point, axis, gated) = match strict {
            Support::Topple { point, axis } => (point, axis, false),
            Support::Stable => match support_check(&contact_xy, com_proj, config.cap_radius) {
                Support::Stable => return Ok(iter),
                Support::Topple { point, axis } => (point, axis, true),
            },
        };
        let before = -config.gravity.dot(&shape.centroid());
        let mut trial = *shape;
        topple_once(&mut trial, point, axis, config.contact_tol)?;
        let after = -config.gravity.dot(&trial.centroid());
        if gated && after >= before - 1e-9 {
            return Ok(iter);
        }
        let landed = contact_nodes(&trial, config);
        if visited.contains(&landed) {
            return Ok(iter);
        }
        visited.push(landed);
        *shape = trial;
    }
    Err(SimError::SettleDivergence(MAX_TOPPLES))
}

/// Static load carried by each contact: barycentric coordinates of the
/// weight projection for a 3-point support, or a least-squares moment
/// balance clamped to non-negative loads for larger contact sets. A small
/// floor keeps the fit well posed.
pub(crate) fn contact_loads(contact_xy: &[Vector2<f64>], com_proj: Vector2<f64>) -> Vec<f64> {
    let n = contact_xy.len();
    let floor = 0.02;
    if n == 3 {
        let (a, b, c) = (contact_xy[0], contact_xy[1], contact_xy[2]);
        let area = crate::pose::cross2(b - a, c - a);
        if area.abs() > 1e-9 {
            let wa = crate::pose::cross2(b - com_proj, c - com_proj) / area;
            let wb = crate::pose::cross2(c - com_proj, a - com_proj) / area;
            let wc = crate::pose::cross2(a - com_proj, b - com_proj) / area;
            return vec![wa.max(floor), wb.max(floor), wc.max(floor)];
        }
    }
    // General case: inverse-square distance from the weight line.
    contact_xy
        .iter()
        .map(|p| (1.0 / ((p - com_proj).norm_squared() + 1e-4)).max(floor))
        .collect()
}

/// Rigidly place a newly solved body shape into the world so that the held
/// contact nodes move as little as possible (no-slip approximation), then
/// drop it onto the ground plane. Contacts are weighted by the static load
/// they carry: heavily loaded feet stick, unloaded feet slip freely, which
/// is what lets weight-shifting gaits rotate the body.
pub(crate) fn place_on_ground(
    intrinsic: &RobotShape,
    prev_world: &RobotShape,
    hold: &[usize],
    gravity: Vector3<f64>,
) -> RobotShape {
    let idx: Vec<usize> = if hold.len() >= 3 {
        hold.to_vec()
    } else {
        (0..6).collect()
    };
    let com_proj = weight_projection(prev_world.centroid(), gravity);
    let contact_xy: Vec<Vector2<f64>> = idx
        .iter()
        .map(|&i| {
            let p = prev_world.node(i);
            Vector2::new(p.x, p.y)
        })
        .collect();
    let weights = contact_loads(&contact_xy, com_proj);
    let from: Vec<Vector3<f64>> = idx.iter().map(|&i| intrinsic.node(i)).collect();
    let to: Vec<Vector3<f64>> = idx.iter().map(|&i| prev_world.node(i)).collect();
    let (r, t) = crate::solver::kabsch_fit_weighted(&from, &to, &weights);
    let world = intrinsic.rotated(&r).translated(t);
    world.translated(Vector3::new(0.0, 0.0, -world.lowest_z()))
}
