//! Equilibrium shape solving: minimize passive-spring energy subject to
//! exact bar lengths (by parameterization) and actuated tendon lengths.

use super::{SimConfig, SimError};
use crate::shape::{RobotShape, CHIRALITY_SIGN};
use crate::solver::{minimize, polish_constrained, BarChain, EdgeConstraint, LmOptions, Residual};
use crate::topology::{ACTUATED_EDGES, PASSIVE_EDGES};

/// Cables within this margin of their commanded length count as taut.
const TAUT_MARGIN: f64 = 1e-4;

/// Residual tolerance for declaring targets infeasible.
pub(crate) const CONSTRAINT_TOL: f64 = 1e-6;

fn passive_residuals(config: &SimConfig) -> Vec<Residual> {
    let w = config.passive_stiffness.sqrt();
    PASSIVE_EDGES
        .iter()
        .map(|&(p, q)| Residual::EdgeLength {
            p,
            q,
            target: config.passive_rest_length,
            weight: w,
        })
        .collect()
}

/// Elastic energy stored in the three passive tendons.
pub fn passive_energy(shape: &RobotShape, config: &SimConfig) -> f64 {
    PASSIVE_EDGES
        .iter()
        .map(|&e| {
            let stretch = shape.edge_length(e) - config.passive_rest_length;
            0.5 * config.passive_stiffness * stretch * stretch
        })
        .sum()
}

pub(crate) struct TautSolution {
    pub chain: BarChain,
    /// Which cables ended up taut (at their commanded length).
    #[allow(dead_code)] // diagnostic surface, exercised by tests
    pub taut: [bool; 6],
}

/// Solve for equilibrium treating actuated cables as inextensible but
/// slack-capable: each actuated edge may be shorter than its commanded
/// cable length, never longer. Taut cables are polished to exact equality.
pub(crate) fn solve_taut(
    cables: &[f64; 6],
    config: &SimConfig,
    init: &RobotShape,
) -> Result<TautSolution, SimError> {
    let mut chain = BarChain::from_shape(init, config.topology.bar_length);
    let mut residuals = passive_residuals(config);
    let w = config.actuated_stiffness.sqrt();
    for (i, &(p, q)) in ACTUATED_EDGES.iter().enumerate() {
        residuals.push(Residual::EdgeMaxLength {
            p,
            q,
            limit: cables[i],
            weight: w,
        });
    }
    minimize(
        &mut chain,
        &residuals,
        &LmOptions {
            max_iterations: 240,
            gradient_tol: 1e-12,
        },
    );

    let shape = chain.shape();
    let mut taut = [false; 6];
    let mut constraints = Vec::new();
    for (i, &(p, q)) in ACTUATED_EDGES.iter().enumerate() {
        if shape.edge_length((p, q)) > cables[i] - TAUT_MARGIN {
            taut[i] = true;
            constraints.push(EdgeConstraint {
                p,
                q,
                target: cables[i],
            });
        }
    }
    let energy = passive_residuals(config);
    let worst = polish_constrained(&mut chain, &energy, &constraints, 40);
    if worst > CONSTRAINT_TOL {
        return Err(SimError::InfeasibleTargets { residual: worst });
    }
    Ok(TautSolution { chain, taut })
}

/// Equilibrium with all six actuated lengths enforced exactly.
///
/// Fails with [`SimError::InfeasibleTargets`] when the lengths cannot be
/// realized (for example a triangle-inequality conflict).
pub fn form_find(
    actuated_lengths: &[f64; 6],
    config: &SimConfig,
    init: &RobotShape,
) -> Result<RobotShape, SimError> {
    let mut chain = BarChain::from_shape(init, config.topology.bar_length);
    let mut residuals = passive_residuals(config);
    let w = config.actuated_stiffness.sqrt();
    let mut constraints = Vec::with_capacity(6);
    for (i, &(p, q)) in ACTUATED_EDGES.iter().enumerate() {
        residuals.push(Residual::EdgeLength {
            p,
            q,
            target: actuated_lengths[i],
            weight: w,
        });
        constraints.push(EdgeConstraint {
            p,
            q,
            target: actuated_lengths[i],
        });
    }
    minimize(
        &mut chain,
        &residuals,
        &LmOptions {
            max_iterations: 240,
            gradient_tol: 1e-12,
        },
    );
    let energy = passive_residuals(config);
    let worst = polish_constrained(&mut chain, &energy, &constraints, 40);
    if worst > CONSTRAINT_TOL {
        return Err(SimError::InfeasibleTargets { residual: worst });
    }
    let shape = chain.shape().centered();
    debug_assert!(
        shape.chirality() * CHIRALITY_SIGN > 0.0,
        "form-finding left the canonical chirality basin"
    );
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{canonical_rest_shape, SimConfig};
    use crate::solver::{BarChain, EdgeConstraint};
    use crate::topology::{RobotTopology, ACTUATED_EDGES, REST_ACTUATED_LENGTH};
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn rest_lengths_produce_the_canonical_shape() {
        let config = SimConfig::default();
        let rest = canonical_rest_shape();
        let found = form_find(&[REST_ACTUATED_LENGTH; 6], &config, &rest).unwrap();
        for &e in &ACTUATED_EDGES {
            assert_relative_eq!(found.edge_length(e), REST_ACTUATED_LENGTH, epsilon = 1e-6);
        }
        let topo = RobotTopology::default();
        assert!(found.max_bar_length_error(&topo) < 1e-9);
    }

    #[test]
    fn form_find_is_a_fixed_point_on_its_own_output() {
        let config = SimConfig::default();
        let rest = canonical_rest_shape();
        let targets = [0.19, 0.20, 0.21, 0.18, 0.20, 0.205];
        let out = form_find(&targets, &config, &rest).unwrap();
        let again = form_find(&out.actuated_lengths(&config.topology), &config, &out).unwrap();
        for i in 0..6 {
            assert_relative_eq!(again.node(i), out.node(i), epsilon = 1e-6);
        }
    }

    #[test]
    fn random_feasible_targets_hit_constraints_and_minimize_energy() {
        let config = SimConfig::default();
        let rest = canonical_rest_shape();
        let mut rng = crate::sensing::seeded_rng(17);
        for trial in 0..20 {
            let mut targets = [0.0; 6];
            for t in targets.iter_mut() {
                *t = rng.random_range(0.14..0.24);
            }
            let out = match form_find(&targets, &config, &rest) {
                Ok(s) => s,
                Err(_) => continue, // rare infeasible draw
            };
            for (i, &e) in ACTUATED_EDGES.iter().enumerate() {
                assert_relative_eq!(out.edge_length(e), targets[i], epsilon = 1e-6);
            }
            // Local-minimum check: constraint-respecting perturbations must
            // not decrease the passive energy.
            let e_opt = passive_energy(&out, &config);
            let constraints: Vec<EdgeConstraint> = ACTUATED_EDGES
                .iter()
                .zip(&targets)
                .map(|(&(p, q), &t)| EdgeConstraint { p, q, target: t })
                .collect();
            for k in 0..50 {
                let mut chain = BarChain::from_shape(&out, config.topology.bar_length);
                for l in 0..3 {
                    for a in 0..3 {
                        chain.mids[l][a] += 1e-3 * rng.random_range(-1.0..1.0);
                        chain.dirs[l][a] += 1e-2 * rng.random_range(-1.0..1.0);
                    }
                    chain.dirs[l] = chain.dirs[l].normalize();
                }
                // Project back onto the constraint manifold, then compare.
                let worst = crate::solver::polish_constrained(&mut chain, &[], &constraints, 60);
                if worst > 1e-8 {
                    continue;
                }
                let e_perturbed = passive_energy(&chain.shape(), &config);
                assert!(
                    e_perturbed >= e_opt - 1e-9,
                    "trial {trial} perturbation {k}: energy {e_perturbed} < optimum {e_opt}"
                );
            }
        }
    }

    #[test]
    fn infeasible_triangle_is_rejected() {
        let config = SimConfig::default();
        let rest = canonical_rest_shape();
        // Even triangle with D + F far smaller than E cannot close.
        let targets = [0.2, 0.2, 0.2, 0.10, 0.26, 0.10];
        assert!(matches!(
            form_find(&targets, &config, &rest),
            Err(SimError::InfeasibleTargets { .. })
        ));
    }

    #[test]
    fn taut_solver_slackens_blocked_cables() {
        let config = SimConfig::default();
        let rest = canonical_rest_shape();
        // Command E longer than D + F allows: the even triangle cannot
        // close, so cable E must go slack with its edge capped near D + F.
        let cables = [0.2, 0.2, 0.2, 0.10, 0.26, 0.10];
        let sol = solve_taut(&cables, &config, &rest).unwrap();
        let shape = sol.chain.shape();
        assert!(!sol.taut[4], "cable E should be slack");
        let e_len = shape.edge_length(ACTUATED_EDGES[4]);
        assert!(e_len < 0.26 - 1e-4, "edge E realized {e_len}");
        assert!(e_len <= cables[3] + cables[5] + 1e-6, "edge E cannot exceed D + F");
        for (i, &e) in ACTUATED_EDGES.iter().enumerate() {
            println!("cable {i}: cmd {:.3} realized {:.4} taut {}", cables[i], shape.edge_length(e), sol.taut[i]);
            // No cable may stretch past its commanded length.
            assert!(shape.edge_length(e) <= cables[i] + 1e-6);
        }
        // The crushed bottom edges are held open by the structure: taut.
        for i in [3usize, 5] {
            assert!(sol.taut[i], "cable {i} should be taut");
            assert_relative_eq!(
                shape.edge_length(ACTUATED_EDGES[i]),
                cables[i],
                epsilon = 1e-6
            );
        }
    }
}
