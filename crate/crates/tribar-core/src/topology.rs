//! Fixed 3-bar/9-tendon connectivity and labeling conventions.
//!
//! Nodes are numbered 0-5. Bar `l` pairs node `2l` with node `2l+1`, so the
//! even nodes {0, 2, 4} form one side of the robot and the odd nodes
//! {1, 3, 5} the other. The six actuated tendons A-F form two triangles, one
//! per side; the three passive spring tendons connect node `k` to `k+3`.

use serde::{Deserialize, Serialize};

pub const NODE_COUNT: usize = 6;
pub const BAR_COUNT: usize = 3;
pub const ACTUATED_COUNT: usize = 6;
pub const PASSIVE_COUNT: usize = 3;
pub const TENDON_COUNT: usize = ACTUATED_COUNT + PASSIVE_COUNT;

/// Bar length, end cap to end cap.
pub const DEFAULT_BAR_LENGTH: f64 = 0.360;

/// Actuated tendon length in the rest state, from which gaits are defined.
pub const REST_ACTUATED_LENGTH: f64 = 0.200;

/// Labels for the six actuated tendons, in command order.
///
/// A, B, C triangulate the odd nodes (the robot's left side); D, E, F
/// triangulate the even nodes (the right side). The edge assignment is
/// pinned so that the two tendons spanning the four lowest nodes of the
/// rest state are exactly {A, D}, then {C, F} after one forward roll and
/// {B, E} after two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tendon {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Tendon {
    pub const ALL: [Tendon; 6] = [
        Tendon::A,
        Tendon::B,
        Tendon::C,
        Tendon::D,
        Tendon::E,
        Tendon::F,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tendon {
        Self::ALL[i]
    }

    /// Node pair this tendon connects.
    pub fn endpoints(self) -> (usize, usize) {
        ACTUATED_EDGES[self.index()]
    }

    /// True for tendons on the odd-node triangle (the left side).
    pub fn is_left(self) -> bool {
        self.index() < 3
    }

    pub fn name(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F"][self.index()]
    }
}

/// Actuated edges in tendon order A..F.
pub const ACTUATED_EDGES: [(usize, usize); ACTUATED_COUNT] =
    [(3, 5), (1, 3), (1, 5), (0, 2), (0, 4), (2, 4)];

/// Passive spring edges (node k to node k+3), in order k = 0, 1, 2.
pub const PASSIVE_EDGES: [(usize, usize); PASSIVE_COUNT] = [(0, 3), (1, 4), (2, 5)];

/// Bars as (even, odd) node pairs.
pub const BARS: [(usize, usize); BAR_COUNT] = [(0, 1), (2, 3), (4, 5)];

/// The fixed robot graph plus its one free scalar, the bar length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotTopology {
    pub bar_length: f64,
}

impl Default for RobotTopology {
    fn default() -> Self {
        Self {
            bar_length: DEFAULT_BAR_LENGTH,
        }
    }
}

impl RobotTopology {
    pub fn new(bar_length: f64) -> Self {
        assert!(bar_length > 0.0, "bar length must be positive");
        Self { bar_length }
    }

    pub fn bars(&self) -> [(usize, usize); BAR_COUNT] {
        BARS
    }

    pub fn actuated_edges(&self) -> [(usize, usize); ACTUATED_COUNT] {
        ACTUATED_EDGES
    }

    pub fn passive_edges(&self) -> [(usize, usize); PASSIVE_COUNT] {
        PASSIVE_EDGES
    }

    /// All nine sensed tendon edges in measurement order: A..F, then the
    /// passive edges (0,3), (1,4), (2,5).
    pub fn tendon_edges(&self) -> [(usize, usize); TENDON_COUNT] {
        let mut edges = [(0usize, 0usize); TENDON_COUNT];
        edges[..ACTUATED_COUNT].copy_from_slice(&ACTUATED_EDGES);
        edges[ACTUATED_COUNT..].copy_from_slice(&PASSIVE_EDGES);
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn bars_pair_even_with_next_odd() {
        for (l, &(a, b)) in BARS.iter().enumerate() {
            assert_eq!(a, 2 * l);
            assert_eq!(b, 2 * l + 1);
        }
    }

    #[test]
    fn actuated_tendons_partition_into_side_triangles() {
        for t in &Tendon::ALL[..3] {
            let (p, q) = t.endpoints();
            assert!(p % 2 == 1 && q % 2 == 1, "{:?} must join odd nodes", t);
        }
        for t in &Tendon::ALL[3..] {
            let (p, q) = t.endpoints();
            assert!(p % 2 == 0 && q % 2 == 0, "{:?} must join even nodes", t);
        }
        // Each triangle touches all three of its side's nodes.
        let odd: BTreeSet<usize> = ACTUATED_EDGES[..3].iter().flat_map(|&(p, q)| [p, q]).collect();
        let even: BTreeSet<usize> = ACTUATED_EDGES[3..].iter().flat_map(|&(p, q)| [p, q]).collect();
        assert_eq!(odd, BTreeSet::from([1, 3, 5]));
        assert_eq!(even, BTreeSet::from([0, 2, 4]));
    }

    #[test]
    fn passive_tendons_connect_k_to_k_plus_3() {
        for (k, &(p, q)) in PASSIVE_EDGES.iter().enumerate() {
            assert_eq!(p, k);
            assert_eq!(q, k + 3);
        }
    }

    #[test]
    fn tendon_a_connects_nodes_3_and_5() {
        assert_eq!(Tendon::A.endpoints(), (3, 5));
        assert_eq!(Tendon::D.endpoints(), (0, 2));
    }

    #[test]
    fn bottom_tendon_pairs_per_face() {
        // The two tendons fully contained in each face's four bottom nodes.
        let faces: [(&[usize], [Tendon; 2]); 3] = [
            (&[0, 2, 3, 5], [Tendon::A, Tendon::D]),
            (&[1, 2, 4, 5], [Tendon::C, Tendon::F]),
            (&[0, 1, 3, 4], [Tendon::B, Tendon::E]),
        ];
        for (nodes, expected) in faces {
            let set: BTreeSet<usize> = nodes.iter().copied().collect();
            let contained: Vec<Tendon> = Tendon::ALL
                .into_iter()
                .filter(|t| {
                    let (p, q) = t.endpoints();
                    set.contains(&p) && set.contains(&q)
                })
                .collect();
            assert_eq!(contained, expected.to_vec());
        }
    }
}
