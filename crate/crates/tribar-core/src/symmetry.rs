//! Face-symmetry gait algebra: translating a gait to the current bottom
//! face, reversing a gait, and swapping the pivot side of crawling turns.
//!
//! The robot has three rolling faces, identified by their bottom four
//! nodes. A gait written for the rest face can be executed from any face by
//! permuting its six targets, and rolled backward by a second family of
//! permutations. All per-face maps are generated by conjugating the rest
//! face's map with the face translation and are pinned by exact, fully
//! expanded reference gaits in the tests.

use crate::gait::{Gait, GaitStep};
use serde::{Deserialize, Serialize};

/// One of the three rolling faces, identified by its bottom node set.
/// Forward quasistatic rolling cycles F0 -> F1 -> F2 -> F0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceId {
    F0,
    F1,
    F2,
}

pub const FACE_BOTTOM_NODES: [[usize; 4]; 3] = [[0, 2, 3, 5], [1, 2, 4, 5], [0, 1, 3, 4]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RollDirection {
    Forward,
    Backward,
}

impl FaceId {
    pub const ALL: [FaceId; 3] = [FaceId::F0, FaceId::F1, FaceId::F2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> FaceId {
        Self::ALL[i.rem_euclid(3)]
    }

    /// The four bottom nodes identifying this face, ascending.
    pub fn bottom_nodes(self) -> [usize; 4] {
        FACE_BOTTOM_NODES[self.index()]
    }

    /// Face reached after advancing `steps` in the forward roll cycle
    /// (negative steps go backward).
    pub fn advanced(self, steps: i32) -> FaceId {
        FaceId::from_index((self.index() as i32 + steps).rem_euclid(3) as usize)
    }

    /// Identify a face from an observed set of low nodes. Succeeds when the
    /// nodes are a subset of exactly one face's bottom four (any 3 of a
    /// face's 4 bottom nodes identify it uniquely).
    pub fn from_bottom_nodes(nodes: &[usize]) -> Option<FaceId> {
        let mut matches = FaceId::ALL
            .into_iter()
            .filter(|f| nodes.iter().all(|n| f.bottom_nodes().contains(n)));
        match (matches.next(), matches.next()) {
            (Some(face), None) => Some(face),
            _ => None,
        }
    }
}

/// Face after one roll of the basic rolling gait.
pub fn face_after_roll(face: FaceId, direction: RollDirection) -> FaceId {
    match direction {
        RollDirection::Forward => face.advanced(1),
        RollDirection::Backward => face.advanced(-1),
    }
}

// ---------------------------------------------------------------------------
// Permutations. A map `m` acts on a target vector as out[i] = in[m[i]].
// ---------------------------------------------------------------------------

type Perm = [usize; 6];

const IDENTITY: Perm = [0, 1, 2, 3, 4, 5];

/// Rest-face reverse map: the bottom tendon pair (A, D) swaps and the other
/// four swap across-diagonally (B<->F, C<->E).
const REVERSE_F0: Perm = [3, 5, 4, 0, 2, 1];

/// Rest-face pivot-side swap for the crawling turns (A<->F, B<->D, C<->E),
/// pinned by the reference right-pivot gait listings.
const PIVOT_SWAP_F0: Perm = [5, 3, 4, 1, 2, 0];

fn invert(p: Perm) -> Perm {
    let mut inv = [0; 6];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// Conjugate a rest-face map into another face's frame: t . s . t^-1.
fn conjugate(t: Perm, s: Perm) -> Perm {
    let t_inv = invert(t);
    let mut out = [0; 6];
    for i in 0..6 {
        out[i] = t[s[t_inv[i]]];
    }
    out
}

/// Per-face target permutation: targets on each side (ABC and DEF) are
/// left-shifted by one for every forward roll away from the rest face.
pub fn translation_permutation(face: FaceId) -> Perm {
    match face {
        FaceId::F0 => IDENTITY,
        FaceId::F1 => [1, 2, 0, 4, 5, 3],
        FaceId::F2 => [2, 0, 1, 5, 3, 4],
    }
}

/// Per-face reverse map, conjugated from the rest-face map.
pub fn reverse_permutation(face: FaceId) -> Perm {
    conjugate(translation_permutation(face), REVERSE_F0)
}

/// Per-face pivot-swap map for the crawling turns.
pub fn pivot_swap_permutation(face: FaceId) -> Perm {
    conjugate(translation_permutation(face), PIVOT_SWAP_F0)
}

fn apply(step: &GaitStep, m: Perm) -> GaitStep {
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = step.targets[m[i]];
    }
    GaitStep::new(out)
}

/// Translate a rest-face step to the given bottom face.
pub fn translate_step(step: &GaitStep, face: FaceId) -> GaitStep {
    apply(step, translation_permutation(face))
}

/// Reverse a rest-face step for execution on the given bottom face.
pub fn reverse_step(step: &GaitStep, face: FaceId) -> GaitStep {
    apply(step, reverse_permutation(face))
}

/// Swap the pivot side of a crawling-turn step on the given bottom face.
pub fn pivot_swap_step(step: &GaitStep, face: FaceId) -> GaitStep {
    apply(step, pivot_swap_permutation(face))
}

fn map_gait(gait: &Gait, name: String, m: Perm, face_advance: i8) -> Gait {
    Gait {
        name,
        steps: gait.steps.iter().map(|s| apply(s, m)).collect(),
        params: gait.params,
        cycle_face_advance: face_advance,
    }
}

/// The whole gait translated to a bottom face.
pub fn translate_gait(gait: &Gait, face: FaceId) -> Gait {
    map_gait(
        gait,
        format!("{}@{:?}", gait.name, face),
        translation_permutation(face),
        gait.cycle_face_advance,
    )
}

/// The gait that rolls in the opposite direction, for execution on the
/// given bottom face. Face progression reverses; for planner bookkeeping
/// the caller also flips heading and principal axis.
pub fn reverse_gait(gait: &Gait, face: FaceId) -> Gait {
    map_gait(
        gait,
        format!("{}_reversed@{:?}", gait.name, face),
        reverse_permutation(face),
        -gait.cycle_face_advance,
    )
}

/// A crawling turn with the pivot foot moved to the other side.
pub fn swap_pivot(gait: &Gait, face: FaceId) -> Gait {
    map_gait(
        gait,
        format!("{}_swapped@{:?}", gait.name, face),
        pivot_swap_permutation(face),
        gait.cycle_face_advance,
    )
}

/// Expand a base gait over one full face period (three cycles), translating
/// each cycle to the face the robot is on. `face_advance` is the gait's
/// per-cycle face progression; gaits that keep their face (advance 0) are
/// returned unchanged.
pub fn expand_full_gait(gait: &Gait, start_face: FaceId, face_advance: i8) -> Gait {
    if face_advance == 0 {
        return gait.clone();
    }
    let mut steps = Vec::with_capacity(gait.steps.len() * 3);
    for cycle in 0..3 {
        let face = start_face.advanced(cycle * face_advance as i32);
        steps.extend(gait.steps.iter().map(|s| translate_step(s, face)));
    }
    Gait {
        name: format!("{}_full@{:?}", gait.name, start_face),
        steps,
        params: gait.params,
        cycle_face_advance: face_advance,
    }
}

/// Expand the reversed form of a forward-rolling gait over one full face
/// period. Faces progress opposite to the gait's forward sequence, and each
/// cycle applies that face's reverse map.
pub fn expand_reverse_gait(gait: &Gait, start_face: FaceId) -> Gait {
    let advance = -gait.cycle_face_advance;
    let mut steps = Vec::with_capacity(gait.steps.len() * 3);
    for cycle in 0..3 {
        let face = start_face.advanced(cycle * advance as i32);
        steps.extend(gait.steps.iter().map(|s| reverse_step(s, face)));
    }
    Gait {
        name: format!("{}_reversed_full@{:?}", gait.name, start_face),
        steps,
        params: gait.params,
        cycle_face_advance: advance,
    }
}
