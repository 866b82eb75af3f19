//! Finite element machinery for the vibration of thin orthotropic plates.
//!
//! The discretization lives on the barycentric subdivision `K'` of a
//! tetrahedral complex `K`.  Displacement waves are expanded in Whitney
//! fields attached to the edges and faces of `K'`, which splits the
//! approximation space into an exactly divergence-free part (edge fields)
//! and a complementary part carrying compression (face fields).  On top of
//! that sit the orthotropic material model, the assembled Gram/stiffness
//! pair with its traction boundary coupling, a shift-invert Lanczos
//! eigensolver over a hand-rolled sparse `LDL^T`, and the synthesis of
//! forced resonant waves with nodal-line classification.
//!
//! Everything here is deterministic: meshes enumerate simplices in a fixed
//! lexicographic order, assembly reduces parallel work in tet order, and
//! the eigensolver starts from a fixed vector.  Identical inputs produce
//! bit-identical outputs at any thread count.

pub mod assembly;
pub mod eigensolve;
pub mod hash;
#[cfg(feature = "first-iterate")]
pub mod iterate;
pub mod material;
pub mod mesh;
pub mod resonance;
pub mod sparse;
pub mod whitney;
