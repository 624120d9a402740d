//! 2D particle-dynamics fracture simulator with neural-operator surrogates.
//!
//! The crate has two halves. The simulation half seeds an irregular particle
//! lattice over a rectangular specimen with a circular hole and an edge notch,
//! builds a Delaunay interaction triangulation, and advances damped Newtonian
//! dynamics under quasi-static displacement loading; per-triangle forces derive
//! from an isotropic elastic free energy and triangles are deactivated by a
//! maximum-principal-stress criterion. The surrogate half trains branch/trunk
//! operator networks (plain and fusion variants) on the recorded particle
//! trajectories to predict time-dependent displacement fields across varying
//! geometries.

pub mod dataset;
pub mod geometry;
pub mod material;
pub mod operator;
pub mod solver;
pub mod trajectory;
pub mod validation;
pub mod vec2;

pub use geometry::{DomainSpec, ParticleSystem, Triangulation};
pub use material::MaterialModel;
pub use solver::LoadingProtocol;
pub use trajectory::Trajectory;
