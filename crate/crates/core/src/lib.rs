//! Circle patterns with prescribed intersection angles.
//!
//! The library generates isoradial (rhombic) circle patterns — square grid,
//! hexagonal, and quasicrystallic grid projections — solves the nonlinear
//! Dirichlet/Neumann boundary problems for the radius and angle functions,
//! realizes the resulting patterns in the plane, and measures how fast the
//! discrete data converges to a target conformal map under mesh refinement.
//! A discrete potential theory module provides the lattice Green's function
//! (contour integral and bounded-domain variants) together with the classical
//! identities and estimates used to validate it.

pub mod discrete;
pub mod graph;
pub mod green;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod layout;
pub mod linsolve;
pub mod solver;
pub mod svg;

/// Scalar type used by the concrete pipeline.
pub type Real = f64;
/// Complex scalar of the concrete pipeline.
pub type Complex = num_complex::Complex64;

/// Vertex index into a [`graph::BQuadGraph`].
pub type VertexId = usize;
/// Face index into a [`graph::BQuadGraph`].
pub type FaceId = usize;
/// Undirected edge index into a [`graph::BQuadGraph`].
pub type EdgeId = usize;
