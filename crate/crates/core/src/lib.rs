//! Finite element exterior calculus on simplicial complexes.
//!
//! Whitney forms and their degrees of freedom, exact polynomial differential
//! forms in barycentric coordinates, exact cohomology of cochain complexes,
//! and a metric layer for discrete Hodge theory over refinement families.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod cohomology;
pub mod error;
pub mod exact;
pub mod hodge;
pub mod polyform;
pub mod quadrature;
pub mod rational;
pub mod report;
pub mod simplicial;
pub mod whitney;

pub use error::{FeecError, Result};
pub use rational::Q;
pub use simplicial::{generate, AffineRealization, Mesh, MeshKind, Simplex, SimplicialComplex};
