//! Mixed virtual element discretisation of the Zener (standard linear solid)
//! viscoelasticity model on polygonal meshes.
//!
//! The unknowns are two stress fields (Maxwell branch `σ₀`, parallel spring
//! `σ₁`), the velocity and a weakly imposed rotation. Stresses live in an
//! H(div)-conforming virtual element space; velocity and rotation are
//! discontinuous polynomials. Time stepping is Crank–Nicolson.
//!
//! Module map:
//!
//! * [`mesh`]: polygonal meshes, generators, geometry and text I/O.
//! * [`polybase`]: scaled monomials, quadrature, Gram matrices and the
//!   gradient / complement split of tensor polynomials.
//! * [`vspace`]: DoF layout, interpolation and the computable per-cell
//!   operators (discrete divergence, L² projector, stabilisation).
//! * [`assemble`]: material model, local and global block operators,
//!   load vector, essential conditions, sparse direct solves.
//! * [`timeloop`]: Crank–Nicolson integration and energy diagnostics.
//! * [`mms`]: manufactured solutions, error norms, convergence studies and
//!   the marker experiment.

pub mod assemble;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod polybase;
pub mod timeloop;
pub mod vspace;

pub use error::{Result, VemError};

/// 2D point / vector type used throughout.
pub type Point = nalgebra::Vector2<f64>;
/// 2×2 tensor type used throughout.
pub type Tensor = nalgebra::Matrix2<f64>;
