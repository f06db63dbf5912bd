//! Numerical geometry of the space of almost calibrated (1,1) forms on flat
//! complex tori.
//!
//! The pieces, bottom up:
//!
//! * [`pencil`] and [`wedge`]: pointwise algebra of the pencil (ω, α), with a
//!   brute-force wedge-product evaluator as an independent check.
//! * [`grid`]: periodic grids and the complex difference calculus.
//! * [`space`]: backgrounds, lifted phase, membership, metric, energy,
//!   length and the 𝒥 functional.
//! * [`solver`]: the ε-geodesic boundary value problem, solved by Newton
//!   continuation with a preconditioned Krylov inner solver.
//! * [`geometry`]: distances by ε → 0 extrapolation and the comparison
//!   inequalities built on them.
//! * [`curvature`]: Levi-Civita connection, curvature tensor and sectional
//!   curvature.

pub mod curvature;
pub mod error;
pub mod formula;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pencil;
pub mod sampling;
pub mod solver;
pub mod space;
pub mod wedge;

pub use error::{Error, Result};
pub use grid::{ScalarField, TorusGrid};
pub use linalg::{HermitianMatrix, C64};
pub use space::{Background, PathField, Pencil};
