//! Steady incompressible flow in a planar annulus with prescribed boundary
//! velocity and nonzero flux through the inner circle.
//!
//! The crate provides a Chebyshev–Fourier polar grid, velocity and scalar
//! fields, boundary traces and their solenoidal extensions, Stokes and
//! Navier–Stokes solvers along the convection homotopy, closed-form
//! reference flows, and diagnostics for the blow-up limit.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod boundary;
mod collocation;
mod krylov;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod navier_stokes;
pub mod oracle;
pub mod stokes;

pub use boundary::{BoundarySpec, BoundaryTrace};
pub use error::{Error, Result};
pub use fields::{ScalarField, VelocityField};
pub use grid::PolarGrid;
pub use diagnostics::DiagnosticsRecord;
pub use navier_stokes::{FlowProblem, Method, SolveReport, SolverConfig};
