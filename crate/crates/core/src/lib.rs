//! Finite-volume solver for the 2D incompressible Navier-Stokes equations in
//! stream function-vorticity form, together with a POD-Galerkin reduced
//! order model built on top of it.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats, wall-clock timing and the command
//! line live in the companion `sfrom` crate.
//!
//! Layout:
//!
//! * [`grid`]: uniform Cartesian grid, cell-centered fields, discrete L² pairing.
//! * [`linalg`]: CSR matrices with CG/BiCGStab, dense LU and a Jacobi eigensolver.
//! * [`fv`]: finite-volume Laplacians, face fluxes and the convection-diffusion operator.
//! * [`fom`]: BDF1 segregated full-order time stepping, vortex-merger setup.
//! * [`pod`]: method-of-snapshots POD.
//! * [`rom`]: Galerkin projection of the FV operators and the online stepper.
//! * [`metrics`]: relative L² and enstrophy errors.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod clock;
pub mod error;
pub mod fom;
pub mod fv;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod pod;
pub mod rom;

pub use clock::{Clock, NoClock};
pub use error::{Error, Result};
pub use grid::{FieldKind, ScalarField, StructuredGrid};
