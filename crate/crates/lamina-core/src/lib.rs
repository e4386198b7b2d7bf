//! Numerical toolkit for the hierarchy of thin-plate elastic energies under a
//! constant pressure live load.
//!
//! The crate covers four layers of the theory:
//!
//! * exact small-scale quadratic reductions: `Q_2`, the pressure-augmented
//!   `Q_2^pi`, the linear operator `L`, the constants `kappa` and `m_pi`
//!   ([`reduce`]);
//! * discretized 2D limit functionals (von Karman with and without pressure,
//!   linearized variants, bending on cylinder isometries) and their
//!   minimization ([`plate`]);
//! * the discretized 3D rescaled energy on a thin slab, recovery-sequence
//!   constructors and the thickness-sweep harness ([`film`]);
//! * the membrane-regime worked example: the relaxed planar density, its
//!   radial profile and the 1D convex envelope that settles the additive
//!   pressure constant ([`membrane`]).
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals go
//! through `libm`. IO, CLI and file formats live in the companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub(crate) mod fmath;

pub mod algebra;
pub mod density;
pub mod film;
pub mod membrane;
pub mod optim;
pub mod plate;
pub mod reduce;

pub use algebra::{Mat2Sym, Mat3, Vec2, Vec3};
pub use density::DensityModel;
pub use reduce::{PressureReduction, QuadForm2, QuadForm3};
