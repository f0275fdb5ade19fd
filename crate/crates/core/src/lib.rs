//! 2D transverse-magnetic discontinuous Galerkin solver for time-harmonic
//! Maxwell's equations in first-order form, with a residual a posteriori
//! error estimator, PML / total-field-scattered-field machinery, h- and
//! hp-adaptive refinement loops, and a modal sandbox for the companion
//! stability and regularity bounds on the square.
//!
//! In the TM reduction the electric field is an out-of-plane complex scalar
//! `E` and the magnetic field an in-plane complex 2-vector `H = (H1, H2)`,
//! with `curl E = (dE/dx2, -dE/dx1)` and `curl H = dH2/dx1 - dH1/dx2`.

pub mod basis;
pub mod mesh;

pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = num_complex::Complex64;
