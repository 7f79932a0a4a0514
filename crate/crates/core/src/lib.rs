//! Semiclassical asymptotics for the nonlocal nonlinear Schrödinger equation
//! with a non-Hermitian dissipative term
//!
//! ```text
//! {−iħ∂ₜ + H[Ψ] − iħΛ H̆[Ψ]} Ψ = 0
//! ```
//!
//! The leading term of a trajectory-concentrated solution is built from the
//! moment system ([`hesd`]), the associated linear equation and its Green's
//! function ([`alsed`]), and optionally dressed with ladder operators
//! ([`symmetry`]). [`direct_solver`] integrates the full equation on a grid as
//! an independent reference.

pub mod alsed;
pub mod atom_laser;
pub mod direct_solver;
pub mod error;
pub mod grid_analysis;
pub mod hesd;
pub mod ode;
pub mod phase_space;
pub mod symmetry;

pub use error::{Error, Result};
pub use num_complex::Complex64;
