//! Numerical laboratory for flat standing-sphere blow-up in the semilinear
//! heat equation `u_t = Δu + |u|^{p-1} u`.
//!
//! The crate provides, around the radius-one sphere:
//! exact Hermite algebra over the Gaussian weight `rho_1` ([`poly`], [`quad`]),
//! the corrected flat profile and its structural functions ([`profile`]),
//! time integration in physical and self-similar variables ([`solver`]),
//! spectral modulation analysis and shrinking-set monitoring ([`modulation`]),
//! a six-parameter shooting search over initial data ([`shooting`]),
//! and an asymptotic-expansion verifier ([`verify`]).

pub mod error;
pub mod interp;
pub mod modulation;
pub mod poly;
pub mod profile;
pub mod quad;
pub mod shooting;
pub mod solver;
pub mod verify;

pub use error::{CoreError, Result};
