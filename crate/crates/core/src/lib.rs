//! Linear optical properties of organic thin films and microcavity polaritons.
//!
//! The pipeline runs in three stages:
//!
//! 1. a microscopic open-quantum-system model (a disordered molecular film, or
//!    molecules collectively coupled to dispersive cavity modes) is propagated
//!    as a single deterministic trajectory, yielding the dipole correlation
//!    function M(t);
//! 2. the half-line transform of M(t) gives the susceptibility, dielectric
//!    function, and complex refractive index;
//! 3. a transfer-matrix solver turns the refractive index into measurable
//!    reflectance/transmittance/absorption of the layered sample, with χ²
//!    fitting and Monte Carlo error propagation layered on top.
//!
//! Energies are in eV, times in eV⁻¹, lengths in nm (see [`units`]).

pub mod bath;
pub mod error;
pub mod exec;
pub mod fit;
pub mod holstein;
pub mod htc;
pub mod io;
pub mod materials;
pub mod nmqsd;
pub mod quad;
pub mod response;
pub mod tmm;
pub mod uncertainty;
pub mod units;

pub use error::{Error, Result};
