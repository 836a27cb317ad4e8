//! Unit conventions and physical constants.
//!
//! The library works in natural units with ħ = 1. Energies are in eV, times
//! in eV⁻¹ (1 eV⁻¹ ≈ 0.6582 fs), lengths in nm. Planar wavevectors are stored
//! premultiplied by ħc, i.e. in eV, so that `kz · z` is dimensionless when
//! positions are stored in eV⁻¹ (nm / ħc).

/// ħc in eV·nm (CODATA).
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;

/// One eV⁻¹ of time expressed in femtoseconds.
pub const EV_INV_TIME_FS: f64 = 0.658_211_956_9;

/// Inverse temperature at 300 K, in eV⁻¹.
pub const BETA_ROOM_EV_INV: f64 = 1.0 / 0.0259;

/// Convert a length in nm to the ħc-scaled length unit (eV⁻¹).
pub fn nm_to_inverse_ev(z_nm: f64) -> f64 {
    z_nm / HBAR_C_EV_NM
}

/// Planar wavevector component (in eV, ħc-scaled) of light with the given
/// photon energy hitting the structure from vacuum at `theta_deg`.
pub fn kz_from_angle(energy_ev: f64, theta_deg: f64) -> f64 {
    energy_ev * theta_deg.to_radians().sin()
}

/// Inverse temperature, with an explicit zero-temperature variant so that
/// coth(βω/2) never has to be evaluated with an overflowing β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    /// Zero temperature (β → ∞).
    Infinite,
    /// Finite inverse temperature in eV⁻¹.
    Finite(f64),
}

impl Beta {
    /// True for the zero-temperature sentinel.
    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// β in eV⁻¹, or `None` at zero temperature.
    pub fn value(&self) -> Option<f64> {
        match self {
            Beta::Infinite => None,
            Beta::Finite(b) => Some(*b),
        }
    }
}
