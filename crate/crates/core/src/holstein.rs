//! Thin-film dipole correlation for a disordered ensemble of two-level
//! molecules, each coupled to its own vibrational bath through the excited
//! state projector (pure dephasing).
//!
//! The trace admits a closed form: Gaussian energetic disorder averages to
//! the characteristic function e^(−σ²t²/2), radiative damping contributes
//! e^(−γt/2), and the vibrational bath the lineshape factor e^(−g(t)), so
//!
//! ```text
//!   M(t) = exp(−i·ε_s·t − σ²t²/2 − γt/2 − g(t))
//! ```
//!
//! with g(t) the boundary-term-free lineshape function and ε_s the singlet
//! energy with the reorganization energy absorbed. With g = 0 the resulting
//! lineshape is a Voigt profile; the bath adds the asymmetric high-energy
//! broadening.

use num_complex::Complex64;

use crate::bath::{self, BathParams};
use crate::error::{Error, Result};
use crate::nmqsd::{Coupling, LinearOQSModel};
use crate::response::{self, CorrelationTrace, Spectrum};
use crate::tmm::{self, IndexModel, Layer, Polarization, Stack};

/// Thin-film model parameters.
#[derive(Debug, Clone)]
pub struct ThinFilmParams {
    /// Singlet energy in eV (reorganization energy absorbed).
    pub eps_s: f64,
    /// Gaussian disorder standard deviation in eV.
    pub sigma: f64,
    /// Radiative damping rate in eV.
    pub gamma: f64,
    /// Vibrational bath.
    pub bath: BathParams,
    /// Background refractive index.
    pub n_bg: Complex64,
    /// Susceptibility amplitude (dipole density and unit factors folded in).
    pub scale: f64,
}

impl ThinFilmParams {
    /// Validate ranges; σ of the same order as γ is allowed but the analytic
    /// disorder average assumes σ ≫ γ whenever both act.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(self.gamma >= 0.0) || !(self.scale >= 0.0) {
            return Err(Error::domain(
                "thin-film parameters sigma, gamma, scale must be ≥ 0".to_string(),
            ));
        }
        self.bath.validate()
    }

    /// True when the σ ≫ γ validity condition of the closed-form solution is
    /// comfortably met (or disorder is switched off entirely).
    pub fn closed_form_valid(&self) -> bool {
        self.sigma == 0.0 || self.sigma >= 10.0 * self.gamma
    }

    /// Packaged TDAF film defaults (fit results; amplitude calibrated to the
    /// measured film absorption level).
    pub fn fitted_tdaf() -> Self {
        Self {
            eps_s: 3.6,
            sigma: 0.14,
            gamma: 5e-5,
            bath: BathParams::superohmic_zero_t(1.0, 0.09).expect("valid bath"),
            n_bg: Complex64::new(1.5, 0.015).sqrt(),
            scale: TDAF_SCALE,
        }
    }
}

/// Default susceptibility amplitude for the packaged TDAF film, calibrated so
/// the 60 nm film reproduces the measured absorption band (peak position and
/// saturation level).
pub const TDAF_SCALE: f64 = 0.90;

/// Time horizon at which |M| has dropped below ~10⁻⁸ of M(0).
pub fn auto_t_max(params: &ThinFilmParams) -> Result<f64> {
    let target = (1e8f64).ln();
    if params.sigma > 0.0 {
        Ok((2.0 * target).sqrt() / params.sigma)
    } else if params.gamma > 0.0 {
        Ok(2.0 * target / params.gamma)
    } else {
        Err(Error::domain(
            "no decay channel: with σ = 0 and γ = 0 the trace never decays".to_string(),
        ))
    }
}

/// Closed-form thin-film dipole correlation trace on {k·dt}.
pub fn dipole_correlation_thin_film(
    params: &ThinFilmParams,
    dt: f64,
    t_max: f64,
) -> Result<CorrelationTrace> {
    params.validate()?;
    if !(dt > 0.0) || !(t_max >= dt) {
        return Err(Error::domain(format!("trace grid needs dt > 0, t_max ≥ dt (got {dt}, {t_max})")));
    }
    let decay = 0.5 * params.sigma * params.sigma * t_max * t_max + 0.5 * params.gamma * t_max;
    if params.sigma > 0.0 || params.gamma > 0.0 {
        if decay < (1e8f64).ln() {
            return Err(Error::domain(format!(
                "t_max = {t_max} eV⁻¹ leaves |M(t_max)| ≈ e^{{-{decay:.2}}} above the 1e-8 tail target"
            )));
        }
    }
    let n = (t_max / dt).ceil() as usize;
    let g = bath::lineshape_table(&params.bath, dt, n)?;
    let values: Vec<Complex64> = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let exponent = Complex64::new(
                -0.5 * params.sigma * params.sigma * t * t - 0.5 * params.gamma * t,
                -params.eps_s * t,
            ) - g[k];
            exponent.exp()
        })
        .collect();
    Ok(CorrelationTrace {
        dt,
        values,
        mu_tot_sq: 1.0,
        kz: 0.0,
    })
}

/// Default trace step for the thin-film pipeline.
pub const THIN_FILM_DT: f64 = 0.005;

/// n(ω) of the film: correlation trace → χ → ε → n.
pub fn thin_film_refractive_index(params: &ThinFilmParams, omegas: &[f64]) -> Result<Spectrum> {
    let t_max = auto_t_max(params)?;
    let trace = dipole_correlation_thin_film(params, THIN_FILM_DT, t_max)?;
    let chi = response::susceptibility(&trace, omegas, params.scale)?;
    let eps = response::dielectric(&chi, params.n_bg)?;
    response::refractive_index(&eps)
}

/// Film-on-substrate stack for the absorption measurement geometry.
pub fn thin_film_stack(
    params: &ThinFilmParams,
    thickness_nm: f64,
    substrate: IndexModel,
    omegas: &[f64],
) -> Result<Stack> {
    let n = thin_film_refractive_index(params, omegas)?;
    Stack::new(
        tmm::vacuum(),
        vec![Layer::finite(thickness_nm, IndexModel::Model(n))?],
        Layer::semi_infinite(substrate)?,
    )
}

/// A(E), R(E), T(E) of the film on its substrate.
pub fn thin_film_art(
    params: &ThinFilmParams,
    thickness_nm: f64,
    substrate: IndexModel,
    omegas: &[f64],
    theta_deg: f64,
    pol: Polarization,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let stack = thin_film_stack(params, thickness_nm, substrate, omegas)?;
    let mut a = Vec::with_capacity(omegas.len());
    let mut r = Vec::with_capacity(omegas.len());
    let mut t = Vec::with_capacity(omegas.len());
    for &e in omegas {
        let rt = tmm::reflect_transmit(&stack, e, theta_deg, pol)?;
        let abs = 1.0 - rt.big_r - rt.big_t;
        if abs < -1e-8 {
            return Err(Error::numerics(format!("negative absorption {abs:.3e} at {e} eV")));
        }
        a.push(abs);
        r.push(rt.big_r);
        t.push(rt.big_t);
    }
    Ok((a, r, t))
}

/// Single-molecule open-system model matching the closed form: one excited
/// level at ε_s + λ (the Hamiltonian carries the reorganization energy the
/// lineshape convention removed), damped at γ, coupled to the film bath.
pub fn single_molecule_model(params: &ThinFilmParams) -> Result<LinearOQSModel> {
    params.validate()?;
    let lambda = bath::reorganization_energy(&params.bath);
    LinearOQSModel::new(
        1,
        vec![Complex64::new(params.eps_s + lambda, 0.0)],
        vec![params.gamma],
        vec![Coupling {
            site: 0,
            bath: params.bath,
        }],
    )
}
