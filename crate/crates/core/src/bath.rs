//! Vibrational bath: superohmic spectral density, bath correlation functions,
//! lineshape function, and tabulated memory-kernel integrals.
//!
//! The spectral density is J(ω) = a·ωᵘ/ξᵘ⁻¹·e^(−ω/ξ) with integer exponent u
//! (u = 3 throughout the shipped defaults). The zero-temperature correlation
//! function is the half-line Fourier transform of J; at finite temperature the
//! cosine term acquires a coth(βω/2) factor, which is evaluated here as the
//! zero-temperature part plus a Bose-occupation correction so that the
//! imaginary part is identical at all temperatures.
//!
//! All quadratures are adaptive Gauss–Kronrod. For times beyond a couple of
//! cutoff periods the zero-temperature transform is evaluated on the rotated
//! contour ω → −is, where the integrand decays like e^(−st) instead of
//! oscillating; J is entire, so the rotation is exact.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::units::Beta;

/// Spectral density parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// Dimensionless coupling amplitude.
    pub a: f64,
    /// Superohmic exponent (positive integer).
    pub u: u32,
    /// Cutoff energy in eV.
    pub xi: f64,
    /// Inverse temperature.
    pub beta: Beta,
}

impl BathParams {
    /// Validated constructor.
    pub fn new(a: f64, u: u32, xi: f64, beta: Beta) -> Result<Self> {
        let p = Self { a, u, xi, beta };
        p.validate()?;
        Ok(p)
    }

    /// Superohmic u = 3 bath at zero temperature.
    pub fn superohmic_zero_t(a: f64, xi: f64) -> Result<Self> {
        Self::new(a, 3, xi, Beta::Infinite)
    }

    /// Check the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) {
            return Err(Error::domain(format!("bath amplitude a = {} must be ≥ 0", self.a)));
        }
        if self.u < 1 || self.u > 20 {
            return Err(Error::domain(format!("bath exponent u = {} outside [1, 20]", self.u)));
        }
        if !(self.xi > 0.0) {
            return Err(Error::domain(format!("bath cutoff xi = {} must be > 0", self.xi)));
        }
        if let Beta::Finite(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::domain(format!("inverse temperature beta = {b} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Γ(u) for integer u, i.e. (u−1)!.
fn gamma_int(u: u32) -> f64 {
    (1..u).map(|k| k as f64).product()
}

/// Superohmic spectral density J(ω) = a·ωᵘ/ξᵘ⁻¹·e^(−ω/ξ), in eV.
pub fn spectral_density(params: &BathParams, omega: f64) -> Result<f64> {
    params.validate()?;
    if omega < 0.0 {
        return Err(Error::domain(format!("spectral density needs ω ≥ 0, got {omega}")));
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let x = omega / params.xi;
    Ok(params.a * params.xi * x.powi(params.u as i32) * (-x).exp())
}

/// Reorganization energy λ = ∫₀^∞ J(ω)/ω dω = a·ξ·Γ(u), in eV.
pub fn reorganization_energy(params: &BathParams) -> f64 {
    params.a * params.xi * gamma_int(params.u)
}

/// (−i)^k for the contour rotation.
fn minus_i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

const BCF_REL_TOL: f64 = 1e-10;

/// Zero-temperature bath correlation function α₀(t) = ∫₀^∞ J(ω) e^(−iωt) dω, in eV².
pub fn bcf_zero_temperature(params: &BathParams, t: f64) -> Result<Complex64> {
    params.validate()?;
    if t < 0.0 {
        return Err(Error::domain(format!("BCF needs t ≥ 0, got {t}")));
    }
    if params.a == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (a, u, xi) = (params.a, params.u, params.xi);
    let x_cut = 45.0 + 5.0 * u as f64;
    if xi * t <= 2.0 {
        // real axis, substituting x = ω/ξ: a ξ² ∫ xᵘ e^(−x) e^(−i x ξt) dx
        let phase_rate = xi * t;
        let panels = quad::oscillation_panels(0.0, x_cut, phase_rate.max(0.5));
        let r = quad::adaptive_panels(
            |x| {
                let env = x.powi(u as i32) * (-x).exp();
                Complex64::from_polar(env, -x * phase_rate)
            },
            &panels,
            BCF_REL_TOL,
            0.0,
        )?;
        Ok(a * xi * xi * r.value)
    } else {
        // rotated contour ω = −is: a/ξᵘ⁻¹ · (−i)ᵘ⁺¹ ∫ sᵘ e^(−st) e^(is/ξ) ds
        let s_cut = x_cut / t;
        let panels = quad::oscillation_panels(0.0, s_cut, 1.0 / xi);
        let r = quad::adaptive_panels(
            |s| {
                let env = s.powi(u as i32) * (-s * t).exp();
                Complex64::from_polar(env, s / xi)
            },
            &panels,
            BCF_REL_TOL,
            0.0,
        )?;
        Ok(a / xi.powi(u as i32 - 1) * minus_i_pow(u + 1) * r.value)
    }
}

/// ωᵘ · n_β(ω) with the Bose factor n_β = 1/(e^(βω) − 1), series-expanded near
/// ω = 0 where expm1 loses the leading power.
fn bose_weight(omega: f64, u: u32, beta: f64) -> f64 {
    let bw = beta * omega;
    if bw < 1e-8 {
        omega.powi(u as i32 - 1) / beta * (1.0 - 0.5 * bw + bw * bw / 12.0)
    } else {
        omega.powi(u as i32) / (bw.exp_m1())
    }
}

/// Finite-temperature BCF, Eq.-level form ∫ J(ω)[coth(βω/2)cos ωt − i sin ωt] dω,
/// evaluated as α₀(t) + 2∫ J(ω) n_β(ω) cos(ωt) dω. The imaginary part is exactly
/// the zero-temperature one.
pub fn bcf_finite_temperature(params: &BathParams, t: f64) -> Result<Complex64> {
    params.validate()?;
    let beta = params
        .beta
        .value()
        .ok_or_else(|| Error::domain("finite-temperature BCF called with β = ∞".to_string()))?;
    if t < 0.0 {
        return Err(Error::domain(format!("BCF needs t ≥ 0, got {t}")));
    }
    let zero_t = bcf_zero_temperature(params, t)?;
    if params.a == 0.0 {
        return Ok(zero_t);
    }
    let (a, u, xi) = (params.a, params.u, params.xi);

    // The thermal envelope ωᵘ e^(−ω/ξ) n_β decays at rate 1/ξ + β once βω ≳ 1;
    // two fixed-point steps on the log give a safe cutoff.
    let rate = 1.0 / xi + beta;
    let mut w_cut = (45.0 + 5.0 * u as f64) / rate;
    for _ in 0..2 {
        w_cut = ((45.0 + 5.0 * u as f64) + u as f64 * w_cut.max(1e-12).ln().max(-20.0)) / rate;
    }
    let w_cut = w_cut.max(10.0 * xi / rate / xi).min((45.0 + 5.0 * u as f64) * xi);
    if w_cut <= 0.0 {
        return Ok(zero_t);
    }
    let panels = quad::oscillation_panels(0.0, w_cut, t.max(1.0 / w_cut));
    let thermal = quad::adaptive_panels(
        |w| {
            let env = bose_weight(w, u, beta) * (-w / xi).exp();
            Complex64::new(env * (w * t).cos(), 0.0)
        },
        &panels,
        1e-9,
        1e-18,
    )?;
    Ok(zero_t + 2.0 * a / xi.powi(u as i32 - 1) * thermal.value)
}

/// BCF at the temperature carried by the parameters.
pub fn bcf(params: &BathParams, t: f64) -> Result<Complex64> {
    match params.beta {
        Beta::Infinite => bcf_zero_temperature(params, t),
        Beta::Finite(_) => bcf_finite_temperature(params, t),
    }
}

/// Tabulated bath correlation function on a uniform time grid.
#[derive(Debug, Clone)]
pub struct BathKernel {
    /// Grid step in eV⁻¹.
    pub dt: f64,
    /// α(k·dt) for k = 0..=n.
    pub values: Vec<Complex64>,
    /// Parameters the table was built from.
    pub params: BathParams,
}

impl BathKernel {
    /// Tabulate α on {k·dt}, k = 0..=ceil(t_max/dt).
    pub fn tabulate(params: &BathParams, dt: f64, t_max: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0) || !(t_max > 0.0) {
            return Err(Error::domain(format!("kernel grid needs dt > 0, t_max > 0 (got {dt}, {t_max})")));
        }
        let n = (t_max / dt).ceil() as usize;
        let mut values = Vec::with_capacity(n + 1);
        for k in 0..=n {
            values.push(bcf(params, k as f64 * dt)?);
        }
        Ok(Self {
            dt,
            values,
            params: *params,
        })
    }

    /// Largest tabulated time.
    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

/// Cumulative ∫₀^(k·dt) f(τ)·e^(iδτ) dτ by per-interval Simpson, with `f`
/// supplied on the half-step grid (index j ↔ τ = j·dt/2).
pub fn cumulative_weighted_integral(
    half_grid: &[Complex64],
    dt: f64,
    delta: f64,
) -> Vec<Complex64> {
    assert!(half_grid.len() % 2 == 1, "half-step grid must have odd length");
    let n = half_grid.len() / 2;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    out.push(acc);
    let h = 0.5 * dt;
    for k in 0..n {
        let t0 = (2 * k) as f64 * h;
        let f0 = half_grid[2 * k] * Complex64::from_polar(1.0, delta * t0);
        let f1 = half_grid[2 * k + 1] * Complex64::from_polar(1.0, delta * (t0 + h));
        let f2 = half_grid[2 * k + 2] * Complex64::from_polar(1.0, delta * (t0 + 2.0 * h));
        acc += dt / 6.0 * (f0 + 4.0 * f1 + f2);
        out.push(acc);
    }
    out
}

/// Memory-kernel table G_Δ(t_k) = ∫₀^(t_k) α(τ)·e^(iΔτ) dτ on {k·dt}.
pub fn memory_kernel_table(
    params: &BathParams,
    delta: f64,
    t_max: f64,
    dt: f64,
) -> Result<Vec<Complex64>> {
    let half = BathKernel::tabulate(params, 0.5 * dt, t_max)?;
    let n = (t_max / dt).ceil() as usize;
    let needed = 2 * n + 1;
    let mut grid = half.values;
    while grid.len() < needed {
        grid.push(bcf(params, (grid.len() as f64) * 0.5 * dt)?);
    }
    grid.truncate(needed);
    Ok(cumulative_weighted_integral(&grid, dt, delta))
}

/// Lineshape function g(t) = ∫₀^t (t−τ)·α(τ) dτ + iλt, dimensionless.
///
/// The +iλt term removes the reorganization-energy linear phase; the singlet
/// energy parameter elsewhere in the crate is understood to have absorbed λ.
pub fn lineshape_g(params: &BathParams, t: f64) -> Result<Complex64> {
    params.validate()?;
    if t < 0.0 {
        return Err(Error::domain(format!("lineshape needs t ≥ 0, got {t}")));
    }
    if t == 0.0 || params.a == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let table = lineshape_table(params, t / 400.0, 400)?;
    Ok(table[400])
}

/// g(t) on the uniform grid {k·dt}, k = 0..=n_steps.
///
/// Uses the identity g(t) = t·∫₀^t α − ∫₀^t τ·α(τ) dτ + iλt with both
/// cumulants advanced by Simpson on a half-step tabulation of α.
pub fn lineshape_table(params: &BathParams, dt: f64, n_steps: usize) -> Result<Vec<Complex64>> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::domain(format!("lineshape grid needs dt > 0, got {dt}")));
    }
    let lambda = reorganization_energy(params);
    if params.a == 0.0 {
        return Ok((0..=n_steps).map(|_| Complex64::new(0.0, 0.0)).collect());
    }
    let half = BathKernel::tabulate(params, 0.5 * dt, n_steps as f64 * dt + 0.5 * dt)?;
    let alpha = &half.values;
    let h = 0.5 * dt;
    let mut a_cum = Complex64::new(0.0, 0.0); // ∫ α
    let mut b_cum = Complex64::new(0.0, 0.0); // ∫ τ α
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(Complex64::new(0.0, 0.0));
    for k in 0..n_steps {
        let t0 = (2 * k) as f64 * h;
        let (f0, f1, f2) = (alpha[2 * k], alpha[2 * k + 1], alpha[2 * k + 2]);
        a_cum += dt / 6.0 * (f0 + 4.0 * f1 + f2);
        b_cum += dt / 6.0 * (t0 * f0 + 4.0 * (t0 + h) * f1 + (t0 + 2.0 * h) * f2);
        let t = t0 + 2.0 * h;
        out.push(t * a_cum - b_cum + Complex64::new(0.0, lambda * t));
    }
    Ok(out)
}
