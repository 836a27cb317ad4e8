//! Linear response: dipole correlation traces and their frequency-domain
//! counterparts (susceptibility, dielectric function, refractive index).
//!
//! The susceptibility is the half-line transform χ(ω) = i·s·∫₀^∞ e^(iωt) M(t) dt.
//! The retarded-response factor i puts the absorptive Lorentzian into Im χ,
//! so that a decaying phase M(t) = e^(−iε t − γt/2) produces an Im χ peak of
//! height 2s/γ at ω = ε and a passive (Im ε ≥ 0) dielectric function.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tail level below which a trace counts as decayed.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Time-domain dipole correlation function M(t) on a uniform grid.
#[derive(Debug, Clone)]
pub struct CorrelationTrace {
    /// Grid step in eV⁻¹.
    pub dt: f64,
    /// M(k·dt), k = 0..=n.
    pub values: Vec<Complex64>,
    /// Total squared dipole weight μ_tot² carried by the trace normalization.
    pub mu_tot_sq: f64,
    /// Probe planar wavevector (ħc-scaled, eV) the trace was computed at.
    pub kz: f64,
}

impl CorrelationTrace {
    /// Largest time on the grid.
    pub fn t_max(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.dt
    }

    /// |M(t_end)| / |M(0)|.
    pub fn relative_tail(&self) -> f64 {
        let head = self.values.first().map(|v| v.norm()).unwrap_or(0.0);
        let tail = self.values.last().map(|v| v.norm()).unwrap_or(0.0);
        if head == 0.0 {
            0.0
        } else {
            tail / head
        }
    }
}

/// What a spectrum's complex samples mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumRole {
    /// Susceptibility χ(ω).
    Susceptibility,
    /// Dielectric function ε(ω).
    Dielectric,
    /// Complex refractive index n(ω).
    RefractiveIndex,
}

/// Frequency-domain complex samples on a strictly increasing energy grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Energy grid in eV.
    pub omegas: Vec<f64>,
    /// χ, ε, or n samples per [`SpectrumRole`].
    pub values: Vec<Complex64>,
    /// Meaning of the samples.
    pub role: SpectrumRole,
    /// Set when a gain medium (Im ε < 0 beyond tolerance) was encountered.
    pub gain_flagged: bool,
}

impl Spectrum {
    /// Validated constructor: grid strictly increasing, values finite.
    pub fn new(omegas: Vec<f64>, values: Vec<Complex64>, role: SpectrumRole) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::data(format!(
                "grid/value length mismatch: {} vs {}",
                omegas.len(),
                values.len()
            )));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::data("energy grid must be strictly increasing".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("spectrum contains non-finite values".to_string()));
        }
        Ok(Self {
            omegas,
            values,
            role,
            gain_flagged: false,
        })
    }

    /// Linear interpolation at `omega`; errors outside the grid.
    pub fn sample(&self, omega: f64) -> Result<Complex64> {
        let first = *self.omegas.first().ok_or_else(|| Error::data("empty spectrum"))?;
        let last = *self.omegas.last().unwrap();
        if omega < first || omega > last {
            return Err(Error::data(format!(
                "energy {omega} outside tabulated range [{first}, {last}]"
            )));
        }
        let idx = match self
            .omegas
            .binary_search_by(|x| x.partial_cmp(&omega).unwrap())
        {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i,
        };
        let (x0, x1) = (self.omegas[idx - 1], self.omegas[idx]);
        let w = (omega - x0) / (x1 - x0);
        Ok(self.values[idx - 1] * (1.0 - w) + self.values[idx] * w)
    }
}

/// Susceptibility from a correlation trace with the default decayed-tail
/// tolerance.
pub fn susceptibility(trace: &CorrelationTrace, omegas: &[f64], scale: f64) -> Result<Spectrum> {
    susceptibility_with_tail_tol(trace, omegas, scale, DEFAULT_TAIL_TOL)
}

/// χ(ω) = i·scale·∫₀^T e^(iωt) M(t) dt by trapezoid on the trace grid.
///
/// Errors if the trace has not decayed below `tail_tol` relative to M(0);
/// truncating an undecayed trace rings through the whole spectrum.
pub fn susceptibility_with_tail_tol(
    trace: &CorrelationTrace,
    omegas: &[f64],
    scale: f64,
    tail_tol: f64,
) -> Result<Spectrum> {
    if trace.values.len() < 2 {
        return Err(Error::data("correlation trace needs at least two samples".to_string()));
    }
    let tail = trace.relative_tail();
    if tail >= tail_tol {
        return Err(Error::numerics(format!(
            "undecayed trace tail: |M(T)|/|M(0)| = {tail:.3e} ≥ {tail_tol:.1e} at T = {:.1} eV⁻¹",
            trace.t_max()
        )));
    }
    let dt = trace.dt;
    let n = trace.values.len();
    let values: Vec<Complex64> = omegas
        .iter()
        .map(|&w| {
            // phase recurrence instead of per-sample exp
            let step = Complex64::from_polar(1.0, w * dt);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = 0.5 * trace.values[0];
            for v in &trace.values[1..n - 1] {
                phase *= step;
                acc += v * phase;
            }
            phase *= step;
            acc += 0.5 * trace.values[n - 1] * phase;
            Complex64::new(0.0, scale) * acc * dt
        })
        .collect();
    Spectrum::new(omegas.to_vec(), values, SpectrumRole::Susceptibility)
}

/// ε(ω) = n_bg² + χ(ω); with n_bg = 1 this is the bare 1 + χ form.
pub fn dielectric(chi: &Spectrum, n_bg: Complex64) -> Result<Spectrum> {
    if chi.role != SpectrumRole::Susceptibility {
        return Err(Error::data(format!("dielectric() expects a χ spectrum, got {:?}", chi.role)));
    }
    let bg = n_bg * n_bg;
    let values = chi.values.iter().map(|&c| bg + c).collect();
    Spectrum::new(chi.omegas.clone(), values, SpectrumRole::Dielectric)
}

/// Im ε below this threshold flags a gain medium.
pub const GAIN_TOL: f64 = 1e-9;

/// n(ω) = √ε(ω) on the passive branch Im n ≥ 0.
///
/// The principal square root maps Im ε ≥ 0 into the first quadrant, which is
/// exactly the passive branch. Samples with Im ε < −GAIN_TOL set the gain
/// flag and keep the principal (Re n > 0) root.
pub fn refractive_index(eps: &Spectrum) -> Result<Spectrum> {
    if eps.role != SpectrumRole::Dielectric {
        return Err(Error::data(format!(
            "refractive_index() expects an ε spectrum, got {:?}",
            eps.role
        )));
    }
    let mut gain = false;
    let values: Vec<Complex64> = eps
        .values
        .iter()
        .map(|&e| {
            if e.im < -GAIN_TOL {
                gain = true;
            }
            let mut n = e.sqrt();
            if n.im < 0.0 && e.im >= -GAIN_TOL {
                // roundoff on the real axis: fold onto the passive branch
                n = Complex64::new(n.re, 0.0);
            }
            n
        })
        .collect();
    let mut spec = Spectrum::new(eps.omegas.clone(), values, SpectrumRole::RefractiveIndex)?;
    spec.gain_flagged = gain;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn damped_phase_trace(eps: f64, gamma: f64, dt: f64, t_max: f64) -> CorrelationTrace {
        let n = (t_max / dt).ceil() as usize;
        let values = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                Complex64::from_polar((-0.5 * gamma * t).exp(), -eps * t)
            })
            .collect();
        CorrelationTrace {
            dt,
            values,
            mu_tot_sq: 1.0,
            kz: 0.0,
        }
    }

    #[test]
    fn lorentzian_oracle() {
        // M(t) = e^{−iεt − γt/2} → χ = i/(γ/2 − i(ω−ε)) = −1/((ω−ε) + iγ/2)
        let (eps, gamma) = (2.0, 0.05);
        let trace = damped_phase_trace(eps, gamma, 0.002, 700.0);
        let omegas = grid(1.5, 2.5, 501);
        let chi = susceptibility(&trace, &omegas, 1.0).unwrap();
        let mut peak = (0.0f64, 0.0f64);
        for (w, v) in omegas.iter().zip(&chi.values) {
            let want = -Complex64::new(1.0, 0.0) / Complex64::new(w - eps, 0.5 * gamma);
            assert!((v - want).norm() < 2e-3 * want.norm().max(1.0), "ω = {w}");
            if v.im.abs() > peak.1 {
                peak = (*w, v.im.abs());
            }
        }
        // |Im χ| peaks at ε with height 2/γ
        assert_abs_diff_eq!(peak.0, eps, epsilon = 1e-9);
        assert_relative_eq!(peak.1, 2.0 / gamma, max_relative = 1e-3);
    }

    #[test]
    fn zero_trace_gives_zero_chi() {
        let trace = CorrelationTrace {
            dt: 0.1,
            values: vec![Complex64::new(0.0, 0.0); 100],
            mu_tot_sq: 0.0,
            kz: 0.0,
        };
        let chi = susceptibility(&trace, &grid(1.0, 2.0, 11), 1.0).unwrap();
        assert!(chi.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn scale_is_linear() {
        let trace = damped_phase_trace(2.0, 0.1, 0.01, 400.0);
        let omegas = grid(1.5, 2.5, 21);
        let one = susceptibility(&trace, &omegas, 1.0).unwrap();
        let two = susceptibility(&trace, &omegas, 2.0).unwrap();
        for (a, b) in one.values.iter().zip(&two.values) {
            assert!((2.0 * a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn undecayed_tail_is_an_error() {
        let trace = damped_phase_trace(2.0, 0.1, 0.01, 5.0);
        let err = susceptibility(&trace, &grid(1.5, 2.5, 5), 1.0);
        assert!(matches!(err, Err(Error::Numerics(_))));
    }

    #[test]
    fn dielectric_examples() {
        let omegas = grid(1.0, 2.0, 3);
        let zero_chi = Spectrum::new(
            omegas.clone(),
            vec![Complex64::new(0.0, 0.0); 3],
            SpectrumRole::Susceptibility,
        )
        .unwrap();
        let eps = dielectric(&zero_chi, Complex64::new(1.0, 0.0)).unwrap();
        assert!(eps.values.iter().all(|&e| e == Complex64::new(1.0, 0.0)));

        let n_bg = Complex64::new(1.5, 0.015).sqrt();
        let eps = dielectric(&zero_chi, n_bg).unwrap();
        for e in &eps.values {
            assert!((e - Complex64::new(1.5, 0.015)).norm() < 1e-14);
        }

        let chi = Spectrum::new(
            omegas,
            vec![Complex64::new(0.2, 0.1); 3],
            SpectrumRole::Susceptibility,
        )
        .unwrap();
        let eps = dielectric(&chi, Complex64::new(1.0, 0.0)).unwrap();
        assert!(eps.values.iter().all(|&e| (e - Complex64::new(1.2, 0.1)).norm() < 1e-15));
    }

    #[test]
    fn refractive_index_branch() {
        let omegas = grid(1.0, 3.0, 3);
        let eps = Spectrum::new(
            omegas,
            vec![
                Complex64::new(4.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.5, 0.015),
            ],
            SpectrumRole::Dielectric,
        )
        .unwrap();
        let n = refractive_index(&eps).unwrap();
        assert!((n.values[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((n.values[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((n.values[2] - Complex64::new(1.22476, 0.0061237)).norm() < 2e-5);
        assert!(!n.gain_flagged);
        // roundtrip n² = ε
        for (nv, ev) in n.values.iter().zip(&eps.values) {
            assert!((nv * nv - ev).norm() < 1e-12);
        }
    }

    #[test]
    fn gain_flag_set_for_negative_im_eps() {
        let eps = Spectrum::new(
            vec![1.0],
            vec![Complex64::new(2.0, -0.1)],
            SpectrumRole::Dielectric,
        )
        .unwrap();
        let n = refractive_index(&eps).unwrap();
        assert!(n.gain_flagged);
        assert!(n.values[0].re > 0.0);
    }

    #[test]
    fn role_mismatch_rejected() {
        let s = Spectrum::new(vec![1.0], vec![Complex64::new(1.0, 0.0)], SpectrumRole::Dielectric)
            .unwrap();
        assert!(dielectric(&s, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn halving_dt_converges() {
        let coarse = damped_phase_trace(2.0, 0.05, 0.004, 800.0);
        let fine = damped_phase_trace(2.0, 0.05, 0.002, 800.0);
        let omegas = grid(1.6, 2.4, 101);
        let a = susceptibility(&coarse, &omegas, 1.0).unwrap();
        let b = susceptibility(&fine, &omegas, 1.0).unwrap();
        let max_rel = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).norm() / y.norm().max(1e-12))
            .fold(0.0f64, f64::max);
        assert!(max_rel < 1e-4, "max relative change {max_rel}");
    }
}
