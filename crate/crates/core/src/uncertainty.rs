//! Monte Carlo propagation of input-parameter deviations to reflectivity and
//! polariton-peak-location error bars.
//!
//! Per sample, independent normal perturbations are drawn for the probe
//! energy, the probe angle, the effective-layer thickness, and the real and
//! imaginary parts of the computed refractive index; the index deviation
//! decays with energy as σ_n(ω) = σ_n·e^(−(ω−ω₀)/2) with ω₀ the lowest grid
//! energy. Every sample owns a counter-derived RNG stream, so scheduling and
//! worker count cannot perturb the draws, and the reduction runs in sample
//! order: fixed seed ⇒ bit-identical output.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::fit::{two_deepest_minima, Curve};
use crate::response::Spectrum;
use crate::tmm::{self, IndexModel, Layer, Polarization, Stack};

/// Standard deviations of the input quantities.
#[derive(Debug, Clone, Copy)]
pub struct McDeviations {
    /// Probe energy std, eV.
    pub sigma_e: f64,
    /// Probe angle std, degrees.
    pub sigma_theta: f64,
    /// Effective-layer thickness std, nm.
    pub sigma_d: f64,
    /// Index deviation amplitude at ω₀ (applied to Re n and Im n separately).
    pub sigma_n_amp: f64,
    /// Anchor of the e^(−(ω−ω₀)/2) decay; the lowest grid energy.
    pub omega0: f64,
    /// Sample count.
    pub n_samples: usize,
    /// RNG seed.
    pub seed: u64,
}

impl McDeviations {
    /// Shipped defaults (σ_E = 10⁻⁶ eV, σ_θ = 0.001°, σ_d = 1 nm,
    /// σ_n = 10⁻²) anchored at the given lowest grid energy.
    pub fn defaults(omega0: f64) -> Self {
        Self {
            sigma_e: 1e-6,
            sigma_theta: 1e-3,
            sigma_d: 1.0,
            sigma_n_amp: 1e-2,
            omega0,
            n_samples: 200,
            seed: 0,
        }
    }

    /// σ_n at energy ω.
    pub fn sigma_n(&self, omega: f64) -> f64 {
        self.sigma_n_amp * (-(omega - self.omega0) / 2.0).exp()
    }

    fn validate(&self) -> Result<()> {
        if self.sigma_e < 0.0 || self.sigma_theta < 0.0 || self.sigma_d < 0.0 || self.sigma_n_amp < 0.0
        {
            return Err(Error::domain("deviations must be ≥ 0".to_string()));
        }
        if self.n_samples < 2 {
            return Err(Error::domain("need at least two Monte Carlo samples".to_string()));
        }
        Ok(())
    }
}

/// A stack whose first layer carries the perturbable computed index.
#[derive(Debug, Clone)]
pub struct PerturbableStack {
    /// Computed index of the front (effective) layer on the energy grid.
    pub index: Spectrum,
    /// Front-layer thickness, nm.
    pub thickness_nm: f64,
    /// Layers behind the front layer.
    pub back_layers: Vec<Layer>,
    /// Exit half-space.
    pub substrate: Layer,
}

impl PerturbableStack {
    /// Split an existing stack: layer 0 must carry a model-derived index.
    pub fn from_stack(stack: &Stack) -> Result<Self> {
        let front = stack
            .layers
            .first()
            .ok_or_else(|| Error::invalid_model("stack has no perturbable front layer".to_string()))?;
        let index = match &front.index {
            IndexModel::Model(s) => s.clone(),
            _ => {
                return Err(Error::invalid_model(
                    "front layer must carry a computed index spectrum".to_string(),
                ))
            }
        };
        let thickness_nm = match front.thickness {
            tmm::Thickness::Finite(d) => d,
            tmm::Thickness::SemiInfinite => unreachable!("stacks validate interior layers"),
        };
        Ok(Self {
            index,
            thickness_nm,
            back_layers: stack.layers[1..].to_vec(),
            substrate: stack.substrate.clone(),
        })
    }

    fn build(&self, d_offset_nm: f64, index: Spectrum) -> Result<Stack> {
        let d = (self.thickness_nm + d_offset_nm).max(0.1);
        let mut layers = vec![Layer {
            thickness: tmm::Thickness::Finite(d),
            index: IndexModel::Model(index),
        }];
        layers.extend(self.back_layers.iter().cloned());
        Stack::new(tmm::vacuum(), layers, self.substrate.clone())
    }
}

fn sample_rng(seed: u64, sample: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

/// One perturbed evaluation of every (E, θ) grid point.
///
/// Draw order per sample: δd; then δθ per angle; then per energy point
/// (δE, δn_re, δn_im). The index noise realization is shared by all angles
/// within the sample (the computed-index error is a property of the curve).
fn perturbed_maps(
    stacks: &[PerturbableStack],
    energies: &[f64],
    thetas_deg: &[f64],
    dev: &McDeviations,
    sample: usize,
    pol: Polarization,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = sample_rng(dev.seed, sample);
    let normal = |rng: &mut ChaCha12Rng| -> f64 { rng.sample(StandardNormal) };

    let d_d = dev.sigma_d * normal(&mut rng);
    let d_theta: Vec<f64> = thetas_deg
        .iter()
        .map(|_| dev.sigma_theta * normal(&mut rng))
        .collect();
    let ne = energies.len();
    let mut d_e = Vec::with_capacity(ne);
    let mut d_n = Vec::with_capacity(ne);
    for &w in energies {
        d_e.push(dev.sigma_e * normal(&mut rng));
        let s = dev.sigma_n(w);
        d_n.push(Complex64::new(s * normal(&mut rng), s * normal(&mut rng)));
    }

    let (e_lo, e_hi) = (energies[0], energies[ne - 1]);
    let mut out = vec![vec![0.0f64; thetas_deg.len()]; ne];
    for (ti, (&theta, stack)) in thetas_deg.iter().zip(stacks).enumerate() {
        let theta_s = (theta + d_theta[ti]).clamp(0.0, 89.999);
        let mut spec = stack.index.clone();
        for (v, dn) in spec.values.iter_mut().zip(&d_n) {
            *v += dn;
        }
        // perturbed Im n may dip below zero; that is a sampled hypothesis, not
        // a modeling bug, so mark the spectrum accordingly
        spec.gain_flagged = true;
        let built = stack.build(d_d, spec)?;
        for (ei, &e) in energies.iter().enumerate() {
            let e_s = (e + d_e[ei]).clamp(e_lo, e_hi);
            let rt = tmm::reflect_transmit(&built, e_s, theta_s, pol)?;
            out[ei][ti] = rt.big_r;
        }
    }
    Ok(out)
}

/// Per-point mean and standard deviation of R over the samples.
#[derive(Debug, Clone)]
pub struct McErrorMap {
    /// Energy grid, eV.
    pub energies: Vec<f64>,
    /// Angle grid, degrees.
    pub thetas_deg: Vec<f64>,
    /// Sample mean of R.
    pub mean: Vec<Vec<f64>>,
    /// Sample standard deviation of R ((n−1) denominator).
    pub std: Vec<Vec<f64>>,
}

/// All per-sample maps, in sample order.
pub fn mc_samples(
    stacks: &[PerturbableStack],
    energies: &[f64],
    thetas_deg: &[f64],
    dev: &McDeviations,
    pol: Polarization,
) -> Result<Vec<Vec<Vec<f64>>>> {
    dev.validate()?;
    if stacks.len() != thetas_deg.len() {
        return Err(Error::invalid_model("one stack per angle required".to_string()));
    }
    exec::map_indexed(dev.n_samples, |s| {
        perturbed_maps(stacks, energies, thetas_deg, dev, s, pol)
    })
    .into_iter()
    .collect()
}

/// Monte Carlo standard deviation of the reflectivity over the grid.
pub fn mc_reflectivity_error(
    stacks: &[PerturbableStack],
    energies: &[f64],
    thetas_deg: &[f64],
    dev: &McDeviations,
    pol: Polarization,
) -> Result<McErrorMap> {
    let samples = mc_samples(stacks, energies, thetas_deg, dev, pol)?;
    let ne = energies.len();
    let nt = thetas_deg.len();
    // Welford accumulators, merged in fixed sample order
    let mut mean = vec![vec![0.0f64; nt]; ne];
    let mut m2 = vec![vec![0.0f64; nt]; ne];
    for (k, map) in samples.iter().enumerate() {
        let n = (k + 1) as f64;
        for ei in 0..ne {
            for ti in 0..nt {
                let x = map[ei][ti];
                let d = x - mean[ei][ti];
                mean[ei][ti] += d / n;
                m2[ei][ti] += d * (x - mean[ei][ti]);
            }
        }
    }
    let denom = (dev.n_samples - 1) as f64;
    let std = m2
        .iter()
        .map(|row| row.iter().map(|v| (v / denom).sqrt()).collect())
        .collect();
    Ok(McErrorMap {
        energies: energies.to_vec(),
        thetas_deg: thetas_deg.to_vec(),
        mean,
        std,
    })
}

/// Polariton dip statistics at one angle.
#[derive(Debug, Clone, Copy)]
pub struct PeakError {
    /// Angle, degrees.
    pub theta_deg: f64,
    /// Mean LP dip position over valid samples, eV.
    pub e_lp: f64,
    /// Mean UP dip position, eV.
    pub e_up: f64,
    /// Shared position error bar: √((Var E_LP + Var E_UP)/2).
    pub err: f64,
    /// Samples where both dips were resolved.
    pub n_valid: usize,
    /// Set when more than 20 % of samples lost a dip.
    pub flagged: bool,
}

/// Per-angle polariton dip positions with Monte Carlo error bars: per sample
/// the dips are re-found, and the x-axis bar is the square root of the
/// averaged LP/UP position variances.
pub fn peak_location_error(
    stacks: &[PerturbableStack],
    energies: &[f64],
    thetas_deg: &[f64],
    dev: &McDeviations,
    pol: Polarization,
) -> Result<Vec<PeakError>> {
    let samples = mc_samples(stacks, energies, thetas_deg, dev, pol)?;
    let mut out = Vec::with_capacity(thetas_deg.len());
    for (ti, &theta) in thetas_deg.iter().enumerate() {
        let mut lp = Vec::new();
        let mut up = Vec::new();
        for map in &samples {
            let curve = Curve {
                x: energies.to_vec(),
                y: map.iter().map(|row| row[ti]).collect(),
            };
            let minima = two_deepest_minima(&curve);
            if minima.len() == 2 {
                lp.push(minima[0].position);
                up.push(minima[1].position);
            }
        }
        let n_valid = lp.len();
        if n_valid < 2 {
            return Err(Error::numerics(format!(
                "dips unresolved in nearly all samples at θ = {theta}°"
            )));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        let (m_lp, m_up) = (mean(&lp), mean(&up));
        let err = (0.5 * (var(&lp, m_lp) + var(&up, m_up))).sqrt();
        out.push(PeakError {
            theta_deg: theta,
            e_lp: m_lp,
            e_up: m_up,
            err,
            n_valid,
            flagged: (n_valid as f64) < 0.8 * dev.n_samples as f64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::SpectrumRole;
    use approx::assert_abs_diff_eq;

    fn flat_index_stack(n: Complex64, d_nm: f64, energies: &[f64]) -> PerturbableStack {
        let spec = Spectrum::new(
            energies.to_vec(),
            vec![n; energies.len()],
            SpectrumRole::RefractiveIndex,
        )
        .unwrap();
        PerturbableStack {
            index: spec,
            thickness_nm: d_nm,
            back_layers: vec![],
            substrate: Layer::semi_infinite(IndexModel::Constant(Complex64::new(1.46, 0.0)))
                .unwrap(),
        }
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn zero_deviations_give_zero_std() {
        let energies = grid(2.2, 4.0, 20);
        let stack = flat_index_stack(Complex64::new(1.7, 0.0), 90.0, &energies);
        let mut dev = McDeviations::defaults(2.2);
        dev.sigma_e = 0.0;
        dev.sigma_theta = 0.0;
        dev.sigma_d = 0.0;
        dev.sigma_n_amp = 0.0;
        dev.n_samples = 10;
        let out =
            mc_reflectivity_error(&[stack], &energies, &[15.0], &dev, Polarization::S).unwrap();
        for row in &out.std {
            assert_eq!(row[0], 0.0);
        }
    }

    #[test]
    fn thickness_only_matches_finite_difference() {
        // lossless film: std ≈ |∂R/∂d|·σ_d for small σ_d
        let energies = grid(2.9, 3.1, 3);
        let stack = flat_index_stack(Complex64::new(1.9, 0.0), 80.0, &energies);
        let mut dev = McDeviations::defaults(2.9);
        dev.sigma_e = 0.0;
        dev.sigma_theta = 0.0;
        dev.sigma_n_amp = 0.0;
        dev.sigma_d = 0.05;
        dev.n_samples = 4000;
        let out =
            mc_reflectivity_error(&[stack.clone()], &energies, &[15.0], &dev, Polarization::S)
                .unwrap();
        // finite-difference slope at the base thickness
        let r_at = |d: f64| {
            let built = stack.build(d - stack.thickness_nm, stack.index.clone()).unwrap();
            tmm::reflect_transmit(&built, energies[1], 15.0, Polarization::S)
                .unwrap()
                .big_r
        };
        let slope = (r_at(80.0 + 0.01) - r_at(80.0 - 0.01)) / 0.02;
        let want = slope.abs() * dev.sigma_d;
        let got = out.std[1][0];
        assert!(
            (got - want).abs() <= 0.15 * want,
            "std {got} vs linearized {want}"
        );
    }

    #[test]
    fn index_noise_decays_with_energy() {
        // opaque layer: R depends on the surface index only, so the std
        // profile follows σ_n(ω) = σ_n·e^{−(ω−ω₀)/2}
        let energies = grid(2.0, 6.0, 5);
        let stack = flat_index_stack(Complex64::new(1.5, 2.5), 3000.0, &energies);
        let mut dev = McDeviations::defaults(2.0);
        dev.sigma_e = 0.0;
        dev.sigma_theta = 0.0;
        dev.sigma_d = 0.0;
        dev.n_samples = 3000;
        let out =
            mc_reflectivity_error(&[stack], &energies, &[10.0], &dev, Polarization::S).unwrap();
        let ratio = out.std[4][0] / out.std[0][0];
        let want = (-2.0f64).exp();
        assert!(
            (ratio - want).abs() < 0.35 * want,
            "decay ratio {ratio} vs e⁻² = {want}"
        );
    }

    #[test]
    fn fixed_seed_is_bit_identical_across_exec_paths() {
        let energies = grid(2.2, 4.0, 12);
        let stack = flat_index_stack(Complex64::new(1.8, 0.1), 100.0, &energies);
        let dev = McDeviations {
            n_samples: 16,
            ..McDeviations::defaults(2.2)
        };
        let a = mc_samples(&[stack.clone()], &energies, &[15.0], &dev, Polarization::S).unwrap();
        // sequential path must produce identical bytes
        let b: Vec<Vec<Vec<f64>>> = (0..dev.n_samples)
            .map(|s| perturbed_maps(&[stack.clone()], &energies, &[15.0], &dev, s, Polarization::S).unwrap())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_jitter_recovered() {
        // two-dip curve jittered in thickness: the recovered dip-position std
        // must agree with the finite-difference linearization |∂E_dip/∂d|·σ_d
        let energies = grid(2.4, 4.4, 320);
        // a dispersive dip pair from a simple etalon on aluminium
        let spec = Spectrum::new(
            energies.clone(),
            energies
                .iter()
                .map(|&e| {
                    let lor = |e0: f64, w: f64| {
                        Complex64::new(0.0, 0.35) / Complex64::new(e - e0, w)
                    };
                    (Complex64::new(2.4, 0.01) + lor(3.1, 0.06) + lor(3.9, 0.09)).sqrt()
                })
                .collect(),
            SpectrumRole::RefractiveIndex,
        )
        .unwrap();
        let stack = PerturbableStack {
            index: spec,
            thickness_nm: 110.0,
            back_layers: vec![Layer::finite(
                100.0,
                IndexModel::Table(crate::materials::aluminium()),
            )
            .unwrap()],
            substrate: Layer::semi_infinite(IndexModel::Constant(Complex64::new(1.46, 0.0)))
                .unwrap(),
        };
        let mut dev = McDeviations::defaults(2.4);
        dev.sigma_e = 0.0;
        dev.sigma_theta = 0.0;
        dev.sigma_n_amp = 0.0;
        dev.sigma_d = 0.5;
        dev.n_samples = 400;
        let peaks =
            peak_location_error(&[stack.clone()], &energies, &[15.0], &dev, Polarization::S)
                .unwrap();
        assert_eq!(peaks.len(), 1);
        let p = peaks[0];
        assert!(p.n_valid == 400);
        assert!(!p.flagged);

        // dip positions at a given thickness offset, via the same machinery
        let dips_at = |dd: f64| -> (f64, f64) {
            let built = stack.build(dd, stack.index.clone()).unwrap();
            let y: Vec<f64> = energies
                .iter()
                .map(|&e| {
                    tmm::reflect_transmit(&built, e, 15.0, Polarization::S)
                        .unwrap()
                        .big_r
                })
                .collect();
            let m = two_deepest_minima(&Curve {
                x: energies.clone(),
                y,
            });
            (m[0].position, m[1].position)
        };
        let (lp0, up0) = dips_at(0.0);
        assert_abs_diff_eq!(p.e_lp, lp0, epsilon = 0.05);
        assert_abs_diff_eq!(p.e_up, up0, epsilon = 0.05);
        let (lp_p, up_p) = dips_at(2.0);
        let (lp_m, up_m) = dips_at(-2.0);
        let slope = 0.5 * ((lp_p - lp_m).abs() + (up_p - up_m).abs()) / 4.0;
        let want = slope * dev.sigma_d;
        assert!(
            (p.err - want).abs() <= 0.3 * want.max(1e-4),
            "recovered err {} vs linearized {}",
            p.err,
            want
        );
    }
}
