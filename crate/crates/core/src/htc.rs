//! Holstein-Tavis-Cummings model in the single-excitation manifold: molecules
//! at positions z_m collectively coupled to dispersive cavity modes, each
//! molecule dressed by its own vibrational bath.
//!
//! Linear response from the global ground state only populates the
//! one-excitation subspace (both the Tavis-Cummings and Holstein couplings
//! conserve excitation number), so the basis {|exc m⟩} ∪ {|1_kz⟩} is exact for
//! the susceptibility. The exciton diagonal carries ε_s + λ: the fitted
//! singlet energy has the reorganization energy absorbed, and the bath
//! dressing shifts the line back down by exactly λ.

use num_complex::Complex64;

use crate::bath::{self, BathParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::materials;
use crate::nmqsd::{self, Coupling, EvolutionConfig, LinearOQSModel};
use crate::response::{self, Spectrum};
use crate::tmm::{self, IndexModel, Layer, Polarization, ReflectivityMap, Stack};
use crate::units::{Beta, BETA_ROOM_EV_INV};

/// Basis dimension guard for the single-excitation model.
pub const MAX_MODEL_DIM: usize = 8192;

/// Cavity-mode parameters.
#[derive(Debug, Clone)]
pub struct CavityParams {
    /// Cavity energy at k_z = 0 in eV.
    pub e0: f64,
    /// Refractive index of the intracavity propagation medium.
    pub n_r: f64,
    /// Cavity decay rate κ in eV (k_z independent).
    pub kappa: f64,
    /// Cavity-to-molecule dipole magnitude ratio μ_c/μ_mol.
    pub mu_c_ratio: f64,
    /// Sorted mode wavevectors, ħc-scaled (eV).
    pub kz_grid: Vec<f64>,
}

impl CavityParams {
    /// Validated constructor.
    pub fn new(e0: f64, n_r: f64, kappa: f64, mu_c_ratio: f64, kz_grid: Vec<f64>) -> Result<Self> {
        if !(e0 > 0.0) || !(n_r >= 1.0) || !(kappa >= 0.0) {
            return Err(Error::domain(format!(
                "cavity needs e0 > 0, n_r ≥ 1, κ ≥ 0 (got {e0}, {n_r}, {kappa})"
            )));
        }
        if kz_grid.is_empty() {
            return Err(Error::domain("cavity needs at least one mode".to_string()));
        }
        if kz_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("kz grid must be strictly increasing".to_string()));
        }
        Ok(Self {
            e0,
            n_r,
            kappa,
            mu_c_ratio,
            kz_grid,
        })
    }

    /// Modes at k_z = e0·sinθ for `n_modes` angles uniformly spanning
    /// [θ_min, θ_max] degrees.
    pub fn with_uniform_angle_grid(
        e0: f64,
        n_r: f64,
        kappa: f64,
        mu_c_ratio: f64,
        n_modes: usize,
        theta_min_deg: f64,
        theta_max_deg: f64,
    ) -> Result<Self> {
        if n_modes < 1 {
            return Err(Error::domain("need at least one cavity mode".to_string()));
        }
        if !(0.0 <= theta_min_deg && theta_min_deg < theta_max_deg && theta_max_deg < 90.0) {
            return Err(Error::domain(format!(
                "angle span [{theta_min_deg}, {theta_max_deg}] must sit inside [0°, 90°)"
            )));
        }
        let kz_grid = (0..n_modes)
            .map(|i| {
                let theta = theta_min_deg
                    + (theta_max_deg - theta_min_deg) * i as f64 / (n_modes.max(2) - 1) as f64;
                angle_to_kz(e0, theta).expect("angles validated")
            })
            .collect();
        Self::new(e0, n_r, kappa, mu_c_ratio, kz_grid)
    }

    /// Fitted microcavity defaults: E(0) = 3.42 eV, n_r = 2, κ = 0.21 eV,
    /// μ_c = 2μ, 21 modes spanning the probed 15°–65° range.
    pub fn fitted_tdaf_cavity() -> Self {
        Self::with_uniform_angle_grid(3.42, 2.0, 0.21, 2.0, 21, 15.0, 65.0).expect("valid defaults")
    }
}

/// Molecular side of the cavity model.
#[derive(Debug, Clone)]
pub struct HtcParams {
    /// Number of molecules.
    pub n_mol: usize,
    /// Singlet energy in eV (reorganization absorbed).
    pub eps_s: f64,
    /// Exciton damping rate in eV.
    pub gamma: f64,
    /// Rabi splitting Ω in eV; the collective coupling at k_z = 0 is Ω/2.
    pub rabi: f64,
    /// Molecule positions, ħc-scaled (eV⁻¹).
    pub positions: Vec<f64>,
    /// Per-molecule vibrational bath (finite temperature for the cavity).
    pub bath: BathParams,
}

impl HtcParams {
    /// Validated constructor.
    pub fn new(
        n_mol: usize,
        eps_s: f64,
        gamma: f64,
        rabi: f64,
        positions: Vec<f64>,
        bath: BathParams,
    ) -> Result<Self> {
        if n_mol < 1 || positions.len() != n_mol {
            return Err(Error::domain(format!(
                "need n_mol ≥ 1 positions ({} given for {n_mol} molecules)",
                positions.len()
            )));
        }
        if !(rabi >= 0.0) || !(gamma >= 0.0) {
            return Err(Error::domain("rabi and gamma must be ≥ 0".to_string()));
        }
        bath.validate()?;
        Ok(Self {
            n_mol,
            eps_s,
            gamma,
            rabi,
            positions,
            bath,
        })
    }

    /// Molecules equally spaced over one period 2π/Δk of the mode grid, which
    /// keeps the discrete mode functions maximally distinguishable.
    pub fn with_default_positions(
        n_mol: usize,
        eps_s: f64,
        gamma: f64,
        rabi: f64,
        bath: BathParams,
        cavity: &CavityParams,
    ) -> Result<Self> {
        let dk = if cavity.kz_grid.len() >= 2 {
            cavity.kz_grid[1] - cavity.kz_grid[0]
        } else {
            cavity.kz_grid[0].max(1e-6)
        };
        let period = std::f64::consts::TAU / dk;
        let positions = (0..n_mol).map(|m| period * m as f64 / n_mol as f64).collect();
        Self::new(n_mol, eps_s, gamma, rabi, positions, bath)
    }

    /// Fitted TDAF cavity defaults: N = 30, ε_s = 3.6 eV, γ = 5×10⁻⁵ eV,
    /// Ω = 0.92 eV, room-temperature film bath.
    pub fn fitted_tdaf(cavity: &CavityParams) -> Self {
        let bath = BathParams::new(1.0, 3, 0.09, Beta::Finite(BETA_ROOM_EV_INV)).expect("valid bath");
        Self::with_default_positions(30, 3.6, 5e-5, 0.92, bath, cavity).expect("valid defaults")
    }
}

/// Cavity dispersion ω(k_z) = √(e0² + (k_z/n_r)²), in eV.
pub fn cavity_dispersion(cavity: &CavityParams, kz: f64) -> f64 {
    (cavity.e0 * cavity.e0 + (kz / cavity.n_r).powi(2)).sqrt()
}

/// Light-matter coupling g(k_z) = Ω/(2√N)·√(ω(k_z)/e0), in eV.
pub fn coupling_strength(params: &HtcParams, cavity: &CavityParams, kz: f64) -> f64 {
    params.rabi / (2.0 * (params.n_mol as f64).sqrt())
        * (cavity_dispersion(cavity, kz) / cavity.e0).sqrt()
}

/// External angle → planar wavevector, k_z = E·sinθ (ħc-scaled).
pub fn angle_to_kz(energy_ev: f64, theta_deg: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&theta_deg) {
        return Err(Error::domain(format!("angle {theta_deg}° outside [0°, 90°)")));
    }
    Ok(crate::units::kz_from_angle(energy_ev, theta_deg))
}

/// External angle at which the cavity branch crosses the exciton, under the
/// k_z(θ) = e0·sinθ probe mapping.
pub fn zero_detuning_angle(params: &HtcParams, cavity: &CavityParams) -> Result<f64> {
    if params.eps_s <= cavity.e0 {
        return Err(Error::domain(format!(
            "no crossing: ε_s = {} ≤ E(0) = {}",
            params.eps_s, cavity.e0
        )));
    }
    let kz_cross = cavity.n_r * (params.eps_s * params.eps_s - cavity.e0 * cavity.e0).sqrt();
    let s = kz_cross / cavity.e0;
    if s >= 1.0 {
        return Err(Error::domain("crossing lies beyond 90° incidence".to_string()));
    }
    Ok(s.asin().to_degrees())
}

/// Coupled-oscillator polariton energies E± at the probed k_z: the 2×2 oracle
/// (ω+ε_s)/2 ± ½√(Ω² + (ω−ε_s)²).
pub fn coupled_oscillator_energies(params: &HtcParams, cavity: &CavityParams, kz: f64) -> (f64, f64) {
    let w = cavity_dispersion(cavity, kz);
    let mean = 0.5 * (w + params.eps_s);
    let half = 0.5 * (params.rabi.powi(2) + (w - params.eps_s).powi(2)).sqrt();
    (mean - half, mean + half)
}

/// Assemble the single-excitation model: basis {|exc m⟩, m < N} ∪ {|1_kz⟩}.
pub fn build_single_excitation_model(
    params: &HtcParams,
    cavity: &CavityParams,
) -> Result<LinearOQSModel> {
    let n = params.n_mol;
    let k = cavity.kz_grid.len();
    let dim = n + k;
    if dim > MAX_MODEL_DIM {
        return Err(Error::invalid_model(format!(
            "single-excitation basis of {dim} exceeds the {MAX_MODEL_DIM} cap"
        )));
    }
    let lambda = bath::reorganization_energy(&params.bath);
    let mut h = vec![Complex64::new(0.0, 0.0); dim * dim];
    for m in 0..n {
        h[m * dim + m] = Complex64::new(params.eps_s + lambda, 0.0);
    }
    for (j, &kz) in cavity.kz_grid.iter().enumerate() {
        let col = n + j;
        h[col * dim + col] = Complex64::new(cavity_dispersion(cavity, kz), 0.0);
        let g = coupling_strength(params, cavity, kz);
        for m in 0..n {
            let phase = Complex64::from_polar(g, kz * params.positions[m]);
            h[m * dim + col] = phase;
            h[col * dim + m] = phase.conj();
        }
    }
    let mut damping = vec![params.gamma; n];
    damping.extend(std::iter::repeat(cavity.kappa).take(k));
    let couplings = (0..n)
        .map(|m| Coupling {
            site: m,
            bath: params.bath,
        })
        .collect();
    LinearOQSModel::new(dim, h, damping, couplings)
}

/// Normalized probe state with its squared dipole weight.
#[derive(Debug, Clone)]
pub struct ProbeState {
    /// Normalized amplitudes over the single-excitation basis.
    pub amplitudes: Vec<Complex64>,
    /// μ_tot² = N·μ² + μ_c² in units of μ² = 1.
    pub mu_tot_sq: f64,
    /// Index of the photon mode the probe couples to.
    pub mode_index: usize,
}

/// Probe initial state: phases e^(i·k_z·z_m) on every molecule, the cavity
/// dipole μ_c on the photon mode nearest the probe k_z (the cavity mode is
/// delocalized, z = 0).
pub fn initial_probe_state(
    params: &HtcParams,
    cavity: &CavityParams,
    probe_kz: f64,
) -> Result<ProbeState> {
    let n = params.n_mol;
    let k = cavity.kz_grid.len();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n + k];
    for m in 0..n {
        amplitudes[m] = Complex64::from_polar(1.0, probe_kz * params.positions[m]);
    }
    let mode_index = cavity
        .kz_grid
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - probe_kz)
                .abs()
                .partial_cmp(&(b.1 - probe_kz).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::domain("empty kz grid".to_string()))?;
    amplitudes[n + mode_index] = Complex64::new(cavity.mu_c_ratio, 0.0);
    let mu_tot_sq = n as f64 + cavity.mu_c_ratio * cavity.mu_c_ratio;
    let norm = mu_tot_sq.sqrt();
    for a in &mut amplitudes {
        *a /= norm;
    }
    Ok(ProbeState {
        amplitudes,
        mu_tot_sq,
        mode_index,
    })
}

/// Susceptibility of the cavity system at one probe wavevector: one
/// propagation, reused across the whole energy grid. The amplitude folds in
/// μ_tot²/N so `scale` stays the per-molecule amplitude of the bare film.
pub fn cavity_susceptibility(
    params: &HtcParams,
    cavity: &CavityParams,
    probe_kz: f64,
    omegas: &[f64],
    scale: f64,
    evolution: &EvolutionConfig,
) -> Result<Spectrum> {
    let model = build_single_excitation_model(params, cavity)?;
    let probe = initial_probe_state(params, cavity, probe_kz)?;
    let prop = nmqsd::propagate_zero_noise(&model, &probe.amplitudes, evolution, false)?;
    let trace = prop.to_trace(probe_kz);
    let eff_scale = scale * probe.mu_tot_sq / params.n_mol as f64;
    let tail_tol = (1.5 * evolution.tail_tolerance).max(response::DEFAULT_TAIL_TOL);
    response::susceptibility_with_tail_tol(&trace, omegas, eff_scale, tail_tol)
}

/// Full cavity-reflectivity configuration: model, probe mapping, and the
/// layer stack the measured sample reduces to (effective front layer with the
/// computed index, back mirror, substrate).
#[derive(Debug, Clone)]
pub struct CavitySetup {
    /// Molecular parameters.
    pub htc: HtcParams,
    /// Cavity parameters.
    pub cavity: CavityParams,
    /// Per-molecule susceptibility amplitude (thin-film `scale`).
    pub scale: f64,
    /// Background index inside the effective layer.
    pub n_bg: Complex64,
    /// Effective layer thickness in nm (front mirror + film).
    pub effective_thickness_nm: f64,
    /// Back mirror thickness in nm.
    pub mirror_thickness_nm: f64,
    /// Include the 1 nm LiF spacer.
    pub include_lif: bool,
    /// Propagation grid.
    pub evolution: EvolutionConfig,
}

impl CavitySetup {
    /// Packaged fitted defaults for the TDAF microcavity.
    pub fn fitted_tdaf() -> Self {
        let cavity = CavityParams::fitted_tdaf_cavity();
        let htc = HtcParams::fitted_tdaf(&cavity);
        Self {
            htc,
            cavity,
            scale: crate::holstein::TDAF_SCALE,
            n_bg: Complex64::new(1.5, 0.015).sqrt(),
            effective_thickness_nm: 105.0,
            mirror_thickness_nm: 100.0,
            include_lif: false,
            evolution: EvolutionConfig::default(),
        }
    }

    /// Effective-layer refractive index for a probe at `theta_deg`.
    pub fn index_spectrum(&self, theta_deg: f64, omegas: &[f64]) -> Result<Spectrum> {
        let probe_kz = angle_to_kz(self.cavity.e0, theta_deg)?;
        let chi = cavity_susceptibility(
            &self.htc,
            &self.cavity,
            probe_kz,
            omegas,
            self.scale,
            &self.evolution,
        )?;
        let eps = response::dielectric(&chi, self.n_bg)?;
        response::refractive_index(&eps)
    }

    /// Stack for one probe angle: vacuum / effective layer / [LiF] / Al / quartz.
    pub fn stack(&self, theta_deg: f64, omegas: &[f64]) -> Result<Stack> {
        let index = self.index_spectrum(theta_deg, omegas)?;
        let mut layers = vec![Layer::finite(self.effective_thickness_nm, IndexModel::Model(index))?];
        if self.include_lif {
            layers.push(Layer::finite(1.0, IndexModel::Table(materials::lif()))?);
        }
        layers.push(Layer::finite(
            self.mirror_thickness_nm,
            IndexModel::Table(materials::aluminium()),
        )?);
        Stack::new(
            tmm::vacuum(),
            layers,
            Layer::semi_infinite(IndexModel::Table(materials::quartz()))?,
        )
    }

    /// Angle-resolved reflectivity map; one propagation per angle, evaluated
    /// in parallel.
    pub fn reflectivity(
        &self,
        energies: &[f64],
        thetas_deg: &[f64],
        pol: Polarization,
    ) -> Result<ReflectivityMap> {
        let stacks: Vec<Stack> = exec::map_indexed(thetas_deg.len(), |i| {
            self.stack(thetas_deg[i], energies)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let ne = energies.len();
        let nt = thetas_deg.len();
        let flat: Vec<Result<f64>> = exec::map_indexed(ne * nt, |idx| {
            let (ei, ti) = (idx / nt, idx % nt);
            tmm::reflect_transmit(&stacks[ti], energies[ei], thetas_deg[ti], pol).map(|rt| rt.big_r)
        });
        let mut values = Vec::with_capacity(ne);
        let mut it = flat.into_iter();
        for _ in 0..ne {
            let row: Result<Vec<f64>> = (0..nt).map(|_| it.next().unwrap()).collect();
            values.push(row?);
        }
        Ok(ReflectivityMap {
            energies: energies.to_vec(),
            thetas_deg: thetas_deg.to_vec(),
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    fn small_cavity(n_modes: usize) -> CavityParams {
        CavityParams::with_uniform_angle_grid(3.42, 2.0, 0.21, 2.0, n_modes, 15.0, 65.0).unwrap()
    }

    fn small_htc(n_mol: usize, cavity: &CavityParams) -> HtcParams {
        let bath = BathParams::superohmic_zero_t(0.0, 0.09).unwrap();
        HtcParams::with_default_positions(n_mol, 3.6, 5e-5, 0.92, bath, cavity).unwrap()
    }

    #[test]
    fn dispersion_examples() {
        let cavity = small_cavity(21);
        assert_relative_eq!(cavity_dispersion(&cavity, 0.0), 3.42, max_relative = 1e-14);
        // even in kz
        assert_eq!(
            cavity_dispersion(&cavity, 1.3),
            cavity_dispersion(&cavity, -1.3)
        );
        // asymptotic to kz/n_r
        let kz = 10.0 * 3.42 * 2.0;
        let ratio = cavity_dispersion(&cavity, kz) / (kz / 2.0);
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn coupling_examples() {
        let cavity = small_cavity(21);
        let p = small_htc(30, &cavity);
        let g0 = coupling_strength(&p, &cavity, 0.0);
        assert_relative_eq!(g0, 0.92 / (2.0 * 30f64.sqrt()), max_relative = 1e-14);
        assert!((g0 - 0.08398).abs() < 1e-4);
        let mut p0 = p.clone();
        p0.rabi = 0.0;
        assert_eq!(coupling_strength(&p0, &cavity, 1.0), 0.0);
        let kz = 2.0;
        assert_relative_eq!(
            coupling_strength(&p, &cavity, kz) / g0,
            (cavity_dispersion(&cavity, kz) / cavity.e0).sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn angle_mapping() {
        assert_eq!(angle_to_kz(3.42, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            angle_to_kz(3.42, 30.0).unwrap(),
            3.42 * 0.5,
            max_relative = 1e-12
        );
        assert!(angle_to_kz(3.42, 95.0).is_err());
    }

    #[test]
    fn model_dimensions_and_hermiticity() {
        let cavity = small_cavity(21);
        let p = small_htc(30, &cavity);
        let model = build_single_excitation_model(&p, &cavity).unwrap();
        assert_eq!(model.dim, 51);
        let d = model.dim;
        for i in 0..d {
            for j in 0..d {
                assert!(
                    (model.h_s[i * d + j] - model.h_s[j * d + i].conj()).norm() < 1e-12,
                    "H not Hermitian at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn two_state_eigenvalues() {
        // N = 1, one mode, no bath: eigenvalues (ε+ω)/2 ± √(g² + δ²/4)
        let cavity = CavityParams::new(3.42, 2.0, 0.0, 0.0, vec![1.2]).unwrap();
        let bath = BathParams::superohmic_zero_t(0.0, 0.09).unwrap();
        let p = HtcParams::new(1, 3.6, 0.0, 0.4, vec![0.0], bath).unwrap();
        let model = build_single_excitation_model(&p, &cavity).unwrap();
        let h = DMatrix::from_fn(2, 2, |i, j| model.h_s[i * 2 + j]);
        let mut eig: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let w = cavity_dispersion(&cavity, 1.2);
        let g = coupling_strength(&p, &cavity, 1.2);
        let mean = 0.5 * (3.6 + w);
        let half = (g * g + 0.25 * (3.6 - w) * (3.6 - w)).sqrt();
        assert_abs_diff_eq!(eig[0], mean - half, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], mean + half, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_spectrum_is_union_of_bare_energies() {
        let cavity = small_cavity(5);
        let mut p = small_htc(4, &cavity);
        p.rabi = 0.0;
        let model = build_single_excitation_model(&p, &cavity).unwrap();
        let d = model.dim;
        let h = DMatrix::from_fn(d, d, |i, j| model.h_s[i * d + j]);
        let mut eig: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut bare: Vec<f64> = (0..4).map(|_| 3.6).collect();
        bare.extend(cavity.kz_grid.iter().map(|&k| cavity_dispersion(&cavity, k)));
        bare.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eig.iter().zip(&bare) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn polariton_eigenvalues_bracketed() {
        let cavity = small_cavity(21);
        let p = small_htc(30, &cavity);
        let model = build_single_excitation_model(&p, &cavity).unwrap();
        let d = model.dim;
        let h = DMatrix::from_fn(d, d, |i, j| model.h_s[i * d + j]);
        let eig = h.symmetric_eigen().eigenvalues;
        let w_min = cavity_dispersion(&cavity, cavity.kz_grid[0]);
        let w_max = cavity_dispersion(&cavity, *cavity.kz_grid.last().unwrap());
        let lo = w_min.min(p.eps_s) - p.rabi;
        let hi = w_max.max(p.eps_s + 0.2) + p.rabi;
        for e in eig.iter() {
            assert!(*e > lo && *e < hi, "eigenvalue {e} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn probe_state_weights() {
        let cavity = small_cavity(21);
        let p = small_htc(30, &cavity);
        let probe = initial_probe_state(&p, &cavity, cavity.kz_grid[4]).unwrap();
        assert_eq!(probe.mode_index, 4);
        assert_relative_eq!(probe.mu_tot_sq, 34.0, max_relative = 1e-14);
        // photon amplitude is ratio × each molecular amplitude before normalization
        let mol = probe.amplitudes[0].norm();
        let ph = probe.amplitudes[30 + 4].norm();
        assert_relative_eq!(ph / mol, 2.0, max_relative = 1e-12);
        // at kz = 0 all molecular phases are 1
        let probe0 = initial_probe_state(&p, &cavity, 0.0).unwrap();
        for m in 0..30 {
            assert_abs_diff_eq!(probe0.amplitudes[m].im, 0.0, epsilon = 1e-15);
        }
        let norm: f64 = probe.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_detuning_angle_matches_dispersion() {
        let cavity = small_cavity(21);
        let p = small_htc(30, &cavity);
        let theta = zero_detuning_angle(&p, &cavity).unwrap();
        let kz = angle_to_kz(cavity.e0, theta).unwrap();
        assert_abs_diff_eq!(cavity_dispersion(&cavity, kz), 3.6, epsilon = 1e-10);
    }

    #[test]
    fn decoupled_susceptibility_is_two_lorentzians() {
        // Ω = 0, bath off, κ > 0: photon Lorentzian (width κ) + exciton (width γ)
        let cavity = CavityParams::new(3.42, 2.0, 0.05, 1.0, vec![1e-9]).unwrap();
        let bath = BathParams::superohmic_zero_t(0.0, 0.09).unwrap();
        let p = HtcParams::new(2, 3.6, 0.02, 0.0, vec![0.0, 1.0], bath).unwrap();
        let omegas: Vec<f64> = (0..601).map(|i| 3.2 + 0.6 * i as f64 / 600.0).collect();
        let evo = EvolutionConfig {
            dt: 0.005,
            t_max: 3000.0,
            tail_tolerance: 1e-7,
        };
        let chi = cavity_susceptibility(&p, &cavity, 0.0, &omegas, 1.0, &evo).unwrap();
        // per-molecule normalization: χ = i·L_exc(ω) + i·(μ_c²/N)·L_ph(ω) with
        // L(ω) = 1/(Γ/2 − i(ω−e)), i.e. −1/((ω−e) + iΓ/2)
        for (w, v) in omegas.iter().zip(&chi.values) {
            let lor = |e0: f64, half_width: f64| {
                -Complex64::new(1.0, 0.0) / Complex64::new(w - e0, half_width)
            };
            let want = lor(3.6, 0.01) + 0.5 * lor(cavity_dispersion(&cavity, 1e-9), 0.025);
            assert!(
                (v - want).norm() < 2e-2 * want.norm().max(1.0),
                "ω = {w}: {v} vs {want}"
            );
        }
    }

    #[test]
    fn gauge_invariance_under_global_translation() {
        // translating every z_m, with the probe on a grid mode, leaves χ unchanged
        let cavity = small_cavity(5);
        let bath = BathParams::superohmic_zero_t(0.5, 0.09).unwrap();
        let p = HtcParams::with_default_positions(6, 3.6, 1e-4, 0.5, bath, &cavity).unwrap();
        let omegas: Vec<f64> = (0..41).map(|i| 3.2 + 0.8 * i as f64 / 40.0).collect();
        let evo = EvolutionConfig {
            dt: 0.01,
            t_max: 400.0,
            tail_tolerance: 1e-4,
        };
        let probe_kz = cavity.kz_grid[2];
        let chi_a = cavity_susceptibility(&p, &cavity, probe_kz, &omegas, 1.0, &evo).unwrap();
        let mut shifted = p.clone();
        for z in &mut shifted.positions {
            *z += 17.3;
        }
        let chi_b = cavity_susceptibility(&shifted, &cavity, probe_kz, &omegas, 1.0, &evo).unwrap();
        for (a, b) in chi_a.values.iter().zip(&chi_b.values) {
            assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
        }
    }
}
