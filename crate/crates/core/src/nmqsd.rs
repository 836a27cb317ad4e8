//! Deterministic propagation of the zero-noise quantum-state-diffusion
//! trajectory with the first-level (weak-coupling) closure of the functional
//! derivative.
//!
//! The equation of motion is
//!
//! ```text
//!   dψ/dt = [ −i H_S − Γ/2 − Σ_m L_m W_m(t) ] ψ
//!   W_m(t) = V · ( G⁽ᵐ⁾(t) ⊙ (V† L_m V) ) · V†
//!   G⁽ᵐ⁾_ab(t) = ∫₀ᵗ α_m(τ) e^{i(E_b − E_a)τ} dτ
//! ```
//!
//! where V diagonalizes the Hermitian H_S. The closure makes the memory term
//! time-local once G(t) is known, so a fixed-step RK4 integrates the whole
//! trajectory with one running kernel accumulator per coupling.
//!
//! For a site projector L_m = |m⟩⟨m| the memory term collapses to a single
//! row: (L_m W_m ψ)_m = Σ_b C_b V_{mb} (V†ψ)_b with C_b = Σ_a |V_{ma}|² G_ab.
//! The row C is advanced alongside the state by Simpson increments on a
//! quarter-step tabulation of α, which keeps the scheme fourth-order overall.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{self, BathParams};
use crate::error::{Error, Result};
use crate::response::CorrelationTrace;

/// One subsystem-bath coupling: the Hermitian projector |site⟩⟨site| and its
/// bath. Idempotency holds by construction.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// Basis state the projector selects.
    pub site: usize,
    /// Bath attached to this subsystem.
    pub bath: BathParams,
}

/// Finite-dimensional open-system model with Hermitian Hamiltonian, diagonal
/// damping, and per-subsystem projector couplings.
#[derive(Debug, Clone)]
pub struct LinearOQSModel {
    /// Basis size.
    pub dim: usize,
    /// Hermitian system Hamiltonian (eV), row-major dim×dim.
    pub h_s: Vec<Complex64>,
    /// Per-basis-state damping rates Γ_i ≥ 0 (eV), entering as −Γ_i/2.
    pub damping: Vec<f64>,
    /// Projector couplings with their baths.
    pub couplings: Vec<Coupling>,
}

impl LinearOQSModel {
    /// Validated constructor; `h_s` is row-major dim×dim.
    pub fn new(
        dim: usize,
        h_s: Vec<Complex64>,
        damping: Vec<f64>,
        couplings: Vec<Coupling>,
    ) -> Result<Self> {
        if dim == 0 || h_s.len() != dim * dim || damping.len() != dim {
            return Err(Error::invalid_model(format!(
                "inconsistent dimensions: dim = {dim}, |h_s| = {}, |damping| = {}",
                h_s.len(),
                damping.len()
            )));
        }
        let scale = h_s.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        for i in 0..dim {
            for j in 0..dim {
                let asym = (h_s[i * dim + j] - h_s[j * dim + i].conj()).norm();
                if asym > 1e-12 * scale.max(1.0) {
                    return Err(Error::invalid_model(format!(
                        "h_s not Hermitian at ({i},{j}): asymmetry {asym:.3e}"
                    )));
                }
            }
        }
        if damping.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::invalid_model("damping rates must be ≥ 0".to_string()));
        }
        for c in &couplings {
            if c.site >= dim {
                return Err(Error::invalid_model(format!(
                    "coupling site {} outside basis of size {dim}",
                    c.site
                )));
            }
            c.bath.validate()?;
        }
        Ok(Self {
            dim,
            h_s,
            damping,
            couplings,
        })
    }

    fn eigendecompose(&self) -> (Vec<f64>, Vec<Complex64>) {
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| self.h_s[i * self.dim + j]);
        let eig = m.symmetric_eigen();
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        // row-major V with columns = eigenvectors
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for i in 0..self.dim {
            for a in 0..self.dim {
                v[i * self.dim + a] = eig.eigenvectors[(i, a)];
            }
        }
        (energies, v)
    }
}

/// Grid and stopping parameters for the propagation.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionConfig {
    /// RK4 step in eV⁻¹.
    pub dt: f64,
    /// Hard cap on the propagated time, eV⁻¹.
    pub t_max: f64,
    /// Stop early once |⟨ψ₀|ψ_t⟩| stays below this over a whole chunk.
    pub tail_tolerance: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_max: 300.0,
            tail_tolerance: 1e-8,
        }
    }
}

impl EvolutionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_max >= self.dt) {
            return Err(Error::domain(format!(
                "evolution grid needs dt > 0 and t_max ≥ dt (dt = {}, t_max = {})",
                self.dt, self.t_max
            )));
        }
        Ok(())
    }
}

/// Output of a propagation run.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// Grid step (eV⁻¹).
    pub dt: f64,
    /// ⟨ψ₀|ψ_t⟩ at each step, ψ₀ normalized; element 0 is 1.
    pub overlaps: Vec<Complex64>,
    /// Squared norm of the unnormalized initial vector (μ_tot²).
    pub mu_tot_sq: f64,
    /// True when the overlap fell below the tail tolerance before t_max.
    pub reached_tail: bool,
    /// Optional state history (normalized), one vector per step.
    pub states: Option<Vec<Vec<Complex64>>>,
}

impl Propagation {
    /// Package the overlaps as a dipole correlation trace normalized to
    /// M(0) = 1, with the probe wavevector recorded.
    pub fn to_trace(&self, kz: f64) -> CorrelationTrace {
        CorrelationTrace {
            dt: self.dt,
            values: self.overlaps.clone(),
            mu_tot_sq: self.mu_tot_sq,
            kz,
        }
    }
}

/// Lazily extended quarter-step tabulation of one bath correlation function.
struct AlphaGrid {
    bath: BathParams,
    dt_quarter: f64,
    values: Vec<Complex64>,
}

impl AlphaGrid {
    fn ensure(&mut self, max_index: usize) -> Result<()> {
        while self.values.len() <= max_index {
            let t = self.values.len() as f64 * self.dt_quarter;
            self.values.push(bath::bcf(&self.bath, t)?);
        }
        Ok(())
    }
}

struct Engine {
    dim: usize,
    /// A = −iH − Γ/2, row-major.
    a_mat: Vec<Complex64>,
    /// V†, row-major (for ψ̃ = V†ψ).
    v_dag: Vec<Complex64>,
    energies: Vec<f64>,
    /// Per coupling: site, bath grid index, weights |V_{m a}|², row V_{m β}.
    sites: Vec<usize>,
    bath_of: Vec<usize>,
    weights: Vec<Vec<f64>>,
    v_rows: Vec<Vec<Complex64>>,
    /// Running kernel rows C_c[β].
    c_rows: Vec<Vec<Complex64>>,
    grids: Vec<AlphaGrid>,
    /// e^{i E_β τ} at the current quarter-step, plus bookkeeping to refresh it.
    phase: Vec<Complex64>,
    phase_step: Vec<Complex64>,
    quarter_index: usize,
    dt: f64,
}

impl Engine {
    fn new(model: &LinearOQSModel, dt: f64) -> Self {
        let dim = model.dim;
        let (energies, v) = model.eigendecompose();
        let mut a_mat = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut x = Complex64::new(0.0, -1.0) * model.h_s[i * dim + j];
                if i == j {
                    x -= Complex64::new(0.5 * model.damping[i], 0.0);
                }
                a_mat[i * dim + j] = x;
            }
        }
        let mut v_dag = vec![Complex64::new(0.0, 0.0); dim * dim];
        for a in 0..dim {
            for i in 0..dim {
                v_dag[a * dim + i] = v[i * dim + a].conj();
            }
        }
        // couplings with a = 0 contribute nothing; drop them up front
        let active: Vec<&Coupling> = model.couplings.iter().filter(|c| c.bath.a > 0.0).collect();
        let mut grids: Vec<AlphaGrid> = Vec::new();
        let mut bath_of = Vec::with_capacity(active.len());
        for c in &active {
            let idx = grids.iter().position(|g| g.bath == c.bath).unwrap_or_else(|| {
                grids.push(AlphaGrid {
                    bath: c.bath,
                    dt_quarter: 0.25 * dt,
                    values: Vec::new(),
                });
                grids.len() - 1
            });
            bath_of.push(idx);
        }
        let weights: Vec<Vec<f64>> = active
            .iter()
            .map(|c| (0..dim).map(|a| v[c.site * dim + a].norm_sqr()).collect())
            .collect();
        let v_rows: Vec<Vec<Complex64>> = active
            .iter()
            .map(|c| (0..dim).map(|b| v[c.site * dim + b]).collect())
            .collect();
        let c_rows = vec![vec![Complex64::new(0.0, 0.0); dim]; active.len()];
        let phase = vec![Complex64::new(1.0, 0.0); dim];
        let phase_step = energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, e * 0.25 * dt))
            .collect();
        Engine {
            dim,
            a_mat,
            v_dag,
            energies,
            sites: active.iter().map(|c| c.site).collect(),
            bath_of,
            weights,
            v_rows,
            c_rows,
            grids,
            phase,
            phase_step,
            quarter_index: 0,
            dt,
        }
    }

    /// Advance the running phase vector by one quarter step, refreshing it
    /// from scratch periodically to stop rounding drift.
    fn advance_phase(&mut self) {
        self.quarter_index += 1;
        if self.quarter_index % 4096 == 0 {
            let tau = self.quarter_index as f64 * 0.25 * self.dt;
            for (p, &e) in self.phase.iter_mut().zip(&self.energies) {
                *p = Complex64::from_polar(1.0, e * tau);
            }
        } else {
            for (p, s) in self.phase.iter_mut().zip(&self.phase_step) {
                *p *= *s;
            }
        }
    }

    /// Simpson node contribution at the current quarter-step phase: for each
    /// coupling, C_c[β] += w·α_c(τ)·φ_c(τ)·e^{iE_βτ} with φ_c = Σ_a P_ca e^{−iE_aτ}.
    fn accumulate_node(&mut self, weight: f64) {
        let q = self.quarter_index;
        for c in 0..self.sites.len() {
            let alpha = self.grids[self.bath_of[c]].values[q];
            if alpha.norm_sqr() == 0.0 {
                continue;
            }
            let mut phi = Complex64::new(0.0, 0.0);
            for (w, p) in self.weights[c].iter().zip(&self.phase) {
                phi += w * p.conj();
            }
            let s = weight * alpha * phi;
            for (cb, p) in self.c_rows[c].iter_mut().zip(&self.phase) {
                *cb += s * p;
            }
        }
    }

    /// Advance every C row over one half interval [τ, τ+dt/2] (two quarter
    /// steps) with Simpson weights dt/2/6 · (1, 4, 1).
    fn advance_memory_half(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        let target = self.quarter_index + 2;
        for g in &mut self.grids {
            g.ensure(target)?;
        }
        self.accumulate_node(h / 6.0);
        self.advance_phase();
        self.accumulate_node(4.0 * h / 6.0);
        self.advance_phase();
        self.accumulate_node(h / 6.0);
        Ok(())
    }

    /// dψ/dt with the current memory rows.
    fn rhs(&self, psi: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        let d = self.dim;
        // out = A ψ
        for i in 0..d {
            let row = &self.a_mat[i * d..(i + 1) * d];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, p) in row.iter().zip(psi) {
                acc += a * p;
            }
            out[i] = acc;
        }
        if self.sites.is_empty() {
            return;
        }
        // ψ̃ = V† ψ
        for a in 0..d {
            let row = &self.v_dag[a * d..(a + 1) * d];
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, p) in row.iter().zip(psi) {
                acc += v * p;
            }
            scratch[a] = acc;
        }
        for c in 0..self.sites.len() {
            let mut y = Complex64::new(0.0, 0.0);
            for ((cb, vb), pb) in self.c_rows[c].iter().zip(&self.v_rows[c]).zip(scratch.iter()) {
                y += cb * vb * pb;
            }
            out[self.sites[c]] -= y;
        }
    }
}

/// Propagate the zero-noise trajectory from `psi0`, recording ⟨ψ₀|ψ_t⟩ at
/// every step. `psi0` is normalized internally; its squared norm is reported
/// as μ_tot². Stops at `config.t_max`, or earlier once a whole 128-step chunk
/// of overlaps stays below `config.tail_tolerance`.
pub fn propagate_zero_noise(
    model: &LinearOQSModel,
    psi0: &[Complex64],
    config: &EvolutionConfig,
    record_states: bool,
) -> Result<Propagation> {
    config.validate()?;
    if psi0.len() != model.dim {
        return Err(Error::invalid_model(format!(
            "initial state has length {} for basis of size {}",
            psi0.len(),
            model.dim
        )));
    }
    let mu_tot_sq: f64 = psi0.iter().map(|v| v.norm_sqr()).sum();
    if !(mu_tot_sq > 0.0) || !mu_tot_sq.is_finite() {
        return Err(Error::invalid_model("initial state has zero or invalid norm".to_string()));
    }
    let inv = 1.0 / mu_tot_sq.sqrt();
    let psi_init: Vec<Complex64> = psi0.iter().map(|v| v * inv).collect();

    let n_steps = (config.t_max / config.dt).round().max(1.0) as usize;
    let mut engine = Engine::new(model, config.dt);
    let d = model.dim;
    let dt = config.dt;

    let mut psi = psi_init.clone();
    let mut overlaps = Vec::with_capacity(n_steps + 1);
    overlaps.push(Complex64::new(1.0, 0.0));
    let mut states = if record_states { Some(vec![psi.clone()]) } else { None };

    let mut k1 = vec![Complex64::new(0.0, 0.0); d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut scratch = k1.clone();

    const CHUNK: usize = 128;
    let mut chunk_max = 0.0f64;
    let mut reached_tail = false;

    for step in 0..n_steps {
        engine.rhs(&psi, &mut k1, &mut scratch);
        engine.advance_memory_half()?;
        for i in 0..d {
            tmp[i] = psi[i] + 0.5 * dt * k1[i];
        }
        engine.rhs(&tmp, &mut k2, &mut scratch);
        for i in 0..d {
            tmp[i] = psi[i] + 0.5 * dt * k2[i];
        }
        engine.rhs(&tmp, &mut k3, &mut scratch);
        engine.advance_memory_half()?;
        for i in 0..d {
            tmp[i] = psi[i] + dt * k3[i];
        }
        engine.rhs(&tmp, &mut k4, &mut scratch);
        for i in 0..d {
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let overlap: Complex64 = psi_init.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        overlaps.push(overlap);
        if let Some(s) = states.as_mut() {
            s.push(psi.clone());
        }
        chunk_max = chunk_max.max(overlap.norm());
        if (step + 1) % CHUNK == 0 {
            if chunk_max < config.tail_tolerance {
                reached_tail = true;
                break;
            }
            chunk_max = 0.0;
        }
    }

    Ok(Propagation {
        dt,
        overlaps,
        mu_tot_sq,
        reached_tail,
        states,
    })
}

/// Materialize the full generator −iH_S − Γ/2 − Σ_m L_m W_m(t), row-major.
///
/// Reference path for tests and diagnostics; the propagation itself never
/// builds this matrix.
pub fn effective_drift(model: &LinearOQSModel, t: f64) -> Result<Vec<Complex64>> {
    if t < 0.0 {
        return Err(Error::domain(format!("drift needs t ≥ 0, got {t}")));
    }
    let d = model.dim;
    let (energies, v) = model.eigendecompose();
    let mut drift = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            drift[i * d + j] = Complex64::new(0.0, -1.0) * model.h_s[i * d + j];
        }
        drift[i * d + i] -= Complex64::new(0.5 * model.damping[i], 0.0);
    }
    if t == 0.0 {
        return Ok(drift);
    }
    for c in &model.couplings {
        if c.bath.a == 0.0 {
            continue;
        }
        let dt_table = (t / 400.0).min(0.05);
        // G_ab(t) = ∫₀ᵗ α e^{i(E_b−E_a)τ} dτ for every eigenpair
        let mut g = vec![Complex64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                let delta = energies[b] - energies[a];
                let table = bath::memory_kernel_table(&c.bath, delta, t, dt_table)?;
                g[a * d + b] = *table.last().unwrap();
            }
        }
        // W = V (G ⊙ V†LV) V†, L = |m⟩⟨m|
        let m = c.site;
        for i in 0..d {
            // row i of L·W is zero unless i = m
            if i != m {
                continue;
            }
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        let l_ab = v[m * d + a].conj() * v[m * d + b];
                        acc += v[m * d + a] * g[a * d + b] * l_ab * v[j * d + b].conj();
                    }
                }
                drift[m * d + j] -= acc;
            }
        }
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Beta;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn free_model() -> LinearOQSModel {
        LinearOQSModel::new(
            2,
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.5, 0.0)],
            vec![0.0, 0.0],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_hermitian() {
        let err = LinearOQSModel::new(
            2,
            vec![c(1.0, 0.0), c(0.2, 0.0), c(0.3, 0.0), c(2.0, 0.0)],
            vec![0.0, 0.0],
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn free_evolution_is_a_phase_sum() {
        let model = free_model();
        let psi0 = [c(0.6, 0.0), c(0.8, 0.0)];
        let cfg = EvolutionConfig {
            dt: 0.005,
            t_max: 10.0,
            tail_tolerance: 0.0,
        };
        let prop = propagate_zero_noise(&model, &psi0, &cfg, true).unwrap();
        let (w1, w2) = (0.36, 0.64);
        for (k, ov) in prop.overlaps.iter().enumerate().step_by(400) {
            let t = k as f64 * cfg.dt;
            let want = w1 * Complex64::from_polar(1.0, -1.0 * t)
                + w2 * Complex64::from_polar(1.0, -2.5 * t);
            assert!((ov - want).norm() < 1e-7, "t = {t}");
        }
        // norm conservation
        let states = prop.states.unwrap();
        for s in states.iter().step_by(500) {
            let n: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pure_dephasing_matches_lineshape_exponential() {
        // single excited level with its own bath: overlap = e^{−iεt − ∫G₀}
        // with the model energy ε_H = ε_s + λ this is e^{−iε_s t − g(t)}
        let bath_p = BathParams::superohmic_zero_t(1.0, 0.09).unwrap();
        let lambda = bath::reorganization_energy(&bath_p);
        let eps_s = 3.6;
        let model = LinearOQSModel::new(
            1,
            vec![c(eps_s + lambda, 0.0)],
            vec![0.0],
            vec![Coupling { site: 0, bath: bath_p }],
        )
        .unwrap();
        let cfg = EvolutionConfig {
            dt: 0.005,
            t_max: 50.0,
            tail_tolerance: 0.0,
        };
        let prop = propagate_zero_noise(&model, &[c(1.0, 0.0)], &cfg, false).unwrap();
        let g = bath::lineshape_table(&bath_p, cfg.dt, prop.overlaps.len() - 1).unwrap();
        let mut worst = 0.0f64;
        for (k, ov) in prop.overlaps.iter().enumerate() {
            let t = k as f64 * cfg.dt;
            let want = (Complex64::new(0.0, -eps_s * t) - g[k]).exp();
            worst = worst.max((ov - want).norm());
        }
        assert!(worst < 1e-6, "max abs error {worst}");
    }

    #[test]
    fn detuned_rabi_against_two_level_oracle() {
        // 2×2, no baths: oracle by explicit diagonalization
        let (e1, e2, g) = (3.6, 3.3, 0.2);
        let model = LinearOQSModel::new(
            2,
            vec![c(e1, 0.0), c(g, 0.0), c(g, 0.0), c(e2, 0.0)],
            vec![0.0, 0.0],
            vec![],
        )
        .unwrap();
        let psi0 = [c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)];
        let cfg = EvolutionConfig {
            dt: 0.005,
            t_max: 30.0,
            tail_tolerance: 0.0,
        };
        let prop = propagate_zero_noise(&model, &psi0, &cfg, false).unwrap();

        let mean = 0.5 * (e1 + e2);
        let half = ((e1 - e2) * 0.5f64).hypot(g);
        // eigenvectors (cosφ, sinφ), (−sinφ, cosφ) with tan 2φ = 2g/(e1−e2)
        let phi = 0.5 * (2.0 * g).atan2(e1 - e2);
        let (cp, sp) = (phi.cos(), phi.sin());
        for (k, ov) in prop.overlaps.iter().enumerate().step_by(700) {
            let t = k as f64 * cfg.dt;
            let w_plus = 0.5 * (cp + sp) * (cp + sp);
            let w_minus = 0.5 * (cp - sp) * (cp - sp);
            let want = w_plus * Complex64::from_polar(1.0, -(mean + half) * t)
                + w_minus * Complex64::from_polar(1.0, -(mean - half) * t);
            assert!((ov - want).norm() < 1e-6, "t = {t}: {ov} vs {want}");
        }
    }

    #[test]
    fn rk4_step_halving_ratio() {
        let bath_p = BathParams::superohmic_zero_t(1.0, 0.09).unwrap();
        let lambda = bath::reorganization_energy(&bath_p);
        let model = LinearOQSModel::new(
            1,
            vec![c(3.6 + lambda, 0.0)],
            vec![0.0],
            vec![Coupling { site: 0, bath: bath_p }],
        )
        .unwrap();
        let t_max = 20.0;
        let err_at = |dt: f64| {
            let cfg = EvolutionConfig {
                dt,
                t_max,
                tail_tolerance: 0.0,
            };
            let prop = propagate_zero_noise(&model, &[c(1.0, 0.0)], &cfg, false).unwrap();
            let n = prop.overlaps.len() - 1;
            let g = bath::lineshape_table(&bath_p, dt, n).unwrap();
            let want = (Complex64::new(0.0, -3.6 * t_max) - g[n]).exp();
            (prop.overlaps[n] - want).norm()
        };
        let e_coarse = err_at(0.16);
        let e_fine = err_at(0.08);
        let ratio = e_coarse / e_fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "step-halving ratio {ratio} (errors {e_coarse:.3e} / {e_fine:.3e})"
        );
    }

    #[test]
    fn damping_decays_overlap() {
        let model = LinearOQSModel::new(1, vec![c(3.0, 0.0)], vec![0.2], vec![]).unwrap();
        let cfg = EvolutionConfig {
            dt: 0.01,
            t_max: 10.0,
            tail_tolerance: 0.0,
        };
        let prop = propagate_zero_noise(&model, &[c(1.0, 0.0)], &cfg, false).unwrap();
        let last = prop.overlaps.last().unwrap();
        assert_abs_diff_eq!(last.norm(), (-0.5f64 * 0.2 * 10.0).exp(), epsilon = 1e-6);
    }

    #[test]
    fn tail_stopping() {
        let model = LinearOQSModel::new(1, vec![c(3.0, 0.0)], vec![2.0], vec![]).unwrap();
        let cfg = EvolutionConfig {
            dt: 0.01,
            t_max: 500.0,
            tail_tolerance: 1e-6,
        };
        let prop = propagate_zero_noise(&model, &[c(1.0, 0.0)], &cfg, false).unwrap();
        assert!(prop.reached_tail);
        assert!((prop.overlaps.len() as f64) * cfg.dt < 100.0);
    }

    #[test]
    fn effective_drift_limits() {
        let bath_p = BathParams::superohmic_zero_t(0.8, 0.09).unwrap();
        let model = LinearOQSModel::new(
            2,
            vec![c(3.7, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(3.4, 0.0)],
            vec![1e-4, 0.2],
            vec![Coupling { site: 0, bath: bath_p }],
        )
        .unwrap();
        // t = 0 → −iH − Γ/2 exactly
        let d0 = effective_drift(&model, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut want = Complex64::new(0.0, -1.0) * model.h_s[i * 2 + j];
                if i == j {
                    want -= 0.5 * model.damping[i];
                }
                assert!((d0[i * 2 + j] - want).norm() < 1e-15);
            }
        }
        // long-time limit converges once α has decayed
        let d_a = effective_drift(&model, 150.0).unwrap();
        let d_b = effective_drift(&model, 220.0).unwrap();
        let diff: f64 = d_a
            .iter()
            .zip(&d_b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff < 2e-4, "drift still moving: {diff}");
        // zero coupling → time-independent
        let free = free_model();
        let f0 = effective_drift(&free, 0.0).unwrap();
        let f1 = effective_drift(&free, 77.0).unwrap();
        assert_eq!(f0, f1);
    }

    #[test]
    fn engine_consistent_with_effective_drift() {
        // one RK4 step with the fast path vs. dense drift at matching times
        let bath_p = BathParams::superohmic_zero_t(1.0, 0.12).unwrap();
        let model = LinearOQSModel::new(
            2,
            vec![c(3.5, 0.0), c(0.15, 0.0), c(0.15, 0.0), c(3.2, 0.0)],
            vec![0.0, 0.1],
            vec![Coupling { site: 0, bath: bath_p }],
        )
        .unwrap();
        let cfg = EvolutionConfig {
            dt: 0.02,
            t_max: 8.0,
            tail_tolerance: 0.0,
        };
        let psi0 = [c(0.8, 0.0), c(0.6, 0.0)];
        let prop = propagate_zero_noise(&model, &psi0, &cfg, true).unwrap();
        let states = prop.states.unwrap();
        // midpoint-rule step with the dense drift reproduces the state to O(dt³)
        let k = 100;
        let t = k as f64 * cfg.dt;
        let drift = effective_drift(&model, t + 0.5 * cfg.dt).unwrap();
        let s = &states[k];
        let mut predicted = vec![Complex64::new(0.0, 0.0); 2];
        for i in 0..2 {
            for j in 0..2 {
                predicted[i] += drift[i * 2 + j] * s[j];
            }
        }
        let half: Vec<Complex64> = (0..2).map(|i| s[i] + 0.5 * cfg.dt * predicted[i]).collect();
        let mut next = s.clone();
        for i in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..2 {
                acc += drift[i * 2 + j] * half[j];
            }
            next[i] += cfg.dt * acc;
        }
        for i in 0..2 {
            assert!(
                (next[i] - states[k + 1][i]).norm() < 1e-4,
                "component {i}: {} vs {}",
                next[i],
                states[k + 1][i]
            );
        }
    }
}
