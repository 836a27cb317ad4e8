//! Transfer-matrix optics for planar multilayers at oblique incidence with
//! dispersive, absorbing layers.
//!
//! Field amplitudes are propagated with interface (Fresnel) and layer-phase
//! matrices; complex layer angles follow Snell's law with the decaying branch
//! Im(n·cosθ) ≥ 0, so evanescent and absorbed waves shrink into each layer.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::materials::MaterialTable;
use crate::response::{Spectrum, SpectrumRole};
use crate::units::HBAR_C_EV_NM;

/// Linear polarization of the incoming plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// TE: field along the layer plane, transverse to the plane of incidence.
    S,
    /// TM.
    P,
}

/// How a layer's complex refractive index is supplied.
#[derive(Debug, Clone)]
pub enum IndexModel {
    /// Energy-independent n + ik.
    Constant(Complex64),
    /// Tabulated material data, interpolated linearly in energy.
    Table(MaterialTable),
    /// A computed refractive-index spectrum.
    Model(Spectrum),
}

impl IndexModel {
    /// Evaluate at `energy` (eV).
    pub fn index_at(&self, energy: f64) -> Result<Complex64> {
        match self {
            IndexModel::Constant(n) => Ok(*n),
            IndexModel::Table(t) => t.index_at(energy),
            IndexModel::Model(s) => s.sample(energy),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IndexModel::Constant(n) => {
                if n.im < 0.0 {
                    return Err(Error::invalid_model(format!(
                        "constant index {n} has Im n < 0 (gain); not supported in stacks"
                    )));
                }
            }
            IndexModel::Table(t) => {
                if t.index.iter().any(|n| n.im < -1e-12) {
                    return Err(Error::invalid_model(
                        "tabulated index has Im n < 0 (gain)".to_string(),
                    ));
                }
            }
            IndexModel::Model(s) => {
                if s.role != SpectrumRole::RefractiveIndex {
                    return Err(Error::invalid_model(format!(
                        "layer spectrum must be a refractive index, got {:?}",
                        s.role
                    )));
                }
                if !s.gain_flagged && s.values.iter().any(|n| n.im < -1e-12) {
                    return Err(Error::invalid_model(
                        "index spectrum has Im n < 0 without a gain flag".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Layer thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thickness {
    /// Bounding half-space.
    SemiInfinite,
    /// Finite thickness in nm.
    Finite(f64),
}

/// One layer of the stack.
#[derive(Debug, Clone)]
pub struct Layer {
    /// Geometric thickness.
    pub thickness: Thickness,
    /// Complex refractive index source.
    pub index: IndexModel,
}

impl Layer {
    /// Finite layer of `d_nm` nm.
    pub fn finite(d_nm: f64, index: IndexModel) -> Result<Self> {
        if !(d_nm > 0.0) {
            return Err(Error::invalid_model(format!("layer thickness {d_nm} nm must be > 0")));
        }
        index.validate()?;
        Ok(Self {
            thickness: Thickness::Finite(d_nm),
            index,
        })
    }

    /// Bounding half-space.
    pub fn semi_infinite(index: IndexModel) -> Result<Self> {
        index.validate()?;
        Ok(Self {
            thickness: Thickness::SemiInfinite,
            index,
        })
    }
}

/// Planar multilayer: ambient half-space, finite layers, substrate half-space.
#[derive(Debug, Clone)]
pub struct Stack {
    /// Incidence side.
    pub ambient: Layer,
    /// Finite layers, front to back.
    pub layers: Vec<Layer>,
    /// Exit side.
    pub substrate: Layer,
}

impl Stack {
    /// Validated constructor.
    pub fn new(ambient: Layer, layers: Vec<Layer>, substrate: Layer) -> Result<Self> {
        if ambient.thickness != Thickness::SemiInfinite
            || substrate.thickness != Thickness::SemiInfinite
        {
            return Err(Error::invalid_model(
                "ambient and substrate must be semi-infinite".to_string(),
            ));
        }
        if layers.iter().any(|l| l.thickness == Thickness::SemiInfinite) {
            return Err(Error::invalid_model("interior layers must be finite".to_string()));
        }
        Ok(Self {
            ambient,
            layers,
            substrate,
        })
    }
}

/// Complex amplitudes and power coefficients for one (E, θ, pol) sample.
#[derive(Debug, Clone, Copy)]
pub struct ReflectTransmit {
    /// Complex reflection amplitude.
    pub r: Complex64,
    /// Complex transmission amplitude.
    pub t: Complex64,
    /// Power reflectance |r|².
    pub big_r: f64,
    /// Power transmittance with the exit-medium admittance factor.
    pub big_t: f64,
    /// Set when the substrate wave is evanescent (total internal reflection).
    pub evanescent_exit: bool,
}

/// Decaying-branch cosine of the propagation angle in a medium.
fn cos_theta_in(n: Complex64, n0_sin0: f64) -> Complex64 {
    let s = Complex64::new(n0_sin0, 0.0) / n;
    let c = (Complex64::new(1.0, 0.0) - s * s).sqrt();
    let ncos = n * c;
    // forward wave: decaying into the medium, or propagating away from the source
    let forward = if ncos.im.abs() > 1e-12 * ncos.norm() {
        ncos.im > 0.0
    } else {
        ncos.re > 0.0
    };
    if forward {
        c
    } else {
        -c
    }
}

fn fresnel(
    pol: Polarization,
    ni: Complex64,
    ci: Complex64,
    nf: Complex64,
    cf: Complex64,
) -> (Complex64, Complex64) {
    match pol {
        Polarization::S => {
            let denom = ni * ci + nf * cf;
            ((ni * ci - nf * cf) / denom, 2.0 * ni * ci / denom)
        }
        Polarization::P => {
            let denom = nf * ci + ni * cf;
            ((nf * ci - ni * cf) / denom, 2.0 * ni * ci / denom)
        }
    }
}

/// Complex r, t and power R, T of the stack at `energy` (eV), external angle
/// `theta_deg`, and the given polarization.
pub fn reflect_transmit(
    stack: &Stack,
    energy: f64,
    theta_deg: f64,
    pol: Polarization,
) -> Result<ReflectTransmit> {
    if !(0.0..90.0).contains(&theta_deg) {
        return Err(Error::domain(format!("incidence angle {theta_deg}° outside [0°, 90°)")));
    }
    if !(energy > 0.0) {
        return Err(Error::domain(format!("photon energy {energy} eV must be > 0")));
    }
    let n0 = stack.ambient.index.index_at(energy)?;
    if n0.im.abs() > 1e-9 {
        return Err(Error::invalid_model(format!(
            "ambient medium must be transparent, got n = {n0}"
        )));
    }
    let theta = theta_deg.to_radians();
    let n0_sin0 = n0.re * theta.sin();

    // refractive index and angle cosine per medium, front to back
    let mut media: Vec<(Complex64, Complex64)> = Vec::with_capacity(stack.layers.len() + 2);
    media.push((n0, Complex64::new(theta.cos(), 0.0)));
    for layer in &stack.layers {
        let n = layer.index.index_at(energy)?;
        media.push((n, cos_theta_in(n, n0_sin0)));
    }
    let ns = stack.substrate.index.index_at(energy)?;
    media.push((ns, cos_theta_in(ns, n0_sin0)));

    let k0 = energy / HBAR_C_EV_NM; // nm⁻¹

    // M = I_{0,1} · Π_j P_j · I_{j,j+1};  r = M₁₀/M₀₀, t = 1/M₀₀
    let (r01, t01) = fresnel(pol, media[0].0, media[0].1, media[1].0, media[1].1);
    let mut m = [
        [Complex64::new(1.0, 0.0) / t01, r01 / t01],
        [r01 / t01, Complex64::new(1.0, 0.0) / t01],
    ];
    for (j, layer) in stack.layers.iter().enumerate() {
        let d = match layer.thickness {
            Thickness::Finite(d) => d,
            Thickness::SemiInfinite => unreachable!("validated at construction"),
        };
        let (nj, cj) = media[j + 1];
        let mut delta = k0 * nj * cj * d;
        // fully opaque layers: clip the decaying exponent to keep f64 finite
        if delta.im > 60.0 {
            delta = Complex64::new(delta.re, 60.0);
        }
        let (nf, cf) = media[j + 2];
        let (r, t) = fresnel(pol, nj, cj, nf, cf);
        let em = Complex64::from_polar(1.0, -delta.re) * delta.im.exp();
        let ep = Complex64::from_polar(1.0, delta.re) * (-delta.im).exp();
        let step = [[em / t, r * em / t], [r * ep / t, ep / t]];
        m = [
            [
                m[0][0] * step[0][0] + m[0][1] * step[1][0],
                m[0][0] * step[0][1] + m[0][1] * step[1][1],
            ],
            [
                m[1][0] * step[0][0] + m[1][1] * step[1][0],
                m[1][0] * step[0][1] + m[1][1] * step[1][1],
            ],
        ];
    }

    let r = m[1][0] / m[0][0];
    let t = Complex64::new(1.0, 0.0) / m[0][0];
    let (ni, ci) = media[0];
    let (nf, cf) = *media.last().unwrap();
    let t_factor = match pol {
        Polarization::S => (nf * cf).re / (ni * ci).re,
        Polarization::P => (nf * cf.conj()).re / (ni * ci.conj()).re,
    };
    let big_t = t.norm_sqr() * t_factor;
    Ok(ReflectTransmit {
        r,
        t,
        big_r: r.norm_sqr(),
        big_t,
        evanescent_exit: (nf * cf).re.abs() < 1e-12,
    })
}

/// Absorbed fraction A = 1 − R − T.
///
/// A below −10⁻⁸ means a branch or gain bug upstream and is a hard error.
pub fn absorption(stack: &Stack, energy: f64, theta_deg: f64, pol: Polarization) -> Result<f64> {
    let rt = reflect_transmit(stack, energy, theta_deg, pol)?;
    let a = 1.0 - rt.big_r - rt.big_t;
    if a < -1e-8 {
        return Err(Error::numerics(format!(
            "negative absorption A = {a:.3e} at E = {energy} eV, θ = {theta_deg}°"
        )));
    }
    Ok(a)
}

/// Reflectivity sampled on an (energy × angle) grid.
#[derive(Debug, Clone)]
pub struct ReflectivityMap {
    /// Energy grid in eV (rows).
    pub energies: Vec<f64>,
    /// Angle grid in degrees (columns).
    pub thetas_deg: Vec<f64>,
    /// R[row][col] = R(energies[row], thetas_deg[col]).
    pub values: Vec<Vec<f64>>,
}

impl ReflectivityMap {
    /// Column of R(E) at angle index `col`.
    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[col]).collect()
    }
}

/// Evaluate R over the grid. The builder may supply a different stack per
/// angle (a cavity's effective index depends on the probed wavevector).
pub fn reflectivity_map<F>(
    stack_builder: F,
    energies: &[f64],
    thetas_deg: &[f64],
    pol: Polarization,
) -> Result<ReflectivityMap>
where
    F: Fn(f64) -> Result<Stack> + Sync,
{
    let stacks: Vec<Stack> = thetas_deg
        .iter()
        .map(|&th| stack_builder(th))
        .collect::<Result<_>>()?;
    let ne = energies.len();
    let nt = thetas_deg.len();
    let flat: Vec<Result<f64>> = exec::map_indexed(ne * nt, |idx| {
        let (ei, ti) = (idx / nt, idx % nt);
        reflect_transmit(&stacks[ti], energies[ei], thetas_deg[ti], pol).map(|rt| rt.big_r)
    });
    let mut values = Vec::with_capacity(ne);
    let mut it = flat.into_iter();
    for _ in 0..ne {
        let mut row = Vec::with_capacity(nt);
        for _ in 0..nt {
            row.push(it.next().unwrap()?);
        }
        values.push(row);
    }
    Ok(ReflectivityMap {
        energies: energies.to_vec(),
        thetas_deg: thetas_deg.to_vec(),
        values,
    })
}

/// Vacuum half-space.
pub fn vacuum() -> Layer {
    Layer {
        thickness: Thickness::SemiInfinite,
        index: IndexModel::Constant(Complex64::new(1.0, 0.0)),
    }
}
