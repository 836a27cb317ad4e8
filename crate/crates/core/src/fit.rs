//! χ² fitting of model parameters to measured spectra: thin-film absorption
//! (free: ε_s, σ, ξ, scale) and cavity reflectivity minima (free: n_r, E(0),
//! Ω, μ_c/μ).
//!
//! The objective involves quadrature and ODE propagation, so the optimizer is
//! a derivative-free Nelder–Mead simplex with bound handling by reflection.
//! Everything is deterministic: identical inputs give bit-identical fits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::holstein::{self, ThinFilmParams};
use crate::htc::{CavityParams, CavitySetup, HtcParams};
use crate::tmm::{IndexModel, Polarization};

/// A measured or modeled curve, y(x), sorted in x.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Strictly increasing abscissa.
    pub x: Vec<f64>,
    /// Ordinates.
    pub y: Vec<f64>,
}

impl Curve {
    /// Build from points: sorts, averages duplicate abscissae, rejects
    /// non-finite entries. Returns the curve and any normalization warnings.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<(Self, Vec<String>)> {
        if points.is_empty() {
            return Err(Error::data("empty curve".to_string()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::data("curve contains non-finite values".to_string()));
        }
        let mut warnings = Vec::new();
        let mut pts = points;
        if pts.windows(2).any(|w| w[1].0 < w[0].0) {
            warnings.push("input rows were not sorted; sorted by abscissa".to_string());
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut x = Vec::with_capacity(pts.len());
        let mut y = Vec::with_capacity(pts.len());
        let mut i = 0;
        let mut had_dupes = false;
        while i < pts.len() {
            let mut j = i + 1;
            let mut acc = pts[i].1;
            while j < pts.len() && pts[j].0 == pts[i].0 {
                acc += pts[j].1;
                j += 1;
            }
            if j > i + 1 {
                had_dupes = true;
            }
            x.push(pts[i].0);
            y.push(acc / (j - i) as f64);
            i = j;
        }
        if had_dupes {
            warnings.push("duplicate abscissae averaged".to_string());
        }
        Ok((Self { x, y }, warnings))
    }

    /// Linear interpolation; errors outside the range.
    pub fn sample(&self, x: f64) -> Result<f64> {
        let (first, last) = (self.x[0], *self.x.last().unwrap());
        if x < first || x > last {
            return Err(Error::data(format!("abscissa {x} outside curve range [{first}, {last}]")));
        }
        match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => Ok(self.y[i]),
            Err(i) => {
                let w = (x - self.x[i - 1]) / (self.x[i] - self.x[i - 1]);
                Ok(self.y[i - 1] * (1.0 - w) + self.y[i] * w)
            }
        }
    }
}

/// χ² = Σ (model − data)² / max(var, floor), with the model interpolated onto
/// the data grid. Unit variances reduce it to the sum of squared errors.
pub fn chi_squared_weighted(
    model: &Curve,
    data: &Curve,
    variances: Option<&[f64]>,
    floor: f64,
) -> Result<f64> {
    if let Some(v) = variances {
        if v.len() != data.x.len() {
            return Err(Error::data("variance array length mismatch".to_string()));
        }
    }
    let mut chi2 = 0.0;
    for (k, (&x, &d)) in data.x.iter().zip(&data.y).enumerate() {
        let m = model.sample(x)?;
        let var = variances.map(|v| v[k]).unwrap_or(1.0).max(floor);
        chi2 += (m - d) * (m - d) / var;
    }
    Ok(chi2)
}

/// Unweighted χ² (unit variances).
pub fn chi_squared(model: &Curve, data: &Curve) -> Result<f64> {
    chi_squared_weighted(model, data, None, 1e-300)
}

/// One free parameter with bounds and a start value.
#[derive(Debug, Clone)]
pub struct FreeParam {
    /// Key, e.g. `eps_s_eV`.
    pub name: String,
    /// Start value, inside the bounds.
    pub init: f64,
    /// Lower bound.
    pub lo: f64,
    /// Upper bound.
    pub hi: f64,
}

impl FreeParam {
    /// Validated constructor.
    pub fn new(name: &str, init: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain(format!("bounds for {name} must be finite and ordered")));
        }
        if !(lo..=hi).contains(&init) {
            return Err(Error::domain(format!(
                "start value {init} for {name} outside [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            init,
            lo,
            hi,
        })
    }
}

/// Simplex termination settings.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Evaluation budget.
    pub max_evals: usize,
    /// Scaled simplex diameter below which the fit stops.
    pub diameter_tol: f64,
    /// Initial step as a fraction of each bound span.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            diameter_tol: 1e-6,
            initial_step: 0.08,
        }
    }
}

/// Optimizer outcome.
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    /// Best parameter vector.
    pub x: Vec<f64>,
    /// Objective at the best point.
    pub value: f64,
    /// Evaluations spent.
    pub evals: usize,
    /// True when the diameter criterion was met within the budget.
    pub converged: bool,
    /// Best objective after each accepted iteration (non-increasing).
    pub best_history: Vec<f64>,
    /// Indices of parameters that finished within 1e-9·span of a bound.
    pub at_bounds: Vec<usize>,
}

/// Fold a coordinate into its bounds by mirror reflection.
fn reflect_into(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    for _ in 0..64 {
        if x < lo {
            x = lo + (lo - x);
        } else if x > hi {
            x = hi - (x - hi);
        } else {
            return x;
        }
    }
    x.clamp(lo, hi)
}

/// Nelder–Mead with reflective bound handling.
pub fn nelder_mead<F>(objective: F, free: &[FreeParam], opts: &SimplexOptions) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let dim = free.len();
    assert!(dim >= 1, "need at least one free parameter");
    let fold = |x: &mut Vec<f64>| {
        for (v, p) in x.iter_mut().zip(free) {
            *v = reflect_into(*v, p.lo, p.hi);
        }
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        objective(x)
    };

    // initial simplex: start point plus one step along each axis
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let x0: Vec<f64> = free.iter().map(|p| p.init).collect();
    pts.push(x0.clone());
    for d in 0..dim {
        let mut x = x0.clone();
        x[d] += opts.initial_step * (free[d].hi - free[d].lo);
        fold(&mut x);
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(|x| eval(x)).collect();
    let mut history = vec![vals.iter().cloned().fold(f64::INFINITY, f64::min)];

    let diameter = |pts: &[Vec<f64>]| -> f64 {
        (0..dim)
            .map(|d| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for p in pts {
                    lo = lo.min(p[d]);
                    hi = hi.max(p[d]);
                }
                (hi - lo) / (free[d].hi - free[d].lo)
            })
            .fold(0.0, f64::max)
    };

    let mut converged = false;
    while evals.get() < opts.max_evals {
        // order: best first
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let reordered: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        let revals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        pts = reordered;
        vals = revals;

        if diameter(&pts) < opts.diameter_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| pts[..dim].iter().map(|p| p[d]).sum::<f64>() / dim as f64)
            .collect();
        let worst = pts[dim].clone();
        let mut xr: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + (c - w))
            .collect();
        fold(&mut xr);
        let fr = eval(&xr);

        if fr < vals[0] {
            // try expansion
            let mut xe: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            fold(&mut xe);
            let fe = eval(&xe);
            if fe < fr {
                pts[dim] = xe;
                vals[dim] = fe;
            } else {
                pts[dim] = xr;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            pts[dim] = xr;
            vals[dim] = fr;
        } else {
            // contraction (outside if the reflection helped at all)
            let (anchor, f_anchor) = if fr < vals[dim] {
                (xr.clone(), fr)
            } else {
                (worst.clone(), vals[dim])
            };
            let mut xc: Vec<f64> = centroid
                .iter()
                .zip(&anchor)
                .map(|(c, a)| c + 0.5 * (a - c))
                .collect();
            fold(&mut xc);
            let fc = eval(&xc);
            if fc < f_anchor {
                pts[dim] = xc;
                vals[dim] = fc;
            } else {
                // shrink toward the best point
                for i in 1..=dim {
                    let mut x: Vec<f64> = pts[0]
                        .iter()
                        .zip(&pts[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    fold(&mut x);
                    vals[i] = eval(&x);
                    pts[i] = x;
                }
            }
        }
        let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let prev = *history.last().unwrap();
        history.push(best.min(prev));
    }

    let best_idx = (0..=dim)
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        .unwrap();
    let x = pts[best_idx].clone();
    let at_bounds = (0..dim)
        .filter(|&d| {
            let span = free[d].hi - free[d].lo;
            (x[d] - free[d].lo).abs() < 1e-9 * span || (free[d].hi - x[d]).abs() < 1e-9 * span
        })
        .collect();
    SimplexOutcome {
        value: vals[best_idx],
        x,
        evals: evals.get(),
        converged,
        best_history: history,
        at_bounds,
    }
}

/// A located minimum of a sampled curve.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    /// Sub-grid position from parabolic refinement.
    pub position: f64,
    /// Curve value at the refined minimum.
    pub value: f64,
    /// Rise to the lower of the two flanking maxima.
    pub prominence: f64,
    /// Full width at half prominence.
    pub width: f64,
}

/// Local minima by discrete second difference with parabolic sub-grid
/// refinement. Monotone curves yield an empty list.
pub fn find_minima(curve: &Curve) -> Vec<Minimum> {
    let n = curve.x.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        let (y0, y1, y2) = (curve.y[i - 1], curve.y[i], curve.y[i + 1]);
        if !(y1 < y0 && y1 <= y2) || (y1 == y2 && i + 2 < n && curve.y[i + 2] <= y1) {
            continue;
        }
        let (x0, x1, x2) = (curve.x[i - 1], curve.x[i], curve.x[i + 1]);
        // parabola through the three points
        let d1 = (y1 - y0) / (x1 - x0);
        let d2 = (y2 - y1) / (x2 - x1);
        let curv = 2.0 * (d2 - d1) / (x2 - x0);
        let (pos, val) = if curv > 0.0 {
            // vertex of the interpolating parabola (3-point form, uneven spacing)
            let denom = d2 - d1;
            let xv = if denom.abs() > 0.0 {
                0.5 * ((x0 + x1) - d1 * (x2 - x0) / denom)
            } else {
                x1
            };
            let xv = xv.clamp(x0, x2);
            // evaluate the parabola at the vertex
            let l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
            (xv, y0 * l0 + y1 * l1 + y2 * l2)
        } else {
            (x1, y1)
        };
        // prominence: walk to the highest point before the curve next rises past it
        let mut left_max = y0;
        for j in (0..i).rev() {
            if curve.y[j] < curve.y[j + 1] && curve.y[j] < y1 {
                break;
            }
            left_max = left_max.max(curve.y[j]);
        }
        let mut right_max = y2;
        for j in i + 2..n {
            if curve.y[j] < curve.y[j - 1] && curve.y[j] < y1 {
                break;
            }
            right_max = right_max.max(curve.y[j]);
        }
        let prominence = left_max.min(right_max) - val;
        // width at half prominence
        let target = val + 0.5 * prominence;
        let mut xl = curve.x[0];
        for j in (0..=i).rev() {
            if curve.y[j] >= target {
                let (xa, xb) = (curve.x[j], curve.x[j + 1.min(n - 1)]);
                let (ya, yb) = (curve.y[j], curve.y[j + 1.min(n - 1)]);
                xl = if (ya - yb).abs() > 0.0 {
                    xa + (ya - target) / (ya - yb) * (xb - xa)
                } else {
                    xa
                };
                break;
            }
        }
        let mut xr = *curve.x.last().unwrap();
        for j in i..n {
            if curve.y[j] >= target {
                let (xa, xb) = (curve.x[j - 1], curve.x[j]);
                let (ya, yb) = (curve.y[j - 1], curve.y[j]);
                xr = if (yb - ya).abs() > 0.0 {
                    xa + (target - ya) / (yb - ya) * (xb - xa)
                } else {
                    xb
                };
                break;
            }
        }
        out.push(Minimum {
            position: pos,
            value: val,
            prominence,
            width: xr - xl,
        });
    }
    out
}

/// The two deepest minima (by prominence), returned in energy order.
pub fn two_deepest_minima(curve: &Curve) -> Vec<Minimum> {
    let mut minima = find_minima(curve);
    minima.sort_by(|a, b| b.prominence.partial_cmp(&a.prominence).unwrap());
    minima.truncate(2);
    minima.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
    minima
}

/// Thin-film fit setup. Fixed per the measured film: a, γ, n_bg; free by
/// default: ε_s, σ, ξ, scale.
#[derive(Debug, Clone)]
pub struct ThinFilmFitProblem {
    /// Template providing the fixed parameters.
    pub template: ThinFilmParams,
    /// Free parameters; names among `eps_s_eV`, `sigma_eV`, `xi_eV`, `scale`.
    pub free: Vec<FreeParam>,
    /// Film thickness in nm.
    pub thickness_nm: f64,
    /// Incidence angle in degrees.
    pub theta_deg: f64,
    /// Substrate index.
    pub substrate: Complex64,
    /// Trace step used inside the objective.
    pub trace_dt: f64,
    /// Optimizer settings.
    pub options: SimplexOptions,
}

impl ThinFilmFitProblem {
    /// Standard four-parameter problem around a start guess.
    pub fn standard(start: &ThinFilmParams, thickness_nm: f64, theta_deg: f64) -> Result<Self> {
        Ok(Self {
            template: start.clone(),
            free: vec![
                FreeParam::new("eps_s_eV", start.eps_s, start.eps_s - 0.4, start.eps_s + 0.4)?,
                FreeParam::new("sigma_eV", start.sigma, 0.01, 0.5)?,
                FreeParam::new("xi_eV", start.bath.xi, 0.02, 0.3)?,
                FreeParam::new("scale", start.scale, 0.01, 3.0)?,
            ],
            thickness_nm,
            theta_deg,
            substrate: Complex64::new(1.46, 0.0),
            trace_dt: 0.01,
            options: SimplexOptions::default(),
        })
    }

    fn apply(&self, x: &[f64]) -> Result<ThinFilmParams> {
        let mut p = self.template.clone();
        for (v, fp) in x.iter().zip(&self.free) {
            match fp.name.as_str() {
                "eps_s_eV" => p.eps_s = *v,
                "sigma_eV" => p.sigma = *v,
                "xi_eV" => p.bath.xi = *v,
                "scale" => p.scale = *v,
                other => {
                    return Err(Error::domain(format!("unknown thin-film fit parameter {other}")))
                }
            }
        }
        Ok(p)
    }
}

/// Thin-film fit result.
#[derive(Debug, Clone)]
pub struct ThinFilmFit {
    /// Best-fit parameters.
    pub params: ThinFilmParams,
    /// Final χ².
    pub chi2: f64,
    /// Objective evaluations spent.
    pub evals: usize,
    /// Simplex converged within budget.
    pub converged: bool,
    /// Quadratic-approximation standard errors, one per free parameter.
    pub uncertainties: Vec<f64>,
    /// Set when the quadratic form at the optimum is near-singular.
    pub non_identifiable: bool,
    /// Best χ² per iteration.
    pub history: Vec<f64>,
}

fn model_absorption_curve(
    p: &ThinFilmParams,
    problem: &ThinFilmFitProblem,
    grid: &[f64],
) -> Result<Curve> {
    let t_max = holstein::auto_t_max(p)?;
    let trace = holstein::dipole_correlation_thin_film(p, problem.trace_dt, t_max)?;
    let chi = crate::response::susceptibility(&trace, grid, p.scale)?;
    let eps = crate::response::dielectric(&chi, p.n_bg)?;
    let n = crate::response::refractive_index(&eps)?;
    let stack = crate::tmm::Stack::new(
        crate::tmm::vacuum(),
        vec![crate::tmm::Layer::finite(problem.thickness_nm, IndexModel::Model(n))?],
        crate::tmm::Layer::semi_infinite(IndexModel::Constant(problem.substrate))?,
    )?;
    let y: Result<Vec<f64>> = grid
        .iter()
        .map(|&e| crate::tmm::absorption(&stack, e, problem.theta_deg, Polarization::S))
        .collect();
    Ok(Curve {
        x: grid.to_vec(),
        y: y?,
    })
}

/// Fit the thin-film model to a measured absorption curve by pointwise χ² of
/// the TMM-computed A(E).
pub fn fit_thin_film(data: &Curve, problem: &ThinFilmFitProblem) -> Result<ThinFilmFit> {
    if data.x.len() < problem.free.len() + 1 {
        return Err(Error::data("fewer data points than free parameters".to_string()));
    }
    let objective = |x: &[f64]| -> f64 {
        match problem
            .apply(x)
            .and_then(|p| model_absorption_curve(&p, problem, &data.x))
            .and_then(|m| chi_squared(&m, data))
        {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = nelder_mead(objective, &problem.free, &problem.options);
    debug_assert!(outcome
        .best_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12));

    // quadratic-approximation errors from a finite-difference Hessian
    let dim = problem.free.len();
    let steps: Vec<f64> = problem
        .free
        .iter()
        .map(|p| 1e-3 * (p.hi - p.lo))
        .collect();
    let mut hess = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let f0 = outcome.value;
    for i in 0..dim {
        for j in i..dim {
            let mut xpp = outcome.x.clone();
            let mut xpm = outcome.x.clone();
            let mut xmp = outcome.x.clone();
            let mut xmm = outcome.x.clone();
            xpp[i] += steps[i];
            xpp[j] += steps[j];
            xpm[i] += steps[i];
            xpm[j] -= steps[j];
            xmp[i] -= steps[i];
            xmp[j] += steps[j];
            xmm[i] -= steps[i];
            xmm[j] -= steps[j];
            let h = if i == j {
                let mut xp = outcome.x.clone();
                let mut xm = outcome.x.clone();
                xp[i] += steps[i];
                xm[i] -= steps[i];
                (objective(&xp) - 2.0 * f0 + objective(&xm)) / (steps[i] * steps[i])
            } else {
                (objective(&xpp) - objective(&xpm) - objective(&xmp) + objective(&xmm))
                    / (4.0 * steps[i] * steps[j])
            };
            hess[(i, j)] = h;
            hess[(j, i)] = h;
        }
    }
    let dof = (data.x.len() as f64 - dim as f64).max(1.0);
    let s2 = (outcome.value / dof).max(0.0);
    // condition of the bound-scaled quadratic form decides identifiability
    let mut scaled = hess.clone();
    for i in 0..dim {
        for j in 0..dim {
            scaled[(i, j)] *= (problem.free[i].hi - problem.free[i].lo)
                * (problem.free[j].hi - problem.free[j].lo);
        }
    }
    let eigs = scaled.symmetric_eigen().eigenvalues;
    let max_eig = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let non_identifiable = !(min_eig > 0.0) || max_eig / min_eig > 1e8;
    let uncertainties = match hess.clone().try_inverse() {
        Some(inv) => (0..dim)
            .map(|i| (2.0 * s2.max(f64::MIN_POSITIVE) * inv[(i, i)]).max(0.0).sqrt())
            .collect(),
        None => vec![f64::NAN; dim],
    };

    Ok(ThinFilmFit {
        params: problem.apply(&outcome.x)?,
        chi2: outcome.value,
        evals: outcome.evals,
        converged: outcome.converged,
        uncertainties,
        non_identifiable,
        history: outcome.best_history,
    })
}

/// Reflectivity minima observed at one angle.
#[derive(Debug, Clone, Copy)]
pub struct MinimaRow {
    /// Probe angle in degrees.
    pub angle_deg: f64,
    /// Lower-polariton dip position, eV.
    pub e_lp: f64,
    /// Upper-polariton dip position, eV.
    pub e_up: f64,
    /// Reflectivity value at the LP dip.
    pub depth_lp: f64,
    /// Reflectivity value at the UP dip.
    pub depth_up: f64,
}

/// Cavity fit setup: free (n_r, E(0), Ω, μ_c ratio) against minima data.
#[derive(Debug, Clone)]
pub struct CavityFitProblem {
    /// Template setup; cavity mode grid is rebuilt per trial from the angle span.
    pub template: CavitySetup,
    /// Free parameters among `n_r`, `e0_eV`, `rabi_eV`, `mu_c_ratio`.
    pub free: Vec<FreeParam>,
    /// Number of cavity modes.
    pub n_modes: usize,
    /// Angle span the mode grid covers, degrees.
    pub angle_span: (f64, f64),
    /// Energy grid for the model reflectivity curves.
    pub energies: Vec<f64>,
    /// Position residuals are normalized by this (eV).
    pub position_norm: f64,
    /// Depth residuals are normalized by this (reflectivity units).
    pub depth_norm: f64,
    /// Relative weight of depth terms against position terms.
    pub depth_weight: f64,
    /// Optimizer settings.
    pub options: SimplexOptions,
}

impl CavityFitProblem {
    /// Standard four-parameter problem around the template's values.
    pub fn standard(template: CavitySetup, energies: Vec<f64>) -> Result<Self> {
        let c = &template.cavity;
        let free = vec![
            FreeParam::new("n_r", c.n_r, 1.2, 3.5)?,
            FreeParam::new("e0_eV", c.e0, c.e0 - 0.5, c.e0 + 0.5)?,
            FreeParam::new("rabi_eV", template.htc.rabi, 0.2, 2.0)?,
            FreeParam::new("mu_c_ratio", c.mu_c_ratio, 0.0, 6.0)?,
        ];
        let n_modes = c.kz_grid.len();
        Ok(Self {
            template,
            free,
            n_modes,
            angle_span: (15.0, 65.0),
            energies,
            position_norm: 0.01,
            depth_norm: 0.01,
            depth_weight: 1.0,
            options: SimplexOptions {
                max_evals: 400,
                diameter_tol: 1e-4,
                ..SimplexOptions::default()
            },
        })
    }

    /// Instantiate a trial setup from a parameter vector.
    pub fn apply(&self, x: &[f64]) -> Result<CavitySetup> {
        let mut setup = self.template.clone();
        let (mut n_r, mut e0, mut rabi, mut ratio) = (
            setup.cavity.n_r,
            setup.cavity.e0,
            setup.htc.rabi,
            setup.cavity.mu_c_ratio,
        );
        for (v, fp) in x.iter().zip(&self.free) {
            match fp.name.as_str() {
                "n_r" => n_r = *v,
                "e0_eV" => e0 = *v,
                "rabi_eV" => rabi = *v,
                "mu_c_ratio" => ratio = *v,
                other => return Err(Error::domain(format!("unknown cavity fit parameter {other}"))),
            }
        }
        let cavity = CavityParams::with_uniform_angle_grid(
            e0,
            n_r,
            setup.cavity.kappa,
            ratio,
            self.n_modes,
            self.angle_span.0,
            self.angle_span.1,
        )?;
        let htc = HtcParams::with_default_positions(
            setup.htc.n_mol,
            setup.htc.eps_s,
            setup.htc.gamma,
            rabi,
            setup.htc.bath,
            &cavity,
        )?;
        setup.cavity = cavity;
        setup.htc = htc;
        Ok(setup)
    }
}

/// Cavity fit result.
#[derive(Debug, Clone)]
pub struct CavityFit {
    /// Best-fit setup.
    pub setup: CavitySetup,
    /// Best-fit vector in the order of the free parameters.
    pub x: Vec<f64>,
    /// Final objective.
    pub chi2: f64,
    /// Objective evaluations.
    pub evals: usize,
    /// Converged within budget.
    pub converged: bool,
    /// Free parameters that ended on a bound.
    pub at_bounds: Vec<usize>,
    /// Angles where dips were unresolved and depth terms were dropped.
    pub dropped_depth_angles: Vec<f64>,
    /// Best objective per iteration.
    pub history: Vec<f64>,
}

/// Minima χ² of one trial against the data rows.
pub fn minima_objective(
    setup: &CavitySetup,
    data: &[MinimaRow],
    energies: &[f64],
    position_norm: f64,
    depth_norm: f64,
    depth_weight: f64,
    dropped: Option<&mut Vec<f64>>,
) -> Result<f64> {
    let mut chi2 = 0.0;
    let mut dropped_angles = Vec::new();
    for row in data {
        let stack = setup.stack(row.angle_deg, energies)?;
        let y: Result<Vec<f64>> = energies
            .iter()
            .map(|&e| {
                crate::tmm::reflect_transmit(&stack, e, row.angle_deg, Polarization::S)
                    .map(|rt| rt.big_r)
            })
            .collect();
        let curve = Curve {
            x: energies.to_vec(),
            y: y?,
        };
        let minima = two_deepest_minima(&curve);
        match minima.len() {
            2 => {
                let (lp, up) = (minima[0], minima[1]);
                chi2 += ((lp.position - row.e_lp) / position_norm).powi(2);
                chi2 += ((up.position - row.e_up) / position_norm).powi(2);
                chi2 += depth_weight * ((lp.value - row.depth_lp) / depth_norm).powi(2);
                chi2 += depth_weight * ((up.value - row.depth_up) / depth_norm).powi(2);
            }
            1 => {
                // unresolved pair: keep position information, drop depths
                let m = minima[0];
                let d_lp = (m.position - row.e_lp) / position_norm;
                let d_up = (m.position - row.e_up) / position_norm;
                chi2 += d_lp * d_lp + d_up * d_up;
                dropped_angles.push(row.angle_deg);
            }
            _ => {
                chi2 += 2.0 * (0.5 / position_norm).powi(2);
                dropped_angles.push(row.angle_deg);
            }
        }
    }
    if let Some(out) = dropped {
        *out = dropped_angles;
    }
    Ok(chi2)
}

/// Fit cavity parameters to observed reflectivity minima.
pub fn fit_cavity(data: &[MinimaRow], problem: &CavityFitProblem) -> Result<CavityFit> {
    if data.len() < 2 {
        return Err(Error::data("cavity fit needs at least two angles".to_string()));
    }
    let objective = |x: &[f64]| -> f64 {
        match problem.apply(x).and_then(|setup| {
            minima_objective(
                &setup,
                data,
                &problem.energies,
                problem.position_norm,
                problem.depth_norm,
                problem.depth_weight,
                None,
            )
        }) {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = nelder_mead(objective, &problem.free, &problem.options);
    debug_assert!(outcome
        .best_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12));
    let setup = problem.apply(&outcome.x)?;
    let mut dropped = Vec::new();
    let _ = minima_objective(
        &setup,
        data,
        &problem.energies,
        problem.position_norm,
        problem.depth_norm,
        problem.depth_weight,
        Some(&mut dropped),
    )?;
    Ok(CavityFit {
        setup,
        x: outcome.x,
        chi2: outcome.value,
        evals: outcome.evals,
        converged: outcome.converged,
        at_bounds: outcome.at_bounds,
        dropped_depth_angles: dropped,
        history: outcome.best_history,
    })
}
