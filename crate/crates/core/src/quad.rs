//! Adaptive Gauss–Kronrod quadrature for complex-valued integrands.
//!
//! A 7-point Gauss / 15-point Kronrod pair is refined by interval bisection
//! until the Kronrod−Gauss discrepancy is below the requested tolerance.
//! Subdivision order is fixed, so results are bit-reproducible.

use num_complex::Complex64;

use crate::error::{Error, Result};

// QUADPACK dqk15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_8,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Integral estimate.
    pub value: Complex64,
    /// Absolute error estimate (sum of per-interval Kronrod−Gauss gaps).
    pub error: f64,
    /// Number of integrand evaluations.
    pub evals: usize,
}

fn kronrod_panel<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, Complex64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kron * half, gauss * half)
}

/// Integrate `f` over `[a, b]`, bisecting until the local error estimate of
/// every interval is below its share of `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    adaptive_panels(f, &[a, b], rel_tol, abs_tol)
}

/// Like [`adaptive`], but starting from caller-supplied panel boundaries.
/// Oscillatory integrands converge much faster when the initial panels
/// already resolve the oscillation period.
pub fn adaptive_panels<F: Fn(f64) -> Complex64>(
    f: F,
    boundaries: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    const MAX_DEPTH: u32 = 40;
    const MAX_EVALS: usize = 4_000_000;

    assert!(boundaries.len() >= 2, "need at least one panel");
    let mut evals = 0usize;

    // first pass: one Kronrod panel per initial interval
    let mut stack: Vec<(f64, f64, u32, Complex64, f64)> = Vec::new();
    let mut rough = Complex64::new(0.0, 0.0);
    for w in boundaries.windows(2) {
        let (k, g) = kronrod_panel(&f, w[0], w[1]);
        evals += 15;
        rough += k;
        stack.push((w[0], w[1], 0, k, (k - g).norm()));
    }

    let mut value = Complex64::new(0.0, 0.0);
    let mut err_sum = 0.0;
    let total_len: f64 = boundaries.last().unwrap() - boundaries[0];

    while let Some((a, b, depth, k, e)) = stack.pop() {
        let budget = abs_tol.max(rel_tol * rough.norm());
        let local = budget * ((b - a) / total_len).abs();
        if e <= local || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && e > local {
                return Err(Error::numerics(format!(
                    "quadrature stalled on [{a:.6e}, {b:.6e}]: local error {e:.3e} > {local:.3e} at depth {depth}"
                )));
            }
            value += k;
            err_sum += e;
            continue;
        }
        if evals > MAX_EVALS {
            return Err(Error::numerics(format!(
                "quadrature exceeded {MAX_EVALS} evaluations (error so far {err_sum:.3e})"
            )));
        }
        let mid = 0.5 * (a + b);
        let (k1, g1) = kronrod_panel(&f, a, mid);
        let (k2, g2) = kronrod_panel(&f, mid, b);
        evals += 30;
        // refresh the rough estimate with the refined value of this interval
        rough += k1 + k2 - k;
        stack.push((mid, b, depth + 1, k2, (k2 - g2).norm()));
        stack.push((a, mid, depth + 1, k1, (k1 - g1).norm()));
    }

    let budget = abs_tol.max(rel_tol * value.norm());
    if err_sum > budget * 10.0 {
        return Err(Error::numerics(format!(
            "quadrature error estimate {err_sum:.3e} exceeds tolerance {budget:.3e}"
        )));
    }
    Ok(QuadResult {
        value,
        error: err_sum,
        evals,
    })
}

/// Uniform panel boundaries over `[a, b]` sized so that a phase advancing at
/// `phase_rate` rad per unit covers at most ~2π per panel.
pub fn oscillation_panels(a: f64, b: f64, phase_rate: f64) -> Vec<f64> {
    let span = b - a;
    let n = ((span * phase_rate.abs() / std::f64::consts::TAU).ceil() as usize).clamp(1, 100_000);
    (0..=n).map(|i| a + span * i as f64 / n as f64).collect()
}
