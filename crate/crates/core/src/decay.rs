//! Decay rate `λ` of the first-passage density, `f ~ e^{-λτ}`.
//!
//! The ratios `x_r = h_r(y₊)/h_{r+1}(y₊)` converge (slowly) to `λ`; the
//! modified Aitken transform `𝒜₁` is exact for `x_r = λ + 1/(α + βr)` and
//! is used for the estimate. Closed forms cover the worked examples.

use serde::Serialize;

use crate::error::{ensure, FptError, Result};
use crate::forcefield::{Builtin, ForceField, InvariantMeasure};
use crate::hseries::{build_table, HGrid, HTable};
use crate::oupcf::rightmost_zero;
use crate::roots::bisect;

/// Relative size of `|δ_{r-1} - δ_r|` below which an accelerated term is
/// considered unstable, in units of machine epsilon.
pub const STABILITY_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Serialize)]
pub struct DecayEstimate {
    pub y_plus: f64,
    /// `x_r`, `r = 1..r_max-1`.
    pub x: Vec<f64>,
    /// `δ_r = x_r - x_{r-1}`, `r = 2..r_max-1`.
    pub delta: Vec<f64>,
    /// `(𝒜₁x)_r`, `r = 3..r_max-1`; `None` where the guard tripped.
    pub accel: Vec<Option<f64>>,
    pub lambda: f64,
    /// False when no accelerated term was stable and `lambda` is the last
    /// raw ratio.
    pub accelerated: bool,
}

/// `x_r = h_r(y₊)/h_{r+1}(y₊)` for `r = 1..r_max-1`.
pub fn ratio_sequence(table: &HTable, y_plus: f64) -> Result<Vec<f64>> {
    (1..table.r_max)
        .map(|r| Ok(table.value_at(r, y_plus)? / table.value_at(r + 1, y_plus)?))
        .collect()
}

fn differences(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn accelerate(x: &[f64], num: impl Fn(f64, f64) -> f64) -> Vec<Option<f64>> {
    let d = differences(x);
    (2..x.len())
        .map(|r| {
            let (dp, dr) = (d[r - 2], d[r - 1]);
            let den = dp - dr;
            if den.abs() < STABILITY_FACTOR * f64::EPSILON * x[r].abs() || !den.is_finite() {
                None
            } else {
                Some(x[r] + num(dp, dr) / den)
            }
        })
        .collect()
}

/// Classical Aitken `x_r + δ_r²/(δ_{r-1} - δ_r)`.
pub fn aitken_a0(x: &[f64]) -> Vec<Option<f64>> {
    accelerate(x, |_, dr| dr * dr)
}

/// Modified Aitken `x_r + δ_r(δ_r + δ_{r-1})/(δ_{r-1} - δ_r)`.
pub fn aitken_a1(x: &[f64]) -> Vec<Option<f64>> {
    accelerate(x, |dp, dr| dr * (dr + dp))
}

/// `𝒜₁` applied `depth` times, each pass using the leading run of stable
/// terms from the previous one.
pub fn aitken_a1_iterated(x: &[f64], depth: usize) -> Vec<Option<f64>> {
    let mut cur: Vec<f64> = x.to_vec();
    let mut out = Vec::new();
    for _ in 0..depth {
        out = aitken_a1(&cur);
        cur = out.iter().map_while(|v| *v).collect();
        if cur.len() < 3 {
            break;
        }
    }
    out
}

/// `λ` from `h₁..h_{r_max}` with the default grid ending at `y₊`.
pub fn estimate_lambda(ff: &ForceField, im: &InvariantMeasure, y_plus: f64, r_max: usize) -> Result<DecayEstimate> {
    ensure(r_max >= 4, || format!("r_max must be at least 4, got {r_max}"))?;
    let table = build_table(ff, im, HGrid::to(y_plus), r_max)?;
    estimate_from_table(&table, y_plus)
}

/// `λ` at any `y₊` covered by an existing table.
pub fn estimate_from_table(table: &HTable, y_plus: f64) -> Result<DecayEstimate> {
    let x = ratio_sequence(table, y_plus)?;
    let delta = differences(&x);
    let accel = aitken_a1(&x);
    let (lambda, accelerated) = match accel.iter().find_map(|v| *v) {
        Some(v) => (v, true),
        None => (*x.last().unwrap(), false),
    };
    Ok(DecayEstimate { y_plus, x, delta, accel, lambda, accelerated })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    FarLeft,
    FarRight,
}

/// Barrier-limit asymptotes: `ψ²/(4Ψ²)` far left and `-A ψ` far right.
pub fn lambda_asymptotic(ff: &ForceField, im: &InvariantMeasure, y_plus: f64, side: Side) -> f64 {
    match side {
        Side::FarLeft => {
            let h = im.cdf_over_pdf(y_plus);
            0.25 / (h * h)
        }
        Side::FarRight => -ff.a(y_plus) * im.psi(y_plus),
    }
}

/// Exact decay rate for a built-in model.
///
/// For tanh this is only available when `y₊` is the leftmost zero of one of
/// the first three Romanovski polynomials; see [`tanh_polynomial_points`].
pub fn lambda_exact(model: Builtin, y_plus: f64) -> Result<f64> {
    match model {
        Builtin::Ou => rightmost_zero(y_plus),
        Builtin::Abm { mu } => {
            ensure(mu > 0.0, || format!("abm needs mu > 0, got {mu}"))?;
            Ok(0.25 * mu * mu)
        }
        Builtin::DryFriction { mu } => dry_friction_lambda(mu, y_plus),
        Builtin::Tanh { alpha, gamma, form } => {
            let (a, g) = Builtin::tanh_amplitude_rate(alpha, gamma, form);
            for (n, y, lam) in tanh_polynomial_points(a, g) {
                if (y - y_plus).abs() <= 1e-9 * (1.0 + y.abs()) {
                    log::debug!("tanh: barrier at zero of P_{n}");
                    return Ok(lam);
                }
            }
            Err(FptError::NoPolynomialEigenvalue(format!(
                "y+ = {y_plus} is not a leftmost Romanovski zero for a = {a}, g = {g}"
            )))
        }
    }
}

/// Rightmost pole of the dry-friction transform, or the branch point
/// `μ²/4` when `y₊ ≤ 1/μ`.
pub fn dry_friction_lambda(mu: f64, y_plus: f64) -> Result<f64> {
    ensure(mu > 0.0 && mu.is_finite(), || format!("dry-friction needs mu > 0, got {mu}"))?;
    if y_plus <= 1.0 / mu {
        return Ok(0.25 * mu * mu);
    }
    // With p = √(μ²+4s) = μ - d, the pole condition p/μ = 1 - e^{-p y₊}
    // divided by p is decreasing in p; solve for d to keep λ = d(2μ-d)/4
    // accurate when it is tiny.
    let k = |d: f64| {
        let p = mu - d;
        -(-p * y_plus).exp_m1() / p - 1.0 / mu
    };
    let d_hi = mu * (1.0 - 1e-15);
    let d = bisect(|d| Ok(k(d)), 0.0, d_hi, k(0.0), k(d_hi), 0.0)?;
    Ok(0.25 * d * (2.0 * mu - d))
}

/// `(n, y₊, λ_n)` for `A = -a tanh(g y)`: a barrier at the leftmost zero
/// of the n-th Romanovski polynomial gives `λ_n = n g (a - n g)`.
pub fn tanh_polynomial_points(a: f64, g: f64) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    if a > g {
        out.push((1, 0.0, g * (a - g)));
    }
    if a > 2.0 * g {
        let w = -(g / (a - 2.0 * g)).sqrt();
        out.push((2, w.asinh() / g, 2.0 * g * (a - 2.0 * g)));
    }
    if a > 4.0 * g {
        let w = -(3.0 * g / (a - 4.0 * g)).sqrt();
        out.push((3, w.asinh() / g, 3.0 * g * (a - 3.0 * g)));
    }
    out
}

/// `λ₁..λ_n` from `λ_{k+1} = λ_k + g(a - g) - 2g²k`.
pub fn tanh_ladder(a: f64, g: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut lam = g * (a - g);
    for k in 1..=n {
        out.push(lam);
        lam += g * (a - g) - 2.0 * g * g * k as f64;
    }
    out
}
