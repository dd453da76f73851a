//! Global short/long-time approximation to the first-passage density
//!
//! ```text
//! f(τ,y₀) = (y₊-y₀) e^{-λτ} / √(π(1-q)³/2θ³) · exp(-θ√q b²/2(1-q))
//!           · (ψ(y₊)/ψ(y₀))^{√q/(1+√q)} · ((1+√q)/2)^ν · e^{ρ(1-√q)/(1+√q)}
//! ```
//!
//! with `q = e^{-2θτ}` and `b = y₊ - y₀`. The constant `ρ` is fixed by
//! requiring unit total mass.

use std::f64::consts::PI;

use ode_solvers::{Dopri5, System, Vector1};
use serde::{Deserialize, Serialize};

use crate::decay::{estimate_lambda, lambda_exact};
use crate::error::{ensure, FptError, Result};
use crate::forcefield::{Builtin, ForceField, InvariantMeasure};
use crate::quad::{FrozenRule, Integrator};
use crate::roots::bisect;
use crate::special::{mills_ratio, norm_cdf};

/// Mean reversion rate `θ̂ = ⟨A²⟩` over the invariant density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaFisher {
    pub value: f64,
    /// `⟨-A'⟩`, equal to `value` for smooth fields.
    pub minus_a_prime: f64,
    /// Set when `ψ` is not normalisable; `value` is then 0.
    pub abm_limit: bool,
}

pub fn theta_fisher(ff: &ForceField, im: &InvariantMeasure) -> Result<ThetaFisher> {
    if !im.normalizable() {
        return Ok(ThetaFisher { value: 0.0, minus_a_prime: 0.0, abm_limit: true });
    }
    let (lo, hi) = im.support(-60.0)?;
    let n = 64;
    let mut breaks: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    if lo < 0.0 && hi > 0.0 {
        breaks.push(0.0);
        breaks.sort_by(f64::total_cmp);
    }
    let integ = Integrator { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 4000 };
    let mass = integ.integrate_breaks(|y| im.psi(y), &breaks)?.value;
    let a2 = integ.integrate_breaks(|y| ff.a(y).powi(2) * im.psi(y), &breaks)?.value / mass;
    let ap = integ.integrate_breaks(|y| -ff.a_prime(y) * im.psi(y), &breaks)?.value / mass;
    let kinked = matches!(ff.builtin_model(), Some(Builtin::DryFriction { .. }));
    if !kinked && (a2 - ap).abs() > 1e-6 * a2 {
        log::warn!("<A^2> = {a2} and <-A'> = {ap} differ; A may not be smooth");
    }
    Ok(ThetaFisher { value: a2, minus_a_prime: ap, abm_limit: false })
}

/// `ν` from `θν = 3θ - 2λ + A'(y₊) + A(y₊)²/2`, using one-sided values at
/// a kink.
pub fn nu_coefficient(ff: &ForceField, theta: f64, lambda: f64, y_plus: f64) -> f64 {
    nu_rhs(ff, theta, lambda, y_plus) / theta
}

/// Right-hand side `3θ - 2λ + A'(y₊) + A(y₊)²/2`.
pub fn nu_rhs(ff: &ForceField, theta: f64, lambda: f64, y_plus: f64) -> f64 {
    let a = ff.a_left(y_plus);
    3.0 * theta - 2.0 * lambda + ff.a_prime(y_plus) + 0.5 * a * a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    Exact,
    Estimate,
    User,
}

/// Overrides for [`DensityModel::new`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DensityOptions {
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    /// Skip calibration and use this `ρ`.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityModel {
    pub label: String,
    pub y0: f64,
    pub y_plus: f64,
    pub theta: f64,
    pub lambda: f64,
    pub lambda_source: LambdaSource,
    pub nu: f64,
    pub rho: f64,
    /// `ln ψ(y₊) - ln ψ(y₀)`.
    pub ln_psi_ratio: f64,
    /// `θ = 0`: inverse-Gaussian form, no `ν` or `ρ` factors.
    pub abm_limit: bool,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Calibration {
    /// `∂(∫f)/∂ρ` at the solution.
    pub sensitivity: f64,
    /// `∫f - 1` re-integrated adaptively at the final `ρ`.
    pub residual: f64,
    /// Set when the mass barely depends on `ρ` (start next to the barrier).
    pub insensitive: bool,
}

/// Default `λ`: closed form where one exists, otherwise the h-series
/// estimate.
pub fn default_lambda(ff: &ForceField, im: &InvariantMeasure, y_plus: f64) -> Result<(f64, LambdaSource)> {
    if let Some(m) = ff.builtin_model() {
        match lambda_exact(m, y_plus) {
            Ok(l) => return Ok((l, LambdaSource::Exact)),
            Err(FptError::NoPolynomialEigenvalue(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((estimate_lambda(ff, im, y_plus, 4)?.lambda, LambdaSource::Estimate))
}

impl DensityModel {
    /// Assemble and (unless `opts.rho` is given) calibrate a model.
    pub fn new(ff: &ForceField, im: &InvariantMeasure, y0: f64, y_plus: f64, opts: DensityOptions) -> Result<Self> {
        ensure(y0 < y_plus, || format!("start {y0} must lie below the barrier {y_plus}"))?;
        let (theta, abm_limit) = match opts.theta {
            Some(t) => {
                ensure(t >= 0.0 && t.is_finite(), || format!("theta must be >= 0, got {t}"))?;
                (t, t == 0.0)
            }
            None => {
                let t = theta_fisher(ff, im)?;
                (t.value, t.abm_limit)
            }
        };
        let (lambda, lambda_source) = match opts.lambda {
            Some(l) => (l, LambdaSource::User),
            None => default_lambda(ff, im, y_plus)?,
        };
        ensure(lambda >= 0.0 && lambda.is_finite(), || format!("lambda must be >= 0, got {lambda}"))?;
        let nu = if abm_limit { 0.0 } else { nu_coefficient(ff, theta, lambda, y_plus) };
        let mut model = DensityModel {
            label: ff.label().to_string(),
            y0,
            y_plus,
            theta,
            lambda,
            lambda_source,
            nu,
            rho: opts.rho.unwrap_or(0.0),
            ln_psi_ratio: im.ln_psi(y_plus) - im.ln_psi(y0),
            abm_limit,
            calibration: None,
        };
        if !abm_limit && opts.rho.is_none() {
            let (rho, cal) = calibrate_rho(&model)?;
            model.rho = rho;
            model.calibration = Some(cal);
        }
        Ok(model)
    }

    /// Same parameters, different start; `ρ` is kept, not recalibrated.
    pub fn with_start(&self, im: &InvariantMeasure, y0: f64) -> Self {
        DensityModel {
            y0,
            ln_psi_ratio: im.ln_psi(self.y_plus) - im.ln_psi(y0),
            calibration: None,
            ..self.clone()
        }
    }

    pub fn distance(&self) -> f64 {
        self.y_plus - self.y0
    }

    /// `ln f` without the `ρ` factor, and the weight `(1-√q)/(1+√q)`
    /// multiplying `ρ`.
    fn ln_parts(&self, tau: f64) -> (f64, f64) {
        let b = self.distance();
        if self.abm_limit {
            let ln = b.ln() - 0.5 * (4.0 * PI * tau.powi(3)).ln() - b * b / (4.0 * tau) - self.lambda * tau
                + 0.5 * self.ln_psi_ratio;
            return (ln, 0.0);
        }
        let th = self.theta;
        let x = th * tau;
        let one_minus_q = -(-2.0 * x).exp_m1();
        // √q/(1-q) = 1/(2 sinh θτ), √q/(1+√q) = 1/(1+e^{θτ}).
        let ln = b.ln() - self.lambda * tau - 0.5 * (PI / 2.0).ln() - 1.5 * one_minus_q.ln() + 1.5 * th.ln()
            - th * b * b / (4.0 * x.sinh())
            + self.ln_psi_ratio / (1.0 + x.exp())
            + self.nu * (0.5 * (1.0 + (-x).exp())).ln();
        (ln, (0.5 * x).tanh())
    }

    pub fn ln_density(&self, tau: f64) -> f64 {
        let (ln, w) = self.ln_parts(tau);
        ln + self.rho * w
    }

    /// `∫₀^∞ f dτ` by adaptive quadrature.
    pub fn normalization(&self) -> Result<f64> {
        Ok(norm_integrator().integrate_breaks(|t| self.ln_density(t).exp(), &self.tau_breaks())?.value)
    }

    /// Quadrature breakpoints spanning the Lévy–Smirnov peak, the reversion
    /// time `1/θ` and the exponential tail.
    fn tau_breaks(&self) -> Vec<f64> {
        let b = self.distance();
        let peak = b * b / 6.0;
        let rate = if self.lambda > 0.0 { self.lambda } else { 1e-3 };
        let end = (60.0 / rate).max(20.0 * peak);
        let mut breaks = vec![0.0];
        let mut t = peak / 64.0;
        while t < end {
            breaks.push(t);
            t *= 2.0;
        }
        breaks.push(end);
        breaks
    }
}

fn norm_integrator() -> Integrator {
    Integrator { abs_tol: 1e-300, rel_tol: 1e-13, max_panels: 4000 }
}

/// `f(τ, y₀)`.
pub fn eval_density(model: &DensityModel, tau: f64) -> Result<f64> {
    ensure(tau > 0.0 && tau.is_finite(), || format!("tau must be positive, got {tau}"))?;
    Ok(model.ln_density(tau).exp())
}

/// `ρ` such that `∫f dτ = 1`.
///
/// The adaptive partition is frozen at the current `ρ` so that the mass is
/// a smooth function of `ρ` during the bisection; the partition is rebuilt
/// at the solution until the adaptive and frozen answers agree.
pub fn calibrate_rho(model: &DensityModel) -> Result<(f64, Calibration)> {
    ensure(model.theta > 0.0, || "calibration needs theta > 0".into())?;
    ensure(model.lambda > 0.0, || "calibration needs lambda > 0".into())?;
    let mut m = model.clone();
    m.rho = 0.0;
    let breaks = m.tau_breaks();
    for _ in 0..4 {
        let (_, rule) = norm_integrator().freeze(|t| m.ln_density(t).exp(), &breaks)?;
        let parts: Vec<(f64, f64, f64)> = rule
            .nodes
            .iter()
            .map(|&(t, w)| {
                let (ln, wt) = m.ln_parts(t);
                (w.ln() + ln, wt, w)
            })
            .collect();
        let rho = solve_frozen(&parts)?;
        m.rho = rho;
        let adaptive = m.normalization()?;
        let residual = adaptive - 1.0;
        if residual.abs() <= 1e-10 {
            let sensitivity = FrozenRule { nodes: rule.nodes.clone() }
                .apply(|t| m.ln_parts(t).1 * m.ln_density(t).exp());
            let cal = Calibration { sensitivity, residual, insensitive: sensitivity < 1e-8 };
            if cal.insensitive {
                log::warn!("normalisation is insensitive to rho ({sensitivity:e}); start is at the barrier");
            }
            return Ok((rho, cal));
        }
        log::debug!("refreezing calibration rule at rho = {rho}, residual {residual:e}");
    }
    Err(FptError::Quadrature { a: 0.0, b: f64::INFINITY, value: m.normalization()?, error: f64::NAN })
}

fn solve_frozen(parts: &[(f64, f64, f64)]) -> Result<f64> {
    // ln Σ exp(ln wᵢ + ln gᵢ + ρ wtᵢ), increasing in ρ.
    let ln_mass = |rho: f64| -> f64 {
        let mx = parts.iter().map(|p| p.0 + rho * p.1).fold(f64::NEG_INFINITY, f64::max);
        mx + parts.iter().map(|p| (p.0 + rho * p.1 - mx).exp()).sum::<f64>().ln()
    };
    let (mut lo, mut hi) = (-20.0, 20.0);
    let (mut f_lo, mut f_hi) = (ln_mass(lo), ln_mass(hi));
    let mut tries = 0;
    while !(f_lo <= 0.0 && f_hi >= 0.0) {
        tries += 1;
        if tries > 12 || !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(FptError::Bracket(format!(
                "normalisation not bracketed on rho in [{lo}, {hi}]: ln mass {f_lo}, {f_hi}"
            )));
        }
        if f_lo > 0.0 {
            lo *= 2.0;
            f_lo = ln_mass(lo);
        }
        if f_hi < 0.0 {
            hi *= 2.0;
            f_hi = ln_mass(hi);
        }
    }
    // Positive weights on `ρ` make ln_mass strictly increasing, so plain
    // bisection to machine precision is safe.
    bisect(|r| Ok(ln_mass(r)), lo, hi, f_lo, f_hi, 0.0)
}

/// `ln` of the Lévy–Smirnov density `b/√(4πτ³) e^{-b²/4τ}`.
pub fn ln_levy_smirnov(b: f64, tau: f64) -> f64 {
    b.ln() - 0.5 * (4.0 * PI * tau.powi(3)).ln() - b * b / (4.0 * tau)
}

/// Exact density for the OU barrier at equilibrium, `y₊ = 0`.
pub fn ou_equilibrium_density(y0: f64, tau: f64) -> f64 {
    ln_ou_equilibrium_density(y0, tau).exp()
}

pub fn ln_ou_equilibrium_density(y0: f64, tau: f64) -> f64 {
    let one_minus_q = -(-2.0 * tau).exp_m1();
    y0.abs().ln() - tau - 0.5 * (PI * one_minus_q.powi(3) / 2.0).ln()
        - (y0 * (-tau).exp()).powi(2) / (2.0 * one_minus_q)
}

/// Inverse Gaussian density for `dY = μ dτ + √2 dW` from `y₀` to `y₊`.
pub fn inverse_gaussian_density(mu: f64, y0: f64, y_plus: f64, tau: f64) -> f64 {
    ln_inverse_gaussian_density(mu, y0, y_plus, tau).exp()
}

pub fn ln_inverse_gaussian_density(mu: f64, y0: f64, y_plus: f64, tau: f64) -> f64 {
    let b = y_plus - y0;
    b.ln() - 0.5 * (4.0 * PI * tau.powi(3)).ln() - (b - mu * tau).powi(2) / (4.0 * tau)
}

/// Distribution function matching [`inverse_gaussian_density`].
pub fn inverse_gaussian_cdf(mu: f64, y0: f64, y_plus: f64, tau: f64) -> f64 {
    let b = y_plus - y0;
    let s = (2.0 * tau).sqrt();
    norm_cdf((mu * tau - b) / s) + (mu * b).exp() * norm_cdf(-(b + mu * tau) / s)
}

/// The log-derivative ansatz `h(τ,y) = -∂_y ln f` with a supplied
/// `h̃(y)` and no remainder term.
pub fn h_ansatz(ff: &ForceField, model: &DensityModel, tau: f64, y: f64, h_tilde: f64) -> f64 {
    let yp = model.y_plus;
    let x = model.theta * tau;
    let sq = (-x).exp();
    let one_minus_q = -(-2.0 * x).exp_m1();
    let a = ff.a(y);
    if model.abm_limit {
        return (y - yp) / (2.0 * tau) + a / 2.0 + 1.0 / (yp - y);
    }
    model.theta * sq * (y - yp) / one_minus_q + sq * a / (1.0 + sq) + 1.0 / (yp - y) + (0.5 * x).tanh() * h_tilde
}

/// Numerical `h̃` on `[y_min, y₊]`.
#[derive(Debug, Clone, Serialize)]
pub struct HTilde {
    /// Increasing abscissae.
    pub y: Vec<f64>,
    pub value: Vec<f64>,
    /// Where the solution blew up, if it did before `y_min`.
    pub blowup: Option<f64>,
}

impl HTilde {
    /// Linear interpolation; `None` outside the solved range.
    pub fn eval(&self, y: f64) -> Option<f64> {
        let (lo, hi) = (self.y[0], *self.y.last()?);
        if !(y >= lo && y <= hi) {
            return None;
        }
        let j = self.y.partition_point(|v| *v <= y).clamp(1, self.y.len() - 1);
        let (x0, x1) = (self.y[j - 1], self.y[j]);
        let t = if x1 > x0 { (y - x0) / (x1 - x0) } else { 0.0 };
        Some(self.value[j - 1] + t * (self.value[j] - self.value[j - 1]))
    }

    /// `∫_{y₀}^{y₊} h̃` by the trapezium rule on the output grid.
    pub fn rho(&self, y0: f64) -> Option<f64> {
        if y0 < self.y[0] {
            return None;
        }
        let mut s = 0.0;
        for k in 1..self.y.len() {
            let (a, b) = (self.y[k - 1].max(y0), self.y[k]);
            if b <= a {
                continue;
            }
            s += 0.5 * (b - a) * (self.eval(a)? + self.value[k]);
        }
        Some(s)
    }
}

struct Riccati<'a> {
    ff: &'a ForceField,
    lambda: f64,
    y_plus: f64,
    limit: f64,
}

impl System<f64, Vector1<f64>> for Riccati<'_> {
    fn system(&self, y: f64, h: &Vector1<f64>, dh: &mut Vector1<f64>) {
        let a = self.ff.a(y);
        let v = h[0];
        dh[0] = self.lambda + v * v - a * v + (2.0 * v - a) / (self.y_plus - y);
    }

    fn solout(&mut self, _y: f64, h: &Vector1<f64>, _dh: &Vector1<f64>) -> bool {
        !(h[0].abs() < self.limit)
    }
}

/// Solves `h̃' = λ + h̃² - A h̃ + (2h̃ - A)/(y₊ - y)` leftwards from the
/// barrier, starting from the Taylor data
/// `h̃(y₊) = A/2`, `h̃'(y₊) = (λ - A²/4 + A')/3`.
pub fn solve_h_tilde(ff: &ForceField, lambda: f64, y_plus: f64, y_min: f64) -> Result<HTilde> {
    ensure(y_min < y_plus, || format!("y_min {y_min} must lie below y+ {y_plus}"))?;
    let eps = 1e-4;
    let a = ff.a_left(y_plus);
    let h0 = 0.5 * a;
    let slope = (lambda - 0.25 * a * a + ff.a_prime(y_plus)) / 3.0;
    let start = y_plus - eps;
    let sys = Riccati { ff, lambda, y_plus, limit: 1e8 };
    let dx = -((start - y_min) / 2048.0).min(1.0 / 256.0);
    let mut solver = Dopri5::new(sys, start, y_min, dx, Vector1::new(h0 - eps * slope), 1e-10, 1e-12);
    let outcome = solver.integrate();
    let xs = solver.x_out();
    let ys = solver.y_out();
    let mut y: Vec<f64> = vec![y_plus];
    let mut value: Vec<f64> = vec![h0];
    for (x, v) in xs.iter().zip(ys) {
        if v[0].is_finite() && v[0].abs() < 1e8 && *x < *y.last().unwrap() {
            y.push(*x);
            value.push(v[0]);
        }
    }
    let last = y.len() - 1;
    if (y[last] - y_min).abs() <= 1e-9 * (1.0 + y_min.abs()) {
        y[last] = y_min;
    }
    let reached = y[last];
    let blowup = if outcome.is_err() || reached > y_min + 1e-9 {
        log::warn!("h-tilde Riccati solution blew up near y = {reached}");
        Some(reached)
    } else {
        None
    };
    y.reverse();
    value.reverse();
    Ok(HTilde { y, value, blowup })
}

/// Closed-form short-time remainder for the OU drift,
/// `R̃ = (τy₊/4) 𝔷 Φ(-𝔷)/φ(𝔷) - τ(y₊-y)/6` with `𝔷 = (y₊-y)/√(2τ)`.
pub fn ou_short_time_remainder(y: f64, y_plus: f64, tau: f64) -> Result<f64> {
    ensure(tau > 0.0, || format!("tau must be positive, got {tau}"))?;
    let z = (y_plus - y) / (2.0 * tau).sqrt();
    Ok(0.25 * tau * y_plus * z * mills_ratio(z) - tau * (y_plus - y) / 6.0)
}
