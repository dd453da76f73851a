//! Lamperti transform of `dX = μ(X)dt + σ(X)dW` to unit diffusion.
//!
//! With `y(x) = ∫ √(2κ)/σ` the process `Y = y(X)` satisfies
//! `dY = κA(Y)dt + √(2κ)dW` where `A = √(2/κ) (μ/σ - σ'/2)`.

use std::sync::Arc;

use super::{Drift, ForceField};
use crate::error::{ensure, FptError, Result};
use crate::quad::{gk15, gk15_nodes};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A general one-dimensional SDE in natural coordinates.
#[derive(Clone)]
pub struct SdeSpec {
    pub mu: ScalarFn,
    pub sigma: ScalarFn,
    pub kappa: f64,
}

impl SdeSpec {
    pub fn new<M, S>(mu: M, sigma: S, kappa: f64) -> Self
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { mu: Arc::new(mu), sigma: Arc::new(sigma), kappa }
    }
}

/// Range and resolution of the tabulated map `x ↦ y(x)`. `y(x_ref) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct LampertiConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub x_ref: f64,
    pub cells: usize,
}

impl Default for LampertiConfig {
    fn default() -> Self {
        Self { x_lo: -50.0, x_hi: 50.0, x_ref: 0.0, cells: 4000 }
    }
}

/// Drift in Lamperti coordinates. Outside the tabulated range the drift is
/// held at its end value.
pub struct LampertiDrift {
    spec: SdeSpec,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LampertiDrift {
    fn dy_dx(&self, x: f64) -> f64 {
        (2.0 * self.spec.kappa).sqrt() / (self.spec.sigma)(x)
    }

    fn y_in_cell(&self, j: usize, x: f64) -> f64 {
        let f = |u: f64| self.dy_dx(u);
        self.ys[j] + gk15(&f, self.xs[j], x).0
    }

    pub fn y_of_x(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let h = self.xs[1] - self.xs[0];
        let j = (((x - self.xs[0]) / h) as usize).min(self.xs.len() - 2);
        self.y_in_cell(j, x)
    }

    pub fn x_of_y(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y <= self.ys[0] {
            return self.xs[0];
        }
        if y >= self.ys[n - 1] {
            return self.xs[n - 1];
        }
        let j = self.ys.partition_point(|&v| v <= y).saturating_sub(1).min(n - 2);
        let (mut lo, mut hi) = (self.xs[j], self.xs[j + 1]);
        let t = (y - self.ys[j]) / (self.ys[j + 1] - self.ys[j]);
        let mut x = lo + t * (hi - lo);
        // Safeguarded Newton; y is increasing in x.
        for _ in 0..50 {
            let r = self.y_in_cell(j, x) - y;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - r / self.dy_dx(x);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.ys[0], *self.ys.last().unwrap())
    }
}

impl Drift for LampertiDrift {
    fn value(&self, y: f64) -> f64 {
        let x = self.x_of_y(y);
        let s = (self.spec.sigma)(x);
        let h = 1e-6 * (1.0 + x.abs());
        let ds = ((self.spec.sigma)(x + h) - (self.spec.sigma)(x - h)) / (2.0 * h);
        (2.0 / self.spec.kappa).sqrt() * ((self.spec.mu)(x) / s - 0.5 * ds)
    }
}

/// Map an SDE to a unit-diffusion [`ForceField`] with the same `κ`.
pub fn lamperti(spec: SdeSpec, cfg: LampertiConfig) -> Result<(ForceField, Arc<LampertiDrift>)> {
    ensure(cfg.x_hi > cfg.x_lo && cfg.cells >= 2, || "empty Lamperti range".into())?;
    ensure(spec.kappa > 0.0 && spec.kappa.is_finite(), || "kappa must be positive".into())?;
    ensure(cfg.x_ref >= cfg.x_lo && cfg.x_ref <= cfg.x_hi, || {
        "x_ref must lie in the Lamperti range".into()
    })?;
    let n = cfg.cells;
    let h = (cfg.x_hi - cfg.x_lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| cfg.x_lo + i as f64 * h).collect();
    let sigma = spec.sigma.clone();
    for w in xs.windows(2) {
        for (x, _) in gk15_nodes(w[0], w[1]).chain([(w[0], 0.0), (w[1], 0.0)]) {
            let s = sigma(x);
            if !(s > 0.0 && s.is_finite()) {
                return Err(FptError::InvalidParameter(format!(
                    "diffusion coefficient must be positive, sigma({x}) = {s}"
                )));
            }
        }
    }
    let scale = (2.0 * spec.kappa).sqrt();
    let f = |u: f64| scale / sigma(u);
    let mut ys = vec![0.0; n + 1];
    for i in 0..n {
        ys[i + 1] = ys[i] + gk15(&f, xs[i], xs[i + 1]).0;
    }
    let kappa = spec.kappa;
    let mut drift = LampertiDrift { spec, xs, ys };
    let offset = drift.y_of_x(cfg.x_ref);
    for y in &mut drift.ys {
        *y -= offset;
    }
    let drift = Arc::new(drift);
    let ff = ForceField::custom("lamperti", drift.clone()).with_kappa(kappa)?;
    Ok((ff, drift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ou_rescales_to_unit_ou() {
        let (kappa, sigma) = (2.5, 0.6);
        let (ff, map) = lamperti(
            SdeSpec::new(move |x: f64| -kappa * x, move |_| sigma, kappa),
            LampertiConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(map.y_of_x(1.0), (2.0 * kappa).sqrt() / sigma, max_relative = 1e-12);
        for &y in &[-4.0, -0.5, 0.0, 2.0] {
            assert!((ff.a(y) + y).abs() < 1e-10, "{y}");
        }
        assert_eq!(ff.kappa(), kappa);
    }

    #[test]
    fn cir_map_matches_closed_form() {
        let (kappa, sigma) = (1.5, 0.8);
        let (_, map) = lamperti(
            SdeSpec::new(|_| 1.0, move |x: f64| sigma * x.sqrt(), kappa),
            LampertiConfig { x_lo: 0.01, x_hi: 20.0, x_ref: 1.0, cells: 2000 },
        )
        .unwrap();
        let y = |x: f64| 2.0 * (2.0 * kappa * x).sqrt() / sigma;
        for &x in &[0.05, 0.5, 3.0, 15.0] {
            assert_relative_eq!(map.y_of_x(x), y(x) - y(1.0), max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_noise_is_identity_on_drifts() {
        let kappa = 1.0;
        let (ff, map) = lamperti(
            SdeSpec::new(move |x: f64| -kappa * x.powi(3), move |_| (2.0 * kappa).sqrt(), kappa),
            LampertiConfig::default(),
        )
        .unwrap();
        for &y in &[-2.0, 0.3, 1.7] {
            assert_relative_eq!(map.y_of_x(y), y, max_relative = 1e-13);
            assert_relative_eq!(ff.a(y), -y.powi(3), max_relative = 1e-9);
        }
    }

    #[test]
    fn abm_with_constant_sigma() {
        let (mu, sigma) = (0.8, 1.7);
        let (ff, map) = lamperti(SdeSpec::new(move |_| mu, move |_| sigma, 1.0), LampertiConfig::default())
            .unwrap();
        for &y in &[-3.0, 0.0, 5.0] {
            assert_relative_eq!(ff.a(y), std::f64::consts::SQRT_2 * mu / sigma, max_relative = 1e-10);
        }
        assert_relative_eq!(map.y_of_x(2.0), std::f64::consts::SQRT_2 * 2.0 / sigma, max_relative = 1e-12);
    }

    #[test]
    fn geometric_noise_round_trip() {
        // σ(x) = 1 + x²/4 varies, so the map is nonlinear.
        let (_, map) = lamperti(
            SdeSpec::new(|x: f64| -x, |x: f64| 1.0 + 0.25 * x * x, 1.0),
            LampertiConfig { x_lo: -10.0, x_hi: 10.0, x_ref: 0.0, cells: 800 },
        )
        .unwrap();
        for &x in &[-7.3, -1.0, 0.0, 0.4, 6.6] {
            let y = map.y_of_x(x);
            assert!((map.x_of_y(y) - x).abs() < 1e-11, "{x}");
        }
        // y(x) = 2√2·atan(x/2)
        assert_relative_eq!(map.y_of_x(3.0), 2.0 * std::f64::consts::SQRT_2 * 1.5f64.atan(), max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        let r = lamperti(SdeSpec::new(|_| 0.0, |x: f64| x, 1.0), LampertiConfig::default());
        assert!(r.is_err());
    }
}
