//! Euler–Maruyama first-passage sampler for `dY = A(Y)dτ + √2 dW`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::forcefield::ForceField;

/// Paths per independent RNG stream.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub tau_max: f64,
    /// Brownian-bridge crossing test between steps.
    pub bridge: bool,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { dt: 1e-3, n_paths: 100_000, tau_max: 50.0, bridge: true, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McResult {
    /// Hitting times in `(0, τ_max]`, ascending.
    pub samples: Vec<f64>,
    pub censored_count: usize,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McResult {
    /// Mean of the observed hitting times.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of [`McResult::mean`].
    pub fn std_error(&self) -> f64 {
        let n = self.samples.len() as f64;
        let m = self.mean();
        let var = self.samples.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    pub fn median(&self) -> f64 {
        let k = self.n_paths / 2;
        self.samples.get(k).copied().unwrap_or(f64::INFINITY)
    }

    /// Empirical `P(T ≤ τ)` over all paths, censored ones included.
    pub fn cdf(&self, tau: f64) -> f64 {
        self.samples.partition_point(|t| *t <= tau) as f64 / self.n_paths as f64
    }

    /// Kolmogorov distance to a distribution function.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.n_paths as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let f = cdf(*t);
                (i as f64 / n - f).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Least-squares slope of `-ln P(T > τ)` on `[lo, hi]`.
    pub fn tail_rate(&self, lo: f64, hi: f64) -> f64 {
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|i| lo + (hi - lo) * i as f64 / 20.0)
            .map(|t| (t, (1.0 - self.cdf(t)).ln()))
            .filter(|(_, s)| s.is_finite())
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    }
}

/// Simulates `n_paths` paths from `y0` until they reach `y₊` or `τ_max`.
///
/// With the bridge test on, a step that ends below the barrier still
/// counts as a hit with probability `exp(-(y₊-Yᵢ)(y₊-Yᵢ₊₁)/dτ)`; bridged
/// hits are time-stamped at the step midpoint.
pub fn simulate(ff: &ForceField, y_plus: f64, y0: f64, cfg: &McConfig) -> Result<McResult> {
    ensure(y0 <= y_plus, || format!("start {y0} must not exceed the barrier {y_plus}"))?;
    ensure(cfg.dt > 0.0 && cfg.tau_max > 0.0 && cfg.n_paths > 0, || "need dt, tau_max, n_paths > 0".into())?;
    let blocks = cfg.n_paths.div_ceil(BLOCK);
    let parts: Vec<(Vec<f64>, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(cfg.n_paths - b * BLOCK);
            let mut hits = Vec::with_capacity(count);
            let mut censored = 0;
            for _ in 0..count {
                match path(ff, y_plus, y0, cfg, &mut rng) {
                    Some(t) => hits.push(t),
                    None => censored += 1,
                }
            }
            (hits, censored)
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_paths);
    let mut censored_count = 0;
    for (h, c) in parts {
        samples.extend(h);
        censored_count += c;
    }
    samples.sort_by(f64::total_cmp);
    if censored_count > 0 {
        log::info!("{censored_count} of {} paths censored at tau = {}", cfg.n_paths, cfg.tau_max);
    }
    Ok(McResult { samples, censored_count, dt: cfg.dt, n_paths: cfg.n_paths, seed: cfg.seed })
}

fn path(ff: &ForceField, y_plus: f64, y0: f64, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Option<f64> {
    let dt = cfg.dt;
    let vol = (2.0 * dt).sqrt();
    let steps = (cfg.tau_max / dt).ceil() as usize;
    let mut y = y0;
    if y >= y_plus {
        return Some(0.0);
    }
    for i in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let next = y + ff.a(y) * dt + vol * z;
        let t = i as f64 * dt;
        if next >= y_plus {
            return Some(if cfg.bridge { t + 0.5 * dt } else { t + dt });
        }
        if cfg.bridge {
            let e = (y_plus - y) * (y_plus - next) / dt;
            // Below e^{-40} the test cannot fire in any realistic run.
            if e < 40.0 && rng.random::<f64>() < (-e).exp() {
                return Some(t + 0.5 * dt);
            }
        }
        y = next;
    }
    None
}
