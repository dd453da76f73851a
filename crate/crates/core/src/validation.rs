//! Comparison of the density approximation with the finite-difference
//! oracle.

use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, DensityOptions};
use crate::error::Result;
use crate::forcefield::{ForceField, InvariantMeasure};
use crate::oracle::{solve_pde, PdeConfig};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub dy: f64,
    pub dtau: f64,
    /// Horizon in units of `1/λ`, capped at `tau_cap`.
    pub horizon: f64,
    pub tau_cap: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { dy: 1.0 / 100.0, dtau: 2e-3, horizon: 12.0, tau_cap: 400.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationCase {
    pub model: String,
    pub y_plus: f64,
    pub y0: f64,
    pub lambda: f64,
    pub theta: f64,
    pub nu: f64,
    pub rho: f64,
    /// `∫|f_formula - f_pde| dτ` over the grid plus the difference in
    /// untracked tail mass.
    pub l1: f64,
    pub sup: f64,
    /// Relative error of the PDE log-slope over the last third of the
    /// horizon, against `λ`.
    pub tail_slope_error: f64,
    pub norm_residual: f64,
    pub tau_max: f64,
    /// `(τ, f_formula, f_pde)` on the PDE grid, thinned.
    #[serde(skip)]
    pub curve: Vec<(f64, f64, f64)>,
}

/// Runs one PDE solve for the barrier and compares every start against it.
pub fn validate(
    ff: &ForceField,
    im: &InvariantMeasure,
    y_plus: f64,
    starts: &[f64],
    cfg: &ValidationConfig,
) -> Result<Vec<ValidationCase>> {
    let models = starts
        .iter()
        .map(|&y0| DensityModel::new(ff, im, y0, y_plus, DensityOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let lambda = models[0].lambda;
    let tau_max = (cfg.horizon / lambda).min(cfg.tau_cap);
    let pde_cfg = PdeConfig { dy: cfg.dy, dtau: cfg.dtau, ..PdeConfig::new(y_plus, tau_max, starts.to_vec()) };
    let grid = solve_pde(ff, &pde_cfg)?;
    let taus = &grid.tau_nodes;
    let thin = (taus.len() / 2000).max(1);

    let mut out = Vec::with_capacity(starts.len());
    for (m, p) in models.iter().zip(&grid.probes) {
        let formula: Vec<f64> = taus.iter().map(|&t| if t > 0.0 { m.ln_density(t).exp() } else { 0.0 }).collect();
        let mut l1 = 0.0;
        let mut mass = 0.0;
        let mut sup: f64 = 0.0;
        for j in 1..taus.len() {
            let h = taus[j] - taus[j - 1];
            let d0 = (formula[j - 1] - p.density[j - 1]).abs();
            let d1 = (formula[j] - p.density[j]).abs();
            l1 += 0.5 * h * (d0 + d1);
            mass += 0.5 * h * (formula[j - 1] + formula[j]);
            sup = sup.max(d1);
        }
        let tail_formula = 1.0 - mass;
        let tail_pde = 1.0 - p.cdf.last().copied().unwrap_or(0.0);
        l1 += (tail_formula - tail_pde).abs();

        let n = taus.len();
        let (ja, jb) = (2 * n / 3, n - 1);
        let slope = -(p.density[jb].ln() - p.density[ja].ln()) / (taus[jb] - taus[ja]);
        let curve = (0..n).step_by(thin).map(|j| (taus[j], formula[j], p.density[j])).collect();
        out.push(ValidationCase {
            model: ff.label().to_string(),
            y_plus,
            y0: m.y0,
            lambda: m.lambda,
            theta: m.theta,
            nu: m.nu,
            rho: m.rho,
            l1,
            sup,
            tail_slope_error: slope / m.lambda - 1.0,
            norm_residual: m.normalization()? - 1.0,
            tau_max,
            curve,
        });
    }
    Ok(out)
}
