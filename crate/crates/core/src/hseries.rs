//! Taylor coefficients `h_r(z)` of `H(s,z) = Σ (-s)^r h_r(z)`, the
//! log-derivative of the bounded solution of the Laplace-transformed
//! backward equation.
//!
//! `h₁ = Ψ/ψ` and for `r ≥ 2`
//! `h_r(y) = ψ(y)⁻¹ ∫_{-∞}^y ψ Σ_{k=1}^{r-1} h_k h_{r-k}`,
//! which is marched rightwards from a far-left seed with the logarithmic
//! trapezium rule.

use serde::Serialize;

use crate::error::{ensure, FptError, Result};
use crate::forcefield::{classify, Flag, ForceField, InvariantMeasure};
use crate::interp::MonotoneCubic;
use crate::special::catalan;

/// Uniform grid `z_j = z_left + j·step` for the march.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HGrid {
    pub z_left: f64,
    pub step: f64,
    pub z_max: f64,
}

impl Default for HGrid {
    fn default() -> Self {
        Self { z_left: -10.0, step: 1.0 / 32.0, z_max: 0.0 }
    }
}

impl HGrid {
    /// Default cutoff and spacing, ending at `z_max`.
    pub fn to(z_max: f64) -> Self {
        Self { z_max, ..Self::default() }
    }

    /// Node positions. The left end is moved left, by less than one step,
    /// so that the last node lands exactly on `z_max`.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        ensure(self.step > 0.0 && self.step.is_finite(), || "grid step must be positive".into())?;
        ensure(self.z_left < self.z_max, || {
            format!("grid needs z_left < z_max, got {} and {}", self.z_left, self.z_max)
        })?;
        let n = ((self.z_max - self.z_left) / self.step - 1e-9).ceil() as usize;
        Ok((0..=n).map(|j| self.z_max - (n - j) as f64 * self.step).collect())
    }
}

/// Table of `h_r(z_j)`, `r = 1..=r_max`.
#[derive(Debug, Clone, Serialize)]
pub struct HTable {
    pub grid: HGrid,
    pub r_max: usize,
    pub z: Vec<f64>,
    /// `values[r-1][j] = h_r(z_j)`.
    pub values: Vec<Vec<f64>>,
    /// `𝔠₀..𝔠_{r_max}`.
    pub catalan: Vec<f64>,
}

impl HTable {
    pub fn h(&self, r: usize) -> &[f64] {
        &self.values[r - 1]
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z[0], *self.z.last().unwrap())
    }

    /// Index of the node at `z`, if `z` is one (to rounding).
    pub fn node_index(&self, z: f64) -> Option<usize> {
        let step = self.z[1] - self.z[0];
        let j = ((z - self.z[0]) / step).round();
        if j < 0.0 || j as usize >= self.z.len() {
            return None;
        }
        let j = j as usize;
        ((self.z[j] - z).abs() <= 1e-9 * step).then_some(j)
    }

    /// `h_r(z)`: the node value at nodes, interpolated in `ln h_r` between.
    pub fn value_at(&self, r: usize, z: f64) -> Result<f64> {
        if r == 0 || r > self.r_max {
            return Err(FptError::InvalidParameter(format!("r = {r} outside 1..={}", self.r_max)));
        }
        let (lo, hi) = self.z_range();
        if !(z >= lo && z <= hi) {
            return Err(FptError::OutOfRange(z, lo, hi));
        }
        if let Some(j) = self.node_index(z) {
            return Ok(self.values[r - 1][j]);
        }
        Ok(cumulant_integrand(self, r)?.eval(z))
    }
}

/// `h_r` between grid nodes, by monotone cubic interpolation of `ln h_r`.
#[derive(Debug, Clone)]
pub struct HInterp {
    ln_h: MonotoneCubic,
}

impl HInterp {
    pub fn eval(&self, z: f64) -> f64 {
        self.ln_h.eval(z).exp()
    }

    pub fn nodes(&self) -> &[f64] {
        self.ln_h.xs()
    }
}

/// `h_r` as a function of `z` for downstream quadrature.
pub fn cumulant_integrand(table: &HTable, r: usize) -> Result<HInterp> {
    if r == 0 || r > table.r_max {
        return Err(FptError::InvalidParameter(format!("r = {r} outside 1..={}", table.r_max)));
    }
    let ln: Vec<f64> = table.values[r - 1].iter().map(|v| v.ln()).collect();
    Ok(HInterp { ln_h: MonotoneCubic::new(table.z.clone(), ln)? })
}

/// `h₁(y) = Ψ(y)/ψ(y)`, valid when the problem is completely absorbing.
pub fn h1(im: &InvariantMeasure, y: f64) -> Result<f64> {
    let v = im.cdf_over_pdf(y);
    if !(v.is_finite() && v > 0.0) {
        return Err(FptError::Underflow(format!(
            "Ψ/ψ at y = {y} is {v}; move the left cutoff to the right"
        )));
    }
    Ok(v)
}

/// Run the march for `h₁..h_{r_max}` on `grid`.
pub fn build_table(ff: &ForceField, im: &InvariantMeasure, grid: HGrid, r_max: usize) -> Result<HTable> {
    ensure(r_max >= 2, || format!("r_max must be at least 2, got {r_max}"))?;
    let cls = classify(ff);
    if cls.completely_absorbing != Flag::Yes {
        log::warn!("{}: problem may not be completely absorbing; h1 = Ψ/ψ assumed", ff.label());
    }
    if cls.s_minus != Flag::Yes {
        log::warn!("{}: drift not detected in S-minus; far-left seed may be inaccurate", ff.label());
    }
    let z = grid.nodes()?;
    let n = z.len();
    let ln_psi: Vec<f64> = z.iter().map(|&y| im.ln_psi(y)).collect();
    // ψ_j / ψ_{j+1}
    let ratio: Vec<f64> = ln_psi.windows(2).map(|w| (w[0] - w[1]).exp()).collect();
    let ln_ratio: Vec<f64> = ln_psi.windows(2).map(|w| w[0] - w[1]).collect();

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(r_max);
    values.push(z.iter().map(|&y| h1(im, y)).collect::<Result<_>>()?);
    let cat: Vec<f64> = (0..=r_max).map(catalan).collect();

    for r in 2..=r_max {
        let conv: Vec<f64> = (0..n)
            .map(|j| (1..r).map(|k| values[k - 1][j] * values[r - k - 1][j]).sum())
            .collect();
        let mut h = vec![0.0; n];
        h[0] = cat[r - 1] * values[0][0].powi(2 * r as i32 - 1);
        for j in 0..n - 1 {
            let (p0, p1) = (conv[j], conv[j + 1]);
            if !(p0 > 0.0 && p1 > 0.0 && p0.is_finite() && p1.is_finite()) {
                let (zz, v) = if p0 > 0.0 && p0.is_finite() { (z[j + 1], p1) } else { (z[j], p0) };
                return Err(FptError::Positivity { r, z: zz, value: v });
            }
            let dz = z[j + 1] - z[j];
            // Work with S/ψ_{j+1} so nothing underflows:
            // S_j/ψ_{j+1} = P_j·ρ_j, S_{j+1}/ψ_{j+1} = P_{j+1}.
            let a = p0 * ratio[j];
            let b = p1;
            let dlog = p1.ln() - p0.ln() - ln_ratio[j];
            let incr = if dlog.abs() < 1e-12 {
                0.5 * dz * (a + b)
            } else {
                dz * (b - a) / dlog
            };
            h[j + 1] = h[j] * ratio[j] + incr;
        }
        if let Some(j) = h.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FptError::Positivity { r, z: z[j], value: h[j] });
        }
        values.push(h);
    }
    let grid = HGrid { z_left: z[0], ..grid };
    Ok(HTable { grid, r_max, z, values, catalan: cat })
}
