//! Invariant densities `ψ` with `ψ'/ψ = A` and their cumulatives `Ψ`.

use std::sync::Arc;

use statrs::function::beta::beta_reg;

use super::ForceField;
use crate::error::{FptError, Result};
use crate::quad::{gk15, gk15_nodes};
use crate::special::{ln_cosh, ln_gamma, ln_norm_pdf, norm_cdf, norm_cdf_over_pdf};

#[derive(Clone)]
enum Repr {
    Gaussian,
    Laplace { mu: f64 },
    /// `ψ ∝ sech^p(g y)` with `p = amp/rate`.
    SechPower { amp: f64, rate: f64, ln_norm: f64 },
    /// `ψ = e^{μy}`, not normalisable.
    Exponential { mu: f64 },
    Numeric(Arc<NumericMeasure>),
}

/// Invariant measure of a drift field.
///
/// For normalisable fields `ψ` is a probability density and `Ψ` its
/// distribution function. Otherwise `ψ` is fixed up to a constant and `Ψ`
/// is the matching running integral from `-∞`.
#[derive(Clone)]
pub struct InvariantMeasure {
    repr: Repr,
}

impl std::fmt::Debug for InvariantMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.repr {
            Repr::Gaussian => "gaussian",
            Repr::Laplace { .. } => "laplace",
            Repr::SechPower { .. } => "sech_power",
            Repr::Exponential { .. } => "exponential",
            Repr::Numeric(_) => "numeric",
        };
        f.debug_struct("InvariantMeasure").field("repr", &name).finish()
    }
}

impl InvariantMeasure {
    pub(crate) fn gaussian() -> Self {
        Self { repr: Repr::Gaussian }
    }

    pub(crate) fn laplace(mu: f64) -> Self {
        Self { repr: Repr::Laplace { mu } }
    }

    pub(crate) fn sech_power(amp: f64, rate: f64) -> Self {
        let p = amp / rate;
        // ∫ sech^p(g y) dy = B(p/2, 1/2)/g
        let ln_b = ln_gamma(0.5 * p) + ln_gamma(0.5) - ln_gamma(0.5 * p + 0.5);
        Self {
            repr: Repr::SechPower { amp, rate, ln_norm: ln_b - rate.ln() },
        }
    }

    pub(crate) fn exponential(mu: f64) -> Self {
        Self { repr: Repr::Exponential { mu } }
    }

    /// Tabulate the measure of an arbitrary field.
    pub fn numeric(ff: &ForceField, grid: MeasureGrid) -> Result<Self> {
        Ok(Self {
            repr: Repr::Numeric(Arc::new(NumericMeasure::build(ff, grid)?)),
        })
    }

    pub fn normalizable(&self) -> bool {
        match &self.repr {
            Repr::Exponential { .. } => false,
            Repr::Numeric(n) => n.normalizable,
            _ => true,
        }
    }

    pub fn ln_psi(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian => ln_norm_pdf(y),
            Repr::Laplace { mu } => (0.5 * mu).ln() - mu * y.abs(),
            Repr::SechPower { amp, rate, ln_norm } => -(amp / rate) * ln_cosh(rate * y) - ln_norm,
            Repr::Exponential { mu } => mu * y,
            Repr::Numeric(n) => n.ln_psi(y),
        }
    }

    pub fn psi(&self, y: f64) -> f64 {
        self.ln_psi(y).exp()
    }

    /// `Ψ(y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian => norm_cdf(y),
            Repr::Laplace { mu } => {
                if y <= 0.0 {
                    0.5 * (mu * y).exp()
                } else {
                    1.0 - 0.5 * (-mu * y).exp()
                }
            }
            Repr::SechPower { amp, rate, .. } => {
                let lower = sech_power_lower_tail(amp / rate, rate * -y.abs());
                if y <= 0.0 {
                    lower
                } else {
                    1.0 - lower
                }
            }
            Repr::Exponential { mu } => (mu * y).exp() / mu,
            Repr::Numeric(n) => n.ln_cdf(y).exp(),
        }
    }

    /// `Ψ(y)/ψ(y)`, computed without forming either factor where possible.
    pub fn cdf_over_pdf(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian => norm_cdf_over_pdf(y),
            Repr::Laplace { mu } => {
                if y <= 0.0 {
                    1.0 / mu
                } else {
                    (2.0 * (mu * y).exp() - 1.0) / mu
                }
            }
            Repr::SechPower { .. } => {
                if y <= 0.0 {
                    // Ψ underflows long before the ratio does; work in logs.
                    let c = self.cdf(y);
                    if c > 0.0 {
                        (c.ln() - self.ln_psi(y)).exp()
                    } else {
                        self.sech_tail_ratio(y)
                    }
                } else {
                    self.cdf(y) / self.psi(y)
                }
            }
            Repr::Exponential { mu } => 1.0 / mu,
            Repr::Numeric(n) => (n.ln_cdf(y) - n.ln_psi(y)).exp(),
        }
    }

    // Far-left ratio for sech^p by quadrature of exp(lnψ(z) - lnψ(y)).
    fn sech_tail_ratio(&self, y: f64) -> f64 {
        let lp = self.ln_psi(y);
        let f = |z: f64| (self.ln_psi(z) - lp).exp();
        let mut total = 0.0;
        let mut hi = y;
        let mut width = 1.0;
        for _ in 0..200 {
            let (v, _) = gk15(&f, hi - width, hi);
            total += v;
            if v.abs() < 1e-17 * total.abs() {
                break;
            }
            hi -= width;
            width *= 1.5;
        }
        total
    }

    /// Interval outside which `ψ` is below `exp(ln_tol)` times its peak.
    pub fn support(&self, ln_tol: f64) -> Result<(f64, f64)> {
        if !self.normalizable() {
            return Err(FptError::Unsupported(
                "support of a non-normalisable measure".into(),
            ));
        }
        let mode = match &self.repr {
            Repr::Numeric(n) => n.mode,
            _ => 0.0,
        };
        let peak = self.ln_psi(mode);
        let walk = |dir: f64| {
            let mut step = 1.0;
            let mut y = mode;
            for _ in 0..200 {
                y += dir * step;
                if self.ln_psi(y) < peak + ln_tol {
                    return y;
                }
                step *= 1.3;
            }
            y
        };
        Ok((walk(-1.0), walk(1.0)))
    }
}

// ½ I_{sech²(x)}(p/2, 1/2) for x ≤ 0.
fn sech_power_lower_tail(p: f64, x: f64) -> f64 {
    let s2 = (-2.0 * ln_cosh(x)).exp();
    if s2 >= 1.0 {
        return 0.5;
    }
    0.5 * beta_reg(0.5 * p, 0.5, s2)
}

/// Grid controls for [`NumericMeasure`].
#[derive(Debug, Clone, Copy)]
pub struct MeasureGrid {
    pub step: f64,
    /// Log-density drop below the peak at which a tail is cut.
    pub ln_drop: f64,
    /// Furthest distance from 0 explored on either side.
    pub max_extent: f64,
}

impl Default for MeasureGrid {
    fn default() -> Self {
        Self {
            step: 1.0 / 16.0,
            ln_drop: 700.0,
            max_extent: 2000.0,
        }
    }
}

/// Tabulated potential `V = ∫₀ A` and running log-cumulative on a grid,
/// refined between nodes by Gauss–Kronrod panels.
pub struct NumericMeasure {
    ff: ForceField,
    ys: Vec<f64>,
    v: Vec<f64>,
    /// `ln ∫_{-∞}^{y_j} e^{V}` (unnormalised).
    ln_cum: Vec<f64>,
    ln_z: f64,
    normalizable: bool,
    mode: f64,
}

impl NumericMeasure {
    fn build(ff: &ForceField, grid: MeasureGrid) -> Result<Self> {
        let h = grid.step;
        let a = |y: f64| ff.a(y);
        let cell = |y0: f64, y1: f64| gk15(&a, y0, y1).0;

        let march = |dir: f64| -> Result<(Vec<f64>, Vec<f64>, bool)> {
            let mut ys = vec![0.0];
            let mut v = vec![0.0];
            let mut vmax: f64 = 0.0;
            loop {
                let y0 = *ys.last().unwrap();
                let y1 = y0 + dir * h;
                let dv = dir * cell(y0.min(y1), y0.max(y1));
                let v1 = v.last().unwrap() + dv;
                if !v1.is_finite() {
                    return Err(FptError::FieldSpec(format!("non-finite potential at y = {y1}")));
                }
                ys.push(y1);
                v.push(v1);
                vmax = vmax.max(v1);
                if v1 < vmax - grid.ln_drop {
                    return Ok((ys, v, true));
                }
                if y1.abs() >= grid.max_extent {
                    return Ok((ys, v, false));
                }
            }
        };
        let (ly, lv, left_ok) = march(-1.0)?;
        if !left_ok {
            return Err(FptError::FieldSpec(
                "invariant density does not decay to the left; Ψ is undefined".into(),
            ));
        }
        let (ry, rv, normalizable) = march(1.0)?;
        let mut ys: Vec<f64> = ly.iter().rev().copied().collect();
        let mut v: Vec<f64> = lv.iter().rev().copied().collect();
        ys.extend_from_slice(&ry[1..]);
        v.extend_from_slice(&rv[1..]);

        let n = ys.len();
        let mut ln_cum = vec![0.0; n];
        // Leftmost node: Laplace-type tail estimate ∫ e^V ≈ e^{V}/A.
        let a0 = ff.a(ys[0]).max(1e-300);
        ln_cum[0] = v[0] - a0.ln();
        for j in 0..n - 1 {
            let (y0, v0) = (ys[j], v[j]);
            let shift = ln_cum[j];
            let add = cell_mass(ff, y0, v0, ys[j + 1], shift);
            ln_cum[j + 1] = shift + add.ln_1p();
        }
        let ln_z = if normalizable { ln_cum[n - 1] } else { 0.0 };
        let (imax, _) = v
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        Ok(Self {
            ff: ff.clone(),
            mode: ys[imax],
            ys,
            v,
            ln_cum,
            ln_z,
            normalizable,
        })
    }

    fn locate(&self, y: f64) -> Option<usize> {
        let n = self.ys.len();
        if y < self.ys[0] || y > self.ys[n - 1] {
            return None;
        }
        let h = self.ys[1] - self.ys[0];
        Some((((y - self.ys[0]) / h).floor() as usize).min(n - 2))
    }

    fn potential(&self, y: f64) -> f64 {
        let a = |u: f64| self.ff.a(u);
        match self.locate(y) {
            Some(j) => self.v[j] + gk15(&a, self.ys[j], y).0,
            None => {
                let (j, edge) = if y < self.ys[0] {
                    (0, self.ys[0])
                } else {
                    (self.ys.len() - 1, *self.ys.last().unwrap())
                };
                let mut total = 0.0;
                let (lo, hi) = (edge.min(y), edge.max(y));
                let pieces = ((hi - lo) / 1.0).ceil().max(1.0) as usize;
                let w = (hi - lo) / pieces as f64;
                for k in 0..pieces {
                    total += gk15(&a, lo + k as f64 * w, lo + (k + 1) as f64 * w).0;
                }
                if y < edge {
                    self.v[j] - total
                } else {
                    self.v[j] + total
                }
            }
        }
    }

    pub fn ln_psi(&self, y: f64) -> f64 {
        self.potential(y) - self.ln_z
    }

    pub fn ln_cdf(&self, y: f64) -> f64 {
        match self.locate(y) {
            Some(j) => {
                let shift = self.ln_cum[j];
                shift + cell_mass(&self.ff, self.ys[j], self.v[j], y, shift).ln_1p() - self.ln_z
            }
            None if y < self.ys[0] => {
                let a = self.ff.a(y).max(1e-300);
                self.potential(y) - a.ln() - self.ln_z
            }
            None => {
                let n = self.ys.len();
                if self.normalizable {
                    0.0
                } else {
                    let shift = self.ln_cum[n - 1];
                    shift + cell_mass(&self.ff, self.ys[n - 1], self.v[n - 1], y, shift).ln_1p()
                }
            }
        }
    }

    pub fn normalizable(&self) -> bool {
        self.normalizable
    }
}

// ∫_{y0}^{y1} exp(V(u) - shift) du with V(u) = v0 + ∫_{y0}^u A.
fn cell_mass(ff: &ForceField, y0: f64, v0: f64, y1: f64, shift: f64) -> f64 {
    if y1 <= y0 {
        return 0.0;
    }
    let a = |u: f64| ff.a(u);
    gk15_nodes(y0, y1)
        .map(|(u, w)| w * (v0 + gk15(&a, y0, u).0 - shift).exp())
        .sum()
}
