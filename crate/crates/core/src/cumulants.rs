//! Cumulants of the first-passage time, `𝔨_r = r! ∫_{y₀}^{y₊} h_r(z) dz`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::forcefield::InvariantMeasure;
use crate::hseries::{cumulant_integrand, HTable};
use crate::quad::Integrator;
use crate::special::{double_factorial_odd, factorial, norm_cdf_over_pdf, EULER_GAMMA};

#[derive(Debug, Clone, Serialize)]
pub struct CumulantSet {
    pub y0: f64,
    pub y_plus: f64,
    /// `𝔨₁..𝔨_{r_max}` in dimensionless time.
    pub kappa_r: Vec<f64>,
    /// `κ`; dimensional cumulants are `𝔨_r/κ^r`.
    pub time_scale: f64,
    /// `∫ Ψ/ψ`, computed from the invariant measure rather than the table.
    pub mean_direct: Option<f64>,
}

impl CumulantSet {
    pub fn mean(&self) -> f64 {
        self.kappa_r[0]
    }

    pub fn variance(&self) -> f64 {
        self.kappa_r[1]
    }

    /// `𝔨₃/𝔨₂^{3/2}`, if `𝔨₃` was computed.
    pub fn skewness(&self) -> Option<f64> {
        self.kappa_r.get(2).map(|k3| k3 / self.kappa_r[1].powf(1.5))
    }

    /// Cumulants in the original time variable.
    pub fn dimensional(&self) -> Vec<f64> {
        let k = self.time_scale;
        self.kappa_r.iter().enumerate().map(|(i, v)| v / k.powi(i as i32 + 1)).collect()
    }
}

fn integrator() -> Integrator {
    Integrator { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 4000 }
}

/// Cumulants from an h-table. Each table cell is one quadrature panel.
pub fn cumulants(table: &HTable, y0: f64, y_plus: f64, r_max: usize) -> Result<CumulantSet> {
    ensure(y0 <= y_plus, || format!("start {y0} must not exceed the barrier {y_plus}"))?;
    ensure((1..=table.r_max).contains(&r_max), || format!("r_max = {r_max} outside 1..={}", table.r_max))?;
    let (lo, hi) = table.z_range();
    ensure(y0 >= lo && y_plus <= hi, || format!("[{y0}, {y_plus}] not inside table range [{lo}, {hi}]"))?;

    let mut breaks = vec![y0];
    breaks.extend(table.z.iter().copied().filter(|z| *z > y0 && *z < y_plus));
    breaks.push(y_plus);

    let mut kappa_r = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let k = if y0 == y_plus {
            0.0
        } else {
            let h = cumulant_integrand(table, r)?;
            integrator().integrate_breaks(|z| h.eval(z), &breaks)?.value
        };
        kappa_r.push(factorial(r) * k);
    }
    Ok(CumulantSet { y0, y_plus, kappa_r, time_scale: 1.0, mean_direct: None })
}

/// As [`cumulants`], adding the direct mean `∫ Ψ/ψ` and the time scale.
pub fn cumulants_with_mean(
    table: &HTable,
    im: &InvariantMeasure,
    kappa: f64,
    y0: f64,
    y_plus: f64,
    r_max: usize,
) -> Result<CumulantSet> {
    let mut set = cumulants(table, y0, y_plus, r_max)?;
    set.time_scale = kappa;
    set.mean_direct = Some(mean_direct(im, y0, y_plus)?);
    Ok(set)
}

/// `∫_{y₀}^{y₊} Ψ/ψ dz`.
pub fn mean_direct(im: &InvariantMeasure, y0: f64, y_plus: f64) -> Result<f64> {
    if y0 == y_plus {
        return Ok(0.0);
    }
    let n = ((y_plus - y0) * 4.0).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|i| y0 + (y_plus - y0) * i as f64 / n as f64).collect();
    Ok(integrator().integrate_breaks(|z| im.cdf_over_pdf(z), &breaks)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanRegime {
    /// `|y₀|, y₊` small.
    LowReversion,
    /// `y₊ ≫ 1`.
    SubThreshold,
    /// `y₀ < y₊ ≪ 0`.
    SupraThreshold,
    /// `y₊ = 0`, `y₀ ≪ 0`.
    Medial,
}

/// Adds terms of a divergent asymptotic series, up to `terms` of them,
/// stopping before the first one that grows in magnitude.
fn truncated_sum(terms: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for r in 1..=terms {
        let t = term(r);
        if t.abs() > last {
            break;
        }
        sum += t;
        last = t.abs();
    }
    sum
}

/// Asymptotic forms of the OU mean hitting time.
///
/// `terms` caps the number of correction terms after the leading one.
pub fn ou_mean_regime(y0: f64, y_plus: f64, regime: MeanRegime, terms: usize) -> f64 {
    match regime {
        MeanRegime::LowReversion => {
            ((std::f64::consts::PI / 2.0).sqrt() + 0.5 * (y_plus + y0)) * (y_plus - y0)
        }
        MeanRegime::SubThreshold => {
            if y_plus <= 0.0 {
                log::warn!("sub-threshold form used with y+ = {y_plus} <= 0");
            }
            // ∫^{y₊} e^{z²/2} dz ~ e^{y₊²/2}/y₊ · Σ (2r-1)!!/y₊^{2r}
            let corr = truncated_sum(terms, |r| double_factorial_odd(r) / y_plus.powi(2 * r as i32));
            (2.0 * std::f64::consts::PI).sqrt() * (0.5 * y_plus * y_plus).exp() / y_plus * (1.0 + corr)
        }
        MeanRegime::SupraThreshold => {
            if !(y0 < y_plus && y_plus < 0.0) {
                log::warn!("supra-threshold form needs y0 < y+ < 0, got {y0}, {y_plus}");
            }
            let lead = 0.5 * (y0 * y0 / (y_plus * y_plus)).ln();
            lead + truncated_sum(terms, |r| {
                let k = 2 * r as i32;
                sign(r) * double_factorial_odd(r) / (2.0 * r as f64) * (y_plus.powi(-k) - y0.powi(-k))
            })
        }
        MeanRegime::Medial => {
            if y_plus != 0.0 {
                log::warn!("medial form assumes y+ = 0, got {y_plus}");
            }
            let lead = 0.5 * ((2.0 * y0 * y0).ln() + EULER_GAMMA);
            lead - truncated_sum(terms, |r| {
                sign(r) * double_factorial_odd(r) / (2.0 * r as f64 * y0.powi(2 * r as i32))
            })
        }
    }
}

fn sign(r: usize) -> f64 {
    if r.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Exact OU mean `∫_{y₀}^{y₊} Φ/φ`.
pub fn ou_mean_exact(y0: f64, y_plus: f64) -> Result<f64> {
    if y0 == y_plus {
        return Ok(0.0);
    }
    let n = ((y_plus - y0) * 4.0).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|i| y0 + (y_plus - y0) * i as f64 / n as f64).collect();
    Ok(integrator().integrate_breaks(norm_cdf_over_pdf, &breaks)?.value)
}
