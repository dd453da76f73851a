//! Adaptive Gauss–Kronrod quadrature (7-point Gauss / 15-point Kronrod).

#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;

use crate::error::{FptError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// One 15-point Kronrod panel; returns (kronrod, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = kron.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hl = half.abs();
    let result = kron * half;
    let abs_k = abs_k * hl;
    let asc = asc * hl;
    let mut err = ((kron - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_k);
    }
    (result, err)
}

/// Nodes and weights of the 15-point Kronrod rule mapped onto `[a, b]`.
pub fn gk15_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..15).map(move |i| {
        if i == 7 {
            (center, WGK[7] * half)
        } else if i < 7 {
            (center - half * XGK[i], WGK[i] * half)
        } else {
            (center + half * XGK[i - 8], WGK[i - 8] * half)
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_panels: 2000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrate `f` over `[a, b]` by global adaptive bisection.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Quad> {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrate over consecutive intervals given by `breaks`, refining the
    /// panel with the largest error first.
    pub fn integrate_breaks<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<Quad> {
        self.adapt(f, breaks).map(|(q, _)| q)
    }

    /// Adapt to `f`, then return the final panels as a fixed Kronrod rule
    /// that can be reused on nearby integrands.
    pub fn freeze<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<(Quad, FrozenRule)> {
        let (q, mut panels) = self.adapt(f, breaks)?;
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        let nodes = panels.iter().flat_map(|p| gk15_nodes(p.a, p.b)).collect();
        Ok((q, FrozenRule { nodes }))
    }

    fn adapt<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<(Quad, Vec<Panel>)> {
        let mut heap: BinaryHeap<Panel> = BinaryHeap::new();
        for w in breaks.windows(2) {
            if w[1] != w[0] {
                let (v, e) = gk15(&f, w[0], w[1]);
                heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
            }
        }
        if heap.is_empty() {
            return Ok((Quad { value: 0.0, error: 0.0 }, Vec::new()));
        }
        let fail = |value: f64, error: f64| FptError::Quadrature {
            a: breaks[0],
            b: *breaks.last().unwrap(),
            value,
            error,
        };
        loop {
            let total: f64 = heap.iter().map(|p| p.value).sum();
            let err: f64 = heap.iter().map(|p| p.error).sum();
            if !total.is_finite() || !err.is_finite() {
                return Err(fail(total, err));
            }
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if err <= target {
                return Ok((Quad { value: total, error: err }, heap.into_vec()));
            }
            if heap.len() >= self.max_panels {
                // Report the best estimate when the budget is exhausted but
                // the result is still usable.
                if err <= 1e3 * target {
                    return Ok((Quad { value: total, error: err }, heap.into_vec()));
                }
                return Err(fail(total, err));
            }
            // Split several of the worst panels per pass to keep the
            // bookkeeping linear in the panel count.
            let passes = (heap.len() / 8).max(1);
            for _ in 0..passes {
                let p = heap.pop().unwrap();
                let m = 0.5 * (p.a + p.b);
                if m <= p.a || m >= p.b {
                    // Panel can no longer be split in floating point.
                    heap.push(Panel { error: 0.0, ..p });
                    continue;
                }
                let (v1, e1) = gk15(&f, p.a, m);
                let (v2, e2) = gk15(&f, m, p.b);
                heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
                heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
            }
        }
    }
}

/// Kronrod nodes and weights of a converged adaptive partition.
#[derive(Debug, Clone, Default)]
pub struct FrozenRule {
    pub nodes: Vec<(f64, f64)>,
}

impl FrozenRule {
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate with default tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    Integrator::default().integrate(f, a, b).map(|q| q.value)
}
