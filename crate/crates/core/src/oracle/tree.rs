//! Trinomial tree with an absorbing top layer, run by forward induction.

use serde::Serialize;

use crate::error::{ensure, FptError, Result};
use crate::forcefield::ForceField;

#[derive(Debug, Clone, Serialize)]
pub struct TreeResult {
    /// Step actually used; chosen so that `y₊` falls on a lattice node.
    pub dtau: f64,
    pub dy: f64,
    /// `τ_n = n·dτ`, `n = 1..`.
    pub tau: Vec<f64>,
    /// Probability absorbed during step `n`.
    pub mass: Vec<f64>,
    /// Running total of `mass`.
    pub cdf: Vec<f64>,
}

impl TreeResult {
    pub fn cdf_at(&self, tau: f64) -> f64 {
        let mut xs = vec![0.0];
        xs.extend_from_slice(&self.tau);
        let mut ys = vec![0.0];
        ys.extend_from_slice(&self.cdf);
        super::pde::interp(&xs, &ys, tau)
    }
}

/// Branch probabilities `(up, mid, down)` for drift `a` on a lattice with
/// `dy² = 6 dτ`, matching the first two moments of `A dτ + √2 dW`.
pub fn branch_probabilities(a: f64, dtau: f64, dy: f64) -> (f64, f64, f64) {
    let m2 = (2.0 * dtau + a * a * dtau * dtau) / (dy * dy);
    let m1 = a * dtau / dy;
    let up = 0.5 * (m2 + m1);
    let down = 0.5 * (m2 - m1);
    (up, 1.0 - up - down, down)
}

/// Absorption mass per step from `y0` with barrier `y₊`. The lattice is
/// truncated `depth` below the start.
pub fn solve_tree(ff: &ForceField, y_plus: f64, y0: f64, dtau: f64, tau_max: f64) -> Result<TreeResult> {
    solve_tree_with_depth(ff, y_plus, y0, dtau, tau_max, 12.0)
}

pub fn solve_tree_with_depth(
    ff: &ForceField,
    y_plus: f64,
    y0: f64,
    dtau: f64,
    tau_max: f64,
    depth: f64,
) -> Result<TreeResult> {
    ensure(y0 < y_plus, || format!("start {y0} must lie below the barrier {y_plus}"))?;
    ensure(dtau > 0.0 && tau_max > dtau, || "need 0 < dtau < tau_max".into())?;
    let b = y_plus - y0;
    let k = (b / (6.0 * dtau).sqrt()).ceil().max(1.0) as usize;
    let dy = b / k as f64;
    let dt = dy * dy / 6.0;
    let below = (depth / dy).ceil() as usize;
    // Node i sits at y₊ - (len - i)·dy; index len is the barrier.
    let len = k + below;
    let y_of = |i: usize| y_plus - (len - i) as f64 * dy;
    let mut probs = Vec::with_capacity(len);
    for i in 0..len {
        let p = branch_probabilities(ff.a(y_of(i)), dt, dy);
        if !(p.0 >= 0.0 && p.1 >= 0.0 && p.2 >= 0.0) {
            return Err(FptError::InvalidParameter(format!(
                "branch probabilities {p:?} at y = {} are out of range; use a smaller dtau",
                y_of(i)
            )));
        }
        probs.push(p);
    }
    let mut w = vec![0.0; len];
    w[below] = 1.0;
    let mut next = vec![0.0; len];
    let steps = (tau_max / dt).ceil() as usize;
    let (mut tau, mut mass, mut cdf) = (Vec::with_capacity(steps), Vec::with_capacity(steps), Vec::with_capacity(steps));
    let mut total = 0.0;
    for n in 1..=steps {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut absorbed = 0.0;
        for i in 0..len {
            let p = w[i];
            if p == 0.0 {
                continue;
            }
            let (u, m, d) = probs[i];
            if i + 1 == len {
                absorbed += u * p;
            } else {
                next[i + 1] += u * p;
            }
            next[i] += m * p;
            // Mass leaving the bottom is dropped.
            if i > 0 {
                next[i - 1] += d * p;
            }
        }
        std::mem::swap(&mut w, &mut next);
        total += absorbed;
        tau.push(n as f64 * dt);
        mass.push(absorbed);
        cdf.push(total);
    }
    Ok(TreeResult { dtau: dt, dy, tau, mass, cdf })
}
