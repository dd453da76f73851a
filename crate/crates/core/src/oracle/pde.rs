//! Crank–Nicolson solver for `F_τ = A F_y + F_yy` on `[y_min, y₊]` with
//! `F(·, y₊) = 1`, `F(·, y_min) = 0`, `F(0, ·) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, FptError, Result};
use crate::forcefield::ForceField;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeConfig {
    pub y_plus: f64,
    /// Far-field truncation; defaults to `y₊ - 12`.
    pub y_min: Option<f64>,
    pub dy: f64,
    pub dtau: f64,
    pub tau_max: f64,
    /// Starts at which `F` and `f` are recorded at every time step.
    pub probes: Vec<f64>,
    /// Keep the whole profile every this many steps (0: never).
    pub snapshot_every: usize,
    /// Implicit-Euler half steps replacing the first CN steps.
    pub rannacher_steps: usize,
}

impl PdeConfig {
    pub fn new(y_plus: f64, tau_max: f64, probes: Vec<f64>) -> Self {
        PdeConfig {
            y_plus,
            y_min: None,
            dy: 1.0 / 200.0,
            dtau: 1e-3,
            tau_max,
            probes,
            snapshot_every: 0,
            rannacher_steps: 4,
        }
    }
}

/// Time series at one start.
#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub y: f64,
    /// `F(τ_n, y)`, `n = 0..`.
    pub cdf: Vec<f64>,
    /// `f(τ_n, y) = (A F_y + F_yy)(τ_n, y)`.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionGrid {
    pub y_nodes: Vec<f64>,
    pub tau_nodes: Vec<f64>,
    pub probes: Vec<Probe>,
    /// `(τ, F(τ, y_nodes))`.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SolutionGrid {
    pub fn probe(&self, y: f64) -> Option<&Probe> {
        self.probes.iter().find(|p| (p.y - y).abs() < 1e-12)
    }

    /// Piecewise-linear `F(τ)` at a probe.
    pub fn cdf_at(&self, probe: &Probe, tau: f64) -> f64 {
        interp(&self.tau_nodes, &probe.cdf, tau)
    }

    pub fn density_at(&self, probe: &Probe, tau: f64) -> f64 {
        interp(&self.tau_nodes, &probe.density, tau)
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|v| *v <= x);
    let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + t * (ys[j] - ys[j - 1])
}

/// Prefactored tridiagonal system `a_j x_{j-1} + b_j x_j + c_j x_{j+1} = d_j`.
struct Thomas {
    a: Vec<f64>,
    c_star: Vec<f64>,
    inv: Vec<f64>,
}

impl Thomas {
    fn new(a: Vec<f64>, b: &[f64], c: &[f64]) -> Self {
        let n = b.len();
        let mut c_star = vec![0.0; n];
        let mut inv = vec![0.0; n];
        for j in 0..n {
            let denom = b[j] - if j > 0 { a[j] * c_star[j - 1] } else { 0.0 };
            inv[j] = 1.0 / denom;
            c_star[j] = c[j] * inv[j];
        }
        Thomas { a, c_star, inv }
    }

    fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv[0];
        for j in 1..n {
            d[j] = (d[j] - self.a[j] * d[j - 1]) * self.inv[j];
        }
        for j in (0..n - 1).rev() {
            d[j] -= self.c_star[j] * d[j + 1];
        }
    }
}

/// Operator `L = A ∂_y + ∂²_y` as `(lower, diag, upper)` on interior nodes.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    fn apply(&self, f: &[f64], j: usize) -> f64 {
        self.lower[j - 1] * f[j - 1] + self.diag[j - 1] * f[j] + self.upper[j - 1] * f[j + 1]
    }

    /// `I - k L` restricted to interior nodes.
    fn implicit(&self, k: f64) -> Thomas {
        let a = self.lower.iter().map(|v| -k * v).collect();
        let b: Vec<f64> = self.diag.iter().map(|v| 1.0 - k * v).collect();
        let c: Vec<f64> = self.upper.iter().map(|v| -k * v).collect();
        Thomas::new(a, &b, &c)
    }
}

pub fn solve_pde(ff: &ForceField, cfg: &PdeConfig) -> Result<SolutionGrid> {
    ensure(cfg.dy > 0.0 && cfg.dtau > 0.0 && cfg.tau_max > 0.0, || "dy, dtau and tau_max must be positive".into())?;
    let y_min = cfg.y_min.unwrap_or(cfg.y_plus - 12.0);
    ensure(y_min < cfg.y_plus, || format!("y_min {y_min} must lie below y+ {}", cfg.y_plus))?;
    let n = ((cfg.y_plus - y_min) / cfg.dy).round().max(2.0) as usize;
    let y_nodes: Vec<f64> = (0..=n).map(|j| cfg.y_plus - (n - j) as f64 * cfg.dy).collect();
    for &p in &cfg.probes {
        ensure(p > y_nodes[0] && p < cfg.y_plus, || format!("probe {p} outside ({}, {})", y_nodes[0], cfg.y_plus))?;
    }

    let h = cfg.dy;
    let (mut lower, mut diag, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for &y in &y_nodes[1..n] {
        let a = ff.a(y);
        lower.push(1.0 / (h * h) - a / (2.0 * h));
        diag.push(-2.0 / (h * h));
        upper.push(1.0 / (h * h) + a / (2.0 * h));
    }
    let op = Operator { lower, diag, upper };
    let k = cfg.dtau;
    // Both the CN step and an implicit-Euler half step invert I - (k/2) L.
    let lhs = op.implicit(0.5 * k);
    let steps = (cfg.tau_max / k).round() as usize;

    let mut f = vec![0.0; n + 1];
    f[n] = 1.0;
    let mut rhs = vec![0.0; n - 1];
    let mut tau_nodes = Vec::with_capacity(steps + 1);
    let mut probes: Vec<Probe> = cfg
        .probes
        .iter()
        .map(|&y| Probe { y, cdf: Vec::with_capacity(steps + 1), density: Vec::with_capacity(steps + 1) })
        .collect();
    let mut snapshots = Vec::new();

    let record = |f: &[f64], tau: f64, probes: &mut [Probe], tau_nodes: &mut Vec<f64>| {
        tau_nodes.push(tau);
        for p in probes.iter_mut() {
            if tau == 0.0 {
                p.cdf.push(0.0);
                p.density.push(0.0);
                continue;
            }
            let x = (p.y - y_nodes[0]) / h;
            let j = (x.floor() as usize).clamp(1, n - 2);
            let t = x - j as f64;
            p.cdf.push(f[j] + t * (f[j + 1] - f[j]));
            let (d0, d1) = (op.apply(f, j), op.apply(f, j + 1));
            p.density.push(d0 + t * (d1 - d0));
        }
    };
    // F(0, y) = 0 below the barrier; the boundary value takes over for τ > 0.
    record(&vec![0.0; n + 1], 0.0, &mut probes, &mut tau_nodes);

    // Implicit Euler half steps damp the start-up jump at the barrier.
    let startup = cfg.rannacher_steps.min(2 * steps) / 2 * 2;
    let mut tau = 0.0;
    let mut step = 0;
    while step < steps {
        if 2 * step < startup {
            for _ in 0..2 {
                rhs.copy_from_slice(&f[1..n]);
                rhs[n - 2] += 0.5 * k * op.upper[n - 2] * f[n];
                lhs.solve(&mut rhs);
                f[1..n].copy_from_slice(&rhs);
            }
        } else {
            for j in 1..n {
                rhs[j - 1] = f[j] + 0.5 * k * op.apply(&f, j);
            }
            rhs[n - 2] += 0.5 * k * op.upper[n - 2] * f[n];
            lhs.solve(&mut rhs);
            f[1..n].copy_from_slice(&rhs);
        }
        step += 1;
        tau = step as f64 * k;
        if let Some(bad) = f.iter().find(|v| !(**v >= -1e-6 && **v <= 1.0 + 1e-6)) {
            return Err(FptError::Unstable { tau, value: *bad });
        }
        record(&f, tau, &mut probes, &mut tau_nodes);
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            snapshots.push((tau, f.clone()));
        }
    }
    log::debug!("pde solved to tau = {tau} on {} nodes", n + 1);
    Ok(SolutionGrid { y_nodes, tau_nodes, probes, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{inverse_gaussian_density, ou_equilibrium_density};
    use crate::forcefield::Builtin;

    fn sup_error(grid: &SolutionGrid, y0: f64, exact: impl Fn(f64) -> f64, from: f64) -> f64 {
        let p = grid.probe(y0).unwrap();
        grid.tau_nodes
            .iter()
            .zip(&p.density)
            .filter(|(t, _)| **t >= from)
            .map(|(t, d)| (d - exact(*t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn abm_matches_inverse_gaussian() {
        let (ff, _) = ForceField::builtin(Builtin::Abm { mu: 1.0 }).unwrap();
        let grid = solve_pde(&ff, &PdeConfig::new(0.0, 6.0, vec![-1.0])).unwrap();
        let err = sup_error(&grid, -1.0, |t| inverse_gaussian_density(1.0, -1.0, 0.0, t), 0.0);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn ou_equilibrium_matches_closed_form() {
        let (ff, _) = ForceField::builtin(Builtin::Ou).unwrap();
        let grid = solve_pde(&ff, &PdeConfig::new(0.0, 5.0, vec![-1.0])).unwrap();
        let err = sup_error(&grid, -1.0, |t| ou_equilibrium_density(-1.0, t), 0.0);
        assert!(err < 1e-3, "{err}");
        let p = grid.probe(-1.0).unwrap();
        assert!(p.cdf.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn second_order_convergence() {
        let (ff, _) = ForceField::builtin(Builtin::Abm { mu: 1.0 }).unwrap();
        let exact = |t: f64| inverse_gaussian_density(1.0, -1.0, 0.0, t);
        let mut errs = Vec::new();
        for (dy, dt) in [(1.0 / 25.0, 8e-3), (1.0 / 50.0, 4e-3)] {
            let mut cfg = PdeConfig::new(0.0, 4.0, vec![-1.0]);
            cfg.dy = dy;
            cfg.dtau = dt;
            errs.push(sup_error(&solve_pde(&ff, &cfg).unwrap(), -1.0, exact, 0.0));
        }
        let ratio = errs[0] / errs[1];
        assert!((2.5..=6.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn complete_absorption() {
        let (ff, _) = ForceField::builtin(Builtin::Ou).unwrap();
        let mut cfg = PdeConfig::new(1.0, 10.0 / 0.388, vec![0.0]);
        cfg.dy = 1.0 / 50.0;
        cfg.dtau = 1e-2;
        let grid = solve_pde(&ff, &cfg).unwrap();
        assert!(*grid.probe(0.0).unwrap().cdf.last().unwrap() >= 0.999);
    }

    #[test]
    fn doubling_the_domain_changes_little() {
        let (ff, _) = ForceField::builtin(Builtin::Ou).unwrap();
        let mut cfg = PdeConfig::new(1.0, 5.0, vec![-1.0]);
        cfg.dy = 1.0 / 50.0;
        cfg.dtau = 5e-3;
        let a = solve_pde(&ff, &cfg).unwrap();
        cfg.y_min = Some(1.0 - 24.0);
        let b = solve_pde(&ff, &cfg).unwrap();
        let (pa, pb) = (a.probe(-1.0).unwrap(), b.probe(-1.0).unwrap());
        let d = pa.cdf.iter().zip(&pb.cdf).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
    }
}
