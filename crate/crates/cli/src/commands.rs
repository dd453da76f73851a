use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use fpt_core::cumulants::cumulants_with_mean;
use fpt_core::decay::{estimate_lambda, lambda_asymptotic, lambda_exact, tanh_polynomial_points};
use fpt_core::hseries::build_table;
use fpt_core::oracle::{simulate, solve_pde, solve_tree};
use fpt_core::oupcf::{hermite_leftmost_zero, pcf_eval, reference_table, rightmost_zero};
use fpt_core::validation::validate;
use fpt_core::{
    Builtin, DensityModel, DensityOptions, FieldSpec, ForceField, FptError, HGrid, McConfig,
    PdeConfig, Side, ValidationCase, ValidationConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::cells;
use crate::config::{Command, OracleKind, RunConfig, Sweep};
use crate::error::CliError;
use crate::output::{Cell, Table, VERSION};

type Res = Result<(), CliError>;

pub fn execute(cfg: &RunConfig, out: &mut dyn Write) -> Res {
    match &cfg.command {
        Command::Lambda { model, barrier, exact, sweep, rmax } => {
            lambda(cfg, out, model, *barrier, *exact, *sweep, *rmax)
        }
        Command::Hseries { model, barrier, rmax, z_left, step } => {
            hseries(cfg, out, model, HGrid { z_left: *z_left, step: *step, z_max: *barrier }, *rmax)
        }
        Command::Cumulants { model, start, barrier, rmax } => cumulants(cfg, out, model, *start, *barrier, *rmax),
        Command::Density { model, start, barrier, tmax, n, validate, theta, lambda, rho, dy, dtau } => {
            let opts = DensityOptions { theta: *theta, lambda: *lambda, rho: *rho };
            let pde = validate.then_some((*dy, *dtau));
            density(cfg, out, model, *start, *barrier, *tmax, *n, opts, pde)
        }
        Command::Oracle { kind } => oracle(cfg, out, kind),
        Command::Table1 => table1(cfg, out),
        Command::Fig1 { model, sweep } => fig1(cfg, out, model, *sweep),
        Command::Validate { model, barriers, offsets, dy, dtau, horizon, curves } => {
            let vcfg = ValidationConfig { dy: *dy, dtau: *dtau, horizon: *horizon, ..ValidationConfig::default() };
            let curves = curves.clone().or_else(|| {
                cfg.out.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".curves.csv");
                    PathBuf::from(s)
                })
            });
            run_validation(cfg, out, model, barriers, offsets, vcfg, curves)
        }
        Command::Pcf { s, y, zero } => pcf(cfg, out, s, y, *zero),
    }
}

fn positive(name: &str, x: f64) -> Res {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::BadInput(format!("--{name} must be positive, got {x}")))
    }
}

fn exact_or_none(model: Option<Builtin>, y: f64) -> Result<Option<f64>, CliError> {
    match model.map(|m| lambda_exact(m, y)) {
        None | Some(Err(FptError::NoPolynomialEigenvalue(_))) => Ok(None),
        Some(r) => Ok(Some(r?)),
    }
}

#[allow(clippy::too_many_arguments)]
fn lambda(
    cfg: &RunConfig,
    out: &mut dyn Write,
    model: &FieldSpec,
    barrier: Option<f64>,
    exact: bool,
    sweep: Option<Sweep>,
    rmax: usize,
) -> Res {
    let points = match (barrier, sweep) {
        (Some(b), None) => vec![b],
        (None, Some(s)) => s.points(),
        _ => return Err(CliError::BadInput("give exactly one of --barrier or --sweep".into())),
    };
    let (ff, im) = model.build()?;
    let builtin = ff.builtin_model();
    let rows = points
        .par_iter()
        .map(|&y| {
            let ex = exact_or_none(builtin, y)?;
            let est = if exact {
                if ex.is_none() {
                    return Err(CliError::Numeric(FptError::Unsupported(format!(
                        "no closed-form decay rate for {} at y+ = {y}",
                        ff.label()
                    ))));
                }
                None
            } else {
                Some(estimate_lambda(&ff, &im, y, rmax)?.lambda)
            };
            let left = lambda_asymptotic(&ff, &im, y, Side::FarLeft);
            let right = lambda_asymptotic(&ff, &im, y, Side::FarRight);
            Ok(cells![y, est, ex, left, right])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let cols = ["y_plus", "lambda_est", "lambda_exact", "lambda_asym_left", "lambda_asym_right"];
    let mut t = Table::new(out, cfg, &cols)?;
    for r in &rows {
        t.row(r)?;
    }
    t.finish()
}

fn hseries(cfg: &RunConfig, out: &mut dyn Write, model: &FieldSpec, grid: HGrid, rmax: usize) -> Res {
    if rmax == 0 {
        return Err(CliError::BadInput("--rmax must be at least 1".into()));
    }
    let (ff, im) = model.build()?;
    let table = build_table(&ff, &im, grid, rmax)?;
    let mut cols = vec!["z".to_string()];
    cols.extend((1..=rmax).map(|r| format!("h{r}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(out, cfg, &cols)?;
    for (j, &z) in table.z.iter().enumerate() {
        let mut row = vec![Cell::from(z)];
        row.extend((1..=rmax).map(|r| Cell::from(table.h(r)[j])));
        t.row(&row)?;
    }
    t.finish()
}

fn cumulants(cfg: &RunConfig, out: &mut dyn Write, model: &FieldSpec, y0: f64, y_plus: f64, rmax: usize) -> Res {
    if rmax == 0 {
        return Err(CliError::BadInput("--rmax must be at least 1".into()));
    }
    let (ff, im) = model.build()?;
    let table = build_table(&ff, &im, HGrid::to(y_plus), rmax)?;
    let set = cumulants_with_mean(&table, &im, ff.kappa(), y0, y_plus, rmax)?;
    let mut t = Table::new(out, cfg, &["quantity", "value"])?;
    for (i, k) in set.kappa_r.iter().enumerate() {
        t.row(&cells![format!("kappa_{}", i + 1), *k])?;
    }
    for (i, k) in set.dimensional().iter().enumerate() {
        t.row(&cells![format!("kappa_{}_dimensional", i + 1), *k])?;
    }
    t.row(&cells!["mean_direct", set.mean_direct])?;
    if rmax >= 2 {
        t.row(&cells!["variance_over_mean_squared", set.variance() / set.mean().powi(2)])?;
    }
    t.row(&cells!["skewness", set.skewness()])?;
    t.finish()
}

#[allow(clippy::too_many_arguments)]
fn density(
    cfg: &RunConfig,
    out: &mut dyn Write,
    model: &FieldSpec,
    y0: f64,
    y_plus: f64,
    tmax: f64,
    n: usize,
    opts: DensityOptions,
    pde: Option<(f64, f64)>,
) -> Res {
    positive("tmax", tmax)?;
    if n == 0 {
        return Err(CliError::BadInput("--n must be at least 1".into()));
    }
    let (ff, im) = model.build()?;
    let m = DensityModel::new(&ff, &im, y0, y_plus, opts)?;
    log::info!(
        "theta = {}, lambda = {} ({:?}), nu = {}, rho = {}",
        m.theta,
        m.lambda,
        m.lambda_source,
        m.nu,
        m.rho
    );
    let taus: Vec<f64> = (1..=n).map(|i| tmax * i as f64 / n as f64).collect();
    let grid = match pde {
        Some((dy, dtau)) => {
            let pc = PdeConfig { dy, dtau, ..PdeConfig::new(y_plus, tmax, vec![y0]) };
            Some(solve_pde(&ff, &pc)?)
        }
        None => None,
    };
    let cols: &[&str] = if grid.is_some() { &["tau", "f_formula", "f_pde", "abs_err"] } else { &["tau", "f_formula"] };
    let mut t = Table::new(out, cfg, cols)?;
    for &tau in &taus {
        let f = m.ln_density(tau).exp();
        match &grid {
            Some(g) => {
                let fp = g.density_at(&g.probes[0], tau);
                t.row(&cells![tau, f, fp, (f - fp).abs()])?;
            }
            None => t.row(&cells![tau, f])?,
        }
    }
    t.finish()
}

/// Indices `0, k, 2k, ..` plus the last, with at most about `rows` entries.
fn thinned(len: usize, rows: usize) -> Vec<usize> {
    let k = len.div_ceil(rows.max(1)).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(k).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn oracle(cfg: &RunConfig, out: &mut dyn Write, kind: &OracleKind) -> Res {
    match kind {
        OracleKind::Pde { model, start, barrier, tmax, dy, dtau, rows } => {
            positive("tmax", *tmax)?;
            let (ff, _) = model.build()?;
            let pc = PdeConfig { dy: *dy, dtau: *dtau, ..PdeConfig::new(*barrier, *tmax, vec![*start]) };
            let g = solve_pde(&ff, &pc)?;
            let p = &g.probes[0];
            let mut t = Table::new(out, cfg, &["tau", "cdf", "density"])?;
            for j in thinned(g.tau_nodes.len(), *rows) {
                t.row(&cells![g.tau_nodes[j], p.cdf[j], p.density[j]])?;
            }
            t.finish()
        }
        OracleKind::Tree { model, start, barrier, tmax, dtau, rows } => {
            positive("tmax", *tmax)?;
            let (ff, _) = model.build()?;
            let r = solve_tree(&ff, *barrier, *start, *dtau, *tmax)?;
            let mut t = Table::new(out, cfg, &["tau", "cdf", "density"])?;
            for j in thinned(r.tau.len(), *rows) {
                t.row(&cells![r.tau[j], r.cdf[j], r.mass[j] / r.dtau])?;
            }
            t.finish()
        }
        OracleKind::Mc { model, start, barrier, tmax, paths, dt, no_bridge, bins } => {
            positive("tmax", *tmax)?;
            if *bins == 0 {
                return Err(CliError::BadInput("--bins must be at least 1".into()));
            }
            let (ff, _) = model.build()?;
            let mc = McConfig { dt: *dt, n_paths: *paths, tau_max: *tmax, bridge: !*no_bridge, seed: cfg.seed };
            let r = simulate(&ff, *barrier, *start, &mc)?;
            log::info!(
                "hits = {}, censored = {}, mean = {} +- {}",
                r.samples.len(),
                r.censored_count,
                r.mean(),
                r.std_error()
            );
            let w = tmax / *bins as f64;
            let mut t = Table::new(out, cfg, &["tau_lo", "tau_hi", "count", "density", "ecdf"])?;
            let mut lo_idx = 0;
            for i in 0..*bins {
                let (lo, hi) = (w * i as f64, if i + 1 == *bins { *tmax } else { w * (i + 1) as f64 });
                let hi_idx = r.samples.partition_point(|s| *s <= hi);
                let count = hi_idx - lo_idx;
                lo_idx = hi_idx;
                let dens = count as f64 / (r.n_paths as f64 * (hi - lo));
                t.row(&cells![lo, hi, count, dens, r.cdf(hi)])?;
            }
            t.finish()
        }
    }
}

fn table1(cfg: &RunConfig, out: &mut dyn Write) -> Res {
    let (ff, im) = ForceField::builtin(Builtin::Ou)?;
    let rows = reference_table()
        .par_iter()
        .map(|row| {
            let exact = rightmost_zero(row.y_plus)?;
            let est = estimate_lambda(&ff, &im, row.y_plus, 4)?.lambda;
            Ok(cells![row.label, row.y_plus, row.lambda, exact, est, est / exact - 1.0])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let cols = ["y_plus_printed", "y_plus", "lambda_table", "lambda_exact", "lambda_est", "est_rel_err"];
    let mut t = Table::new(out, cfg, &cols)?;
    for r in &rows {
        t.row(r)?;
    }
    t.finish()
}

/// Barrier positions with a known exact rate, labelled.
fn fig1_markers(model: Builtin, lo: f64, hi: f64) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    match model {
        Builtin::Ou => {
            for n in 1..=12 {
                let z = hermite_leftmost_zero(n);
                if z < lo {
                    break;
                }
                if z <= hi {
                    out.push((z, format!("zeta_{n}")));
                }
            }
        }
        Builtin::Tanh { alpha, gamma, form } => {
            let (a, g) = Builtin::tanh_amplitude_rate(alpha, gamma, form);
            for (n, y, _) in tanh_polynomial_points(a, g) {
                if (lo..=hi).contains(&y) {
                    out.push((y, format!("P{n}_zero")));
                }
            }
        }
        Builtin::DryFriction { mu } if (lo..=hi).contains(&(1.0 / mu)) => out.push((1.0 / mu, "plateau_end".into())),
        _ => {}
    }
    out
}

fn fig1(cfg: &RunConfig, out: &mut dyn Write, model: &FieldSpec, sweep: Sweep) -> Res {
    let builtin = match model {
        FieldSpec::Builtin(b @ (Builtin::Ou | Builtin::DryFriction { .. } | Builtin::Tanh { .. })) => *b,
        _ => return Err(CliError::BadInput("fig1 takes --model ou, dry_friction or tanh".into())),
    };
    let (ff, im) = model.build()?;
    let mut points: Vec<(f64, String)> = sweep.points().into_iter().map(|y| (y, String::new())).collect();
    for (y, label) in fig1_markers(builtin, sweep.from, sweep.to) {
        match points.iter_mut().find(|p| (p.0 - y).abs() <= 1e-12) {
            Some(p) => p.1 = label,
            None => points.push((y, label)),
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows = points
        .par_iter()
        .map(|(y, marker)| {
            let est = estimate_lambda(&ff, &im, *y, 4)?.lambda;
            let ex = exact_or_none(Some(builtin), *y)?;
            let left = lambda_asymptotic(&ff, &im, *y, Side::FarLeft);
            let right = lambda_asymptotic(&ff, &im, *y, Side::FarRight);
            Ok(cells![*y, est, ex, left, right, marker.as_str()])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let cols = ["y_plus", "lambda_est", "lambda_exact", "asymptote_left", "asymptote_right", "marker"];
    let mut t = Table::new(out, cfg, &cols)?;
    for r in &rows {
        t.row(r)?;
    }
    t.finish()
}

#[derive(Serialize)]
struct Failure {
    y_plus: f64,
    error: String,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: String,
    model: &'a FieldSpec,
    barriers: &'a [f64],
    offsets: &'a [f64],
    settings: ValidationConfig,
    cases: Vec<ValidationCase>,
    failures: Vec<Failure>,
}

/// Solves all barriers, in parallel, and records failures per barrier
/// instead of aborting.
fn run_validation(
    cfg: &RunConfig,
    out: &mut dyn Write,
    model: &FieldSpec,
    barriers: &[f64],
    offsets: &[f64],
    settings: ValidationConfig,
    curves: Option<PathBuf>,
) -> Res {
    if offsets.iter().any(|o| !(*o > 0.0)) {
        return Err(CliError::BadInput("--offsets must all be positive".into()));
    }
    let (ff, im) = model.build()?;
    let results: Vec<(f64, fpt_core::Result<Vec<ValidationCase>>)> = barriers
        .par_iter()
        .map(|&b| {
            let starts: Vec<f64> = offsets.iter().map(|o| b - o).collect();
            (b, validate(&ff, &im, b, &starts, &settings))
        })
        .collect();
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for (b, r) in results {
        match r {
            Ok(c) => cases.extend(c),
            Err(e) => failures.push(Failure { y_plus: b, error: e.to_string() }),
        }
    }
    if let Some(path) = curves {
        let mut f = BufWriter::new(File::create(&path)?);
        let cols = ["model", "y_plus", "y0", "tau", "f_formula", "f_pde"];
        let mut t = Table::new(&mut f, cfg, &cols)?;
        for c in &cases {
            for &(tau, ff_, fp) in &c.curve {
                t.row(&cells![c.model.as_str(), c.y_plus, c.y0, tau, ff_, fp])?;
            }
        }
        t.finish()?;
    }
    let report = Report {
        tool: format!("fpt {VERSION}"),
        model,
        barriers,
        offsets,
        settings,
        cases,
        failures,
    };
    serde_json::to_writer_pretty(&mut *out, &report).map_err(std::io::Error::other)?;
    writeln!(out)?;
    Ok(())
}

fn pcf(cfg: &RunConfig, out: &mut dyn Write, s: &[f64], y: &[f64], zero: bool) -> Res {
    if zero {
        let rows = y
            .par_iter()
            .map(|&y| {
                let lam = rightmost_zero(y)?;
                Ok(cells![y, -lam, lam])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut t = Table::new(out, cfg, &["y", "s_zero", "lambda"])?;
        for r in &rows {
            t.row(r)?;
        }
        return t.finish();
    }
    let mut t = Table::new(out, cfg, &["s", "y", "value", "method"])?;
    for &si in s {
        for &yi in y {
            let e = pcf_eval(si, yi)?;
            let method = serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(str::to_string));
            t.row(&cells![si, yi, e.value, method.unwrap_or_default()])?;
        }
    }
    t.finish()
}
