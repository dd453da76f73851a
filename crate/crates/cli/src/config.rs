//! Command-line grammar and the serialisable run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use fpt_core::{Builtin, FieldSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fpt", version, about = "First-passage times of mean-reverting diffusions")]
pub struct Cli {
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the Monte Carlo oracle.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration as a JSON file, or inline JSON starting with `{`.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::BadInput(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run configuration serialises")
    }

    /// Merges the parsed command line with an optional configuration file.
    /// A subcommand on the command line replaces the configured one; `--out`
    /// and `--seed` override the configured values.
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let base = match &cli.config {
            Some(c) if c.trim_start().starts_with('{') => Some(Self::from_json(c)?),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::BadInput(format!("cannot read config `{path}`: {e}")))?;
                Some(Self::from_json(&text)?)
            }
            None => None,
        };
        let (command, out, seed) = match (base, cli.command) {
            (Some(b), Some(cmd)) => (cmd, b.out, b.seed),
            (None, Some(cmd)) => (cmd, None, default_seed()),
            (Some(b), None) => (b.command, b.out, b.seed),
            (None, None) => return Err(CliError::BadInput("no subcommand given; see `fpt --help`".into())),
        };
        Ok(RunConfig { command, out: cli.out.or(out), seed: cli.seed.unwrap_or(seed) })
    }
}

/// `from:to:n`, `n` evenly spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub n: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.from];
        }
        let h = (self.to - self.from) / (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.to } else { self.from + h * i as f64 }).collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("sweep `{s}` is not of the form from:to:n"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}` in sweep"));
        let (from, to) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}` in sweep"))?;
        if n == 0 || !from.is_finite() || !to.is_finite() || (n > 1 && from >= to) {
            return Err(format!("sweep `{s}` needs from < to and n >= 1"));
        }
        Ok(Sweep { from, to, n })
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.from, self.to, self.n)
    }
}

/// Accepts a built-in name (`ou`, `dry_friction:1`, `tanh:2,1`, `abm:1`),
/// inline JSON, or `@file.json`.
pub fn parse_model(s: &str) -> Result<FieldSpec, String> {
    let t = s.trim();
    if let Some(path) = t.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
        return FieldSpec::from_json(&text).map_err(|e| e.to_string());
    }
    if t.starts_with('{') {
        return FieldSpec::from_json(t).map_err(|e| e.to_string());
    }
    t.parse::<Builtin>().map(FieldSpec::Builtin).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Decay rate estimate, with exact value and asymptotes where known.
    Lambda {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        barrier: Option<f64>,
        /// Report only the closed form; fail where there is none.
        #[arg(long)]
        #[serde(default)]
        exact: bool,
        #[arg(long, allow_hyphen_values = true)]
        sweep: Option<Sweep>,
        #[arg(long, default_value_t = 4)]
        rmax: usize,
    },
    /// Table of the coefficients h_r(z).
    Hseries {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long, default_value_t = 6)]
        rmax: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
        z_left: f64,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        step: f64,
    },
    /// Cumulants of the hitting time.
    Cumulants {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long, default_value_t = 4)]
        rmax: usize,
    },
    /// The approximate density on a time grid.
    Density {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Add the finite-difference density and the pointwise error.
        #[arg(long)]
        #[serde(default)]
        validate: bool,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dy: f64,
        #[arg(long, default_value_t = 2e-3)]
        dtau: f64,
    },
    /// Numerical reference solutions.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// The OU reference table of λ against barrier position.
    Table1,
    /// λ against barrier for ou, dry_friction or tanh.
    Fig1 {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true, default_value = "-3:3:61")]
        sweep: Sweep,
    },
    /// Density formula against the PDE solver on a grid of barriers and starts.
    Validate {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_values_t = vec![-1.0, 0.0, 1.0, 2.0])]
        barriers: Vec<f64>,
        /// Starts are `barrier - offset`.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 4.0])]
        offsets: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        dy: f64,
        #[arg(long, default_value_t = 2e-3)]
        dtau: f64,
        /// Horizon in units of 1/λ.
        #[arg(long, default_value_t = 12.0)]
        horizon: f64,
        /// Curves CSV; defaults to `<out>.curves.csv` when `--out` is set.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Parabolic cylinder function values, or OU decay rates with `--zero`.
    Pcf {
        #[arg(long = "s", allow_hyphen_values = true, value_delimiter = ',', default_values_t = vec![0.5])]
        s: Vec<f64>,
        #[arg(long = "y", allow_hyphen_values = true, value_delimiter = ',', default_values_t = vec![0.0])]
        y: Vec<f64>,
        /// Rightmost zero in s of D_s(y), i.e. -λ for a barrier at y.
        #[arg(long)]
        #[serde(default)]
        zero: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "snake_case")]
pub enum OracleKind {
    /// Crank–Nicolson solution of the backward equation.
    Pde {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 0.005)]
        dy: f64,
        #[arg(long, default_value_t = 1e-3)]
        dtau: f64,
        /// Maximum number of output rows.
        #[arg(long, default_value_t = 1000)]
        rows: usize,
    },
    /// Trinomial tree.
    Tree {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-3)]
        dtau: f64,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
    },
    /// Euler–Maruyama Monte Carlo; histogram of hitting times.
    Mc {
        #[arg(long, value_parser = parse_model, default_value = "ou")]
        model: FieldSpec,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        barrier: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Disable the Brownian-bridge crossing test.
        #[arg(long)]
        #[serde(default)]
        no_bridge: bool,
        #[arg(long, default_value_t = 200)]
        bins: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lambda { .. } => "lambda",
            Command::Hseries { .. } => "hseries",
            Command::Cumulants { .. } => "cumulants",
            Command::Density { .. } => "density",
            Command::Oracle { kind: OracleKind::Pde { .. } } => "oracle pde",
            Command::Oracle { kind: OracleKind::Tree { .. } } => "oracle tree",
            Command::Oracle { kind: OracleKind::Mc { .. } } => "oracle mc",
            Command::Table1 => "table1",
            Command::Fig1 { .. } => "fig1",
            Command::Validate { .. } => "validate",
            Command::Pcf { .. } => "pcf",
        }
    }
}
