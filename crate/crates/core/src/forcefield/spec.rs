//! JSON descriptions of drift fields.

use std::sync::Arc;

use exmex::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Builtin, Drift, ForceField, InvariantMeasure, MeasureGrid};
use crate::error::{FptError, Result};
use crate::interp::MonotoneCubic;

/// A field read from configuration.
///
/// ```json
/// {"type": "builtin", "name": "tanh", "alpha": 2.0, "gamma": 1.0}
/// {"type": "table", "points": [[-5, 5], [0, 0], [5, -5]]}
/// {"type": "expr", "expr": "-y^3 - y"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSpec {
    Builtin(Builtin),
    Table {
        points: Vec<(f64, f64)>,
        #[serde(default)]
        label: Option<String>,
    },
    Expr {
        expr: String,
        #[serde(default)]
        label: Option<String>,
    },
}

impl FieldSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FptError::FieldSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<(ForceField, InvariantMeasure)> {
        match self {
            FieldSpec::Builtin(b) => ForceField::builtin(*b),
            FieldSpec::Table { points, label } => {
                let d = TableDrift::new(points)?;
                let ff = ForceField::custom(label.clone().unwrap_or_else(|| "table".into()), Arc::new(d));
                let im = InvariantMeasure::numeric(&ff, MeasureGrid::default())?;
                Ok((ff, im))
            }
            FieldSpec::Expr { expr, label } => {
                let d = ExprDrift::parse(expr)?;
                let ff = ForceField::custom(label.clone().unwrap_or_else(|| expr.clone()), Arc::new(d));
                let im = InvariantMeasure::numeric(&ff, MeasureGrid::default())?;
                Ok((ff, im))
            }
        }
    }
}

/// Drift interpolated from `(y, A)` samples; constant beyond the ends.
pub struct TableDrift {
    interp: MonotoneCubic,
}

impl TableDrift {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (xs, ys) = pts.into_iter().unzip();
        Ok(Self { interp: MonotoneCubic::new(xs, ys).map_err(|e| FptError::FieldSpec(e.to_string()))? })
    }
}

impl Drift for TableDrift {
    fn value(&self, y: f64) -> f64 {
        self.interp.eval(y)
    }

    fn derivative(&self, y: f64) -> f64 {
        self.interp.derivative(y)
    }
}

/// Drift given as an expression in `y`, with a symbolic derivative.
pub struct ExprDrift {
    f: FlatEx<f64>,
    df: FlatEx<f64>,
}

impl ExprDrift {
    pub fn parse(expr: &str) -> Result<Self> {
        let f = exmex::parse::<f64>(expr).map_err(|e| FptError::FieldSpec(e.to_string()))?;
        match f.var_names() {
            [] => {}
            [v] if v == "y" => {}
            other => {
                return Err(FptError::FieldSpec(format!(
                    "expression may only use the variable `y`, found {other:?}"
                )))
            }
        }
        let df = if f.var_names().is_empty() {
            exmex::parse::<f64>("0").map_err(|e| FptError::FieldSpec(e.to_string()))?
        } else {
            f.clone().partial(0).map_err(|e| FptError::FieldSpec(e.to_string()))?
        };
        Ok(Self { f, df })
    }

    fn eval(e: &FlatEx<f64>, y: f64) -> f64 {
        let r = if e.var_names().is_empty() { e.eval(&[]) } else { e.eval(&[y]) };
        r.unwrap_or(f64::NAN)
    }
}

impl Drift for ExprDrift {
    fn value(&self, y: f64) -> f64 {
        Self::eval(&self.f, y)
    }

    fn derivative(&self, y: f64) -> f64 {
        Self::eval(&self.df, y)
    }
}
