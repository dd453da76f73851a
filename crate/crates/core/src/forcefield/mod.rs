//! Drift fields for the unit-diffusion SDE `dY = κA(Y)dt + √(2κ)dW`.
//!
//! A [`ForceField`] carries the drift `A`, its derivative and the rate `κ`.
//! The built-in models have closed-form invariant densities; anything else
//! (tabulated drifts, expressions, Lamperti-transformed SDEs) goes through a
//! [`Drift`] trait object and a numerically tabulated [`InvariantMeasure`].

mod classify;
mod lamperti;
mod measure;
mod spec;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, FptError, Result};

pub use classify::{classify, Classification, Flag};
pub use lamperti::{lamperti, LampertiConfig, LampertiDrift, SdeSpec};
pub use measure::{InvariantMeasure, MeasureGrid, NumericMeasure};
pub use spec::{ExprDrift, FieldSpec, TableDrift};

/// A drift function supplied from outside the built-in set.
pub trait Drift: Send + Sync {
    fn value(&self, y: f64) -> f64;

    /// Derivative; the default is a central difference, which returns the
    /// average of the one-sided slopes at a kink.
    fn derivative(&self, y: f64) -> f64 {
        let h = 1e-5 * (1.0 + y.abs());
        (self.value(y + h) - self.value(y - h)) / (2.0 * h)
    }
}

impl<F> Drift for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, y: f64) -> f64 {
        self(y)
    }
}

/// Parameterisation of the tanh drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TanhForm {
    /// `A(y) = -α tanh(γy)`.
    #[default]
    Amplitude,
    /// `A(y) = -(α/γ) tanh(γy)`, under which `⟨-A'⟩ = α²/(α+γ²)`.
    Fisher,
}

/// The built-in models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// `A(y) = -y`.
    Ou,
    /// `A(y) = -μ sgn y`.
    DryFriction { mu: f64 },
    Tanh {
        alpha: f64,
        gamma: f64,
        #[serde(default)]
        form: TanhForm,
    },
    /// Arithmetic Brownian motion, `A(y) = μ`.
    Abm { mu: f64 },
}

impl Builtin {
    /// `(amplitude, rate)` with `A(y) = -amplitude·tanh(rate·y)`.
    pub fn tanh_amplitude_rate(alpha: f64, gamma: f64, form: TanhForm) -> (f64, f64) {
        match form {
            TanhForm::Amplitude => (alpha, gamma),
            TanhForm::Fisher => (alpha / gamma, gamma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Ou => "ou",
            Builtin::DryFriction { .. } => "dry_friction",
            Builtin::Tanh { .. } => "tanh",
            Builtin::Abm { .. } => "abm",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Ou => write!(f, "ou"),
            Builtin::DryFriction { mu } => write!(f, "dry_friction:{mu}"),
            Builtin::Tanh { alpha, gamma, form } => match form {
                TanhForm::Amplitude => write!(f, "tanh:{alpha},{gamma}"),
                TanhForm::Fisher => write!(f, "tanh:{alpha},{gamma},fisher"),
            },
            Builtin::Abm { mu } => write!(f, "abm:{mu}"),
        }
    }
}

/// Parses `ou`, `dry_friction[:mu]`, `tanh[:alpha,gamma[,fisher]]`, `abm[:mu]`.
impl FromStr for Builtin {
    type Err = FptError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let mut nums = Vec::new();
        let mut fisher = false;
        if let Some(p) = params {
            for tok in p.split(',').map(str::trim) {
                if tok.eq_ignore_ascii_case("fisher") {
                    fisher = true;
                } else if tok.eq_ignore_ascii_case("amplitude") {
                    fisher = false;
                } else {
                    nums.push(tok.parse::<f64>().map_err(|_| {
                        FptError::InvalidParameter(format!("bad model parameter `{tok}`"))
                    })?);
                }
            }
        }
        let get = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        let b = match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ou" => Builtin::Ou,
            "dry_friction" | "df" => Builtin::DryFriction { mu: get(0, 1.0) },
            "tanh" => Builtin::Tanh {
                alpha: get(0, 2.0),
                gamma: get(1, 1.0),
                form: if fisher { TanhForm::Fisher } else { TanhForm::Amplitude },
            },
            "abm" => Builtin::Abm { mu: get(0, 1.0) },
            other => return Err(FptError::UnknownModel(other.to_string())),
        };
        Ok(b)
    }
}

#[derive(Clone)]
enum DriftKind {
    Ou,
    DryFriction { mu: f64 },
    Tanh { amp: f64, rate: f64 },
    Abm { mu: f64 },
    Custom(Arc<dyn Drift>),
}

/// Drift field `A` with its derivative, rate `κ` and a label.
#[derive(Clone)]
pub struct ForceField {
    drift: DriftKind,
    builtin: Option<Builtin>,
    kappa: f64,
    label: String,
}

impl fmt::Debug for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForceField")
            .field("label", &self.label)
            .field("kappa", &self.kappa)
            .field("builtin", &self.builtin)
            .finish()
    }
}

impl ForceField {
    /// A built-in model together with its closed-form invariant measure.
    pub fn builtin(model: Builtin) -> Result<(ForceField, InvariantMeasure)> {
        let (drift, measure) = match model {
            Builtin::Ou => (DriftKind::Ou, InvariantMeasure::gaussian()),
            Builtin::DryFriction { mu } => {
                ensure(mu > 0.0 && mu.is_finite(), || {
                    format!("dry-friction needs mu > 0, got {mu}")
                })?;
                (DriftKind::DryFriction { mu }, InvariantMeasure::laplace(mu))
            }
            Builtin::Tanh { alpha, gamma, form } => {
                ensure(alpha > 0.0 && gamma > 0.0 && alpha.is_finite() && gamma.is_finite(), || {
                    format!("tanh needs alpha, gamma > 0, got {alpha}, {gamma}")
                })?;
                let (amp, rate) = Builtin::tanh_amplitude_rate(alpha, gamma, form);
                (DriftKind::Tanh { amp, rate }, InvariantMeasure::sech_power(amp, rate))
            }
            Builtin::Abm { mu } => {
                ensure(mu > 0.0 && mu.is_finite(), || format!("abm needs mu > 0, got {mu}"))?;
                (DriftKind::Abm { mu }, InvariantMeasure::exponential(mu))
            }
        };
        let ff = ForceField {
            drift,
            builtin: Some(model),
            kappa: 1.0,
            label: model.to_string(),
        };
        Ok((ff, measure))
    }

    /// Wrap an arbitrary drift. The invariant measure has to be built
    /// separately, usually with [`InvariantMeasure::numeric`].
    pub fn custom(label: impl Into<String>, drift: Arc<dyn Drift>) -> ForceField {
        ForceField {
            drift: DriftKind::Custom(drift),
            builtin: None,
            kappa: 1.0,
            label: label.into(),
        }
    }

    pub fn from_fn<F>(label: impl Into<String>, f: F) -> ForceField
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::custom(label, Arc::new(f))
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        ensure(kappa > 0.0 && kappa.is_finite(), || format!("kappa must be positive, got {kappa}"))?;
        self.kappa = kappa;
        Ok(self)
    }

    /// The same drift seen as a custom field, dropping closed forms.
    pub fn as_custom(&self) -> ForceField {
        let me = self.clone();
        ForceField::custom(self.label.clone(), Arc::new(move |y: f64| me.a(y)))
    }

    #[inline]
    pub fn a(&self, y: f64) -> f64 {
        match &self.drift {
            DriftKind::Ou => -y,
            DriftKind::DryFriction { mu } => {
                if y > 0.0 {
                    -mu
                } else if y < 0.0 {
                    *mu
                } else {
                    0.0
                }
            }
            DriftKind::Tanh { amp, rate } => -amp * (rate * y).tanh(),
            DriftKind::Abm { mu } => *mu,
            DriftKind::Custom(d) => d.value(y),
        }
    }

    /// `A'(y)`. Dry friction returns 0 everywhere, including at the kink.
    pub fn a_prime(&self, y: f64) -> f64 {
        match &self.drift {
            DriftKind::Ou => -1.0,
            DriftKind::DryFriction { .. } => 0.0,
            DriftKind::Tanh { amp, rate } => {
                let c = (rate * y).cosh();
                -amp * rate / (c * c)
            }
            DriftKind::Abm { .. } => 0.0,
            DriftKind::Custom(d) => d.derivative(y),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn builtin_model(&self) -> Option<Builtin> {
        self.builtin
    }

    /// `A(y-)`; differs from [`ForceField::a`] only at the dry-friction kink.
    pub fn a_left(&self, y: f64) -> f64 {
        match &self.drift {
            DriftKind::DryFriction { mu } if y == 0.0 => *mu,
            _ => self.a(y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn all_builtins() -> Vec<Builtin> {
        vec![
            Builtin::Ou,
            Builtin::DryFriction { mu: 1.0 },
            Builtin::DryFriction { mu: 2.5 },
            Builtin::Tanh { alpha: 2.0, gamma: 1.0, form: TanhForm::Amplitude },
            Builtin::Tanh { alpha: 3.0, gamma: 0.5, form: TanhForm::Fisher },
            Builtin::Abm { mu: 0.7 },
        ]
    }

    #[test]
    fn ou_basics() {
        let (ff, im) = ForceField::builtin(Builtin::Ou).unwrap();
        assert_eq!(ff.a(1.5), -1.5);
        assert_relative_eq!(im.psi(0.0), 1.0 / (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-15);
        assert!(im.normalizable());
    }

    #[test]
    fn dry_friction_density() {
        let (_, im) = ForceField::builtin(Builtin::DryFriction { mu: 1.0 }).unwrap();
        for &y in &[-3.0, -0.2, 0.0, 0.4, 5.0] {
            assert_relative_eq!(im.psi(y), 0.5 * (-f64::abs(y)).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    fn tanh_density_is_half_sech_squared() {
        let (ff, im) = ForceField::builtin(Builtin::Tanh {
            alpha: 2.0,
            gamma: 1.0,
            form: TanhForm::Amplitude,
        })
        .unwrap();
        assert_relative_eq!(ff.a(0.3), -2.0 * 0.3f64.tanh(), max_relative = 1e-15);
        for &y in &[-4.0, -1.0, 0.0, 0.5, 3.0] {
            let c = f64::cosh(y);
            assert_relative_eq!(im.psi(y), 0.5 / (c * c), max_relative = 1e-12);
        }
    }

    #[test]
    fn abm_is_not_normalizable() {
        let (ff, im) = ForceField::builtin(Builtin::Abm { mu: 2.0 }).unwrap();
        assert_eq!(ff.a(-7.0), 2.0);
        assert!(!im.normalizable());
        assert_relative_eq!(im.psi(1.0), 2f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ForceField::builtin(Builtin::DryFriction { mu: 0.0 }).is_err());
        assert!(ForceField::builtin(Builtin::DryFriction { mu: -1.0 }).is_err());
        assert!(ForceField::builtin(Builtin::Abm { mu: -1.0 }).is_err());
        assert!("bogus".parse::<Builtin>().is_err());
    }

    #[test]
    fn parse_and_display() {
        for b in all_builtins() {
            let back: Builtin = b.to_string().parse().unwrap();
            assert_eq!(back, b);
        }
        assert_eq!("dry-friction".parse::<Builtin>().unwrap(), Builtin::DryFriction { mu: 1.0 });
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for b in all_builtins() {
            let (ff, _) = ForceField::builtin(b).unwrap();
            for &y in &[-2.3, -0.7, 0.45, 1.9] {
                let h = 1e-6;
                let fd = (ff.a(y + h) - ff.a(y - h)) / (2.0 * h);
                assert!((fd - ff.a_prime(y)).abs() < 1e-6, "{b} at {y}");
            }
        }
    }

    #[test]
    fn log_density_slope_is_drift() {
        // ψ'/ψ = A at 10⁴ random smooth points per model.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for b in all_builtins() {
            let (ff, im) = ForceField::builtin(b).unwrap();
            for _ in 0..10_000 {
                let y: f64 = rng.random_range(-8.0..8.0);
                if y.abs() < 1e-3 {
                    continue;
                }
                let h = 1e-5;
                let fd = (im.ln_psi(y + h) - im.ln_psi(y - h)) / (2.0 * h);
                assert!((fd - ff.a(y)).abs() < 1e-6, "{b} at {y}: {fd} vs {}", ff.a(y));
            }
        }
    }

    #[test]
    fn cdf_is_nondecreasing() {
        for b in all_builtins() {
            let (_, im) = ForceField::builtin(b).unwrap();
            let mut prev = 0.0;
            for k in 0..=400 {
                let y = -10.0 + k as f64 * 0.05;
                let c = im.cdf(y);
                assert!(c >= prev, "{b} at {y}");
                prev = c;
            }
            if im.normalizable() {
                assert!((im.cdf(60.0) - 1.0).abs() < 1e-12);
            }
        }
    }
}
