//! Heuristic tail classification of a drift field.

use serde::Serialize;

use super::ForceField;

/// Tri-state outcome of a sampled check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Yes,
    No,
    Undetermined,
}

impl Flag {
    pub fn is_yes(self) -> bool {
        self == Flag::Yes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    /// `-yA(y)` grows without bound in both tails.
    pub s_minus: Flag,
    /// Tails regular enough for the far-left asymptote `ψ²/(4Ψ²)`.
    pub s_plus_star: Flag,
    /// The drift pushes towards the barrier far to the left.
    pub completely_absorbing: Flag,
}

const SAMPLES: [f64; 3] = [20.0, 40.0, 80.0];

/// Sample the drift at `|y| ∈ {20, 40, 80}` and classify its tails.
///
/// The checks are heuristic; anything non-finite is reported as
/// undetermined with a warning.
pub fn classify(ff: &ForceField) -> Classification {
    let finite = SAMPLES
        .iter()
        .flat_map(|&s| [s, -s])
        .all(|y| ff.a(y).is_finite() && ff.a_prime(y).is_finite());
    if !finite {
        log::warn!("classify({}): drift not finite at sample points", ff.label());
        return Classification {
            s_minus: Flag::Undetermined,
            s_plus_star: Flag::Undetermined,
            completely_absorbing: Flag::Undetermined,
        };
    }

    let growth_ok = |sign: f64| {
        let g: Vec<f64> = SAMPLES.iter().map(|&s| -(sign * s) * ff.a(sign * s)).collect();
        let d1 = g[1] - g[0];
        let d2 = g[2] - g[1];
        d1 > 0.0 && d2 > 0.0 && d2 >= 0.5 * d1
    };
    let s_minus = growth_ok(-1.0) && growth_ok(1.0);

    let regular = |sign: f64| {
        let r1: Vec<f64> = SAMPLES
            .iter()
            .map(|&s| (ff.a_prime(sign * s) / ff.a(sign * s)).abs())
            .collect();
        let r2: Vec<f64> = SAMPLES
            .iter()
            .map(|&s| {
                let a = ff.a(sign * s);
                (ff.a_prime(sign * s) / (a * a)).abs()
            })
            .collect();
        let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300);
        nonincreasing(&r1) && nonincreasing(&r2) && r1[2] < 0.1 && r2[2] < 0.1
    };
    let s_plus_star = s_minus && regular(-1.0) && regular(1.0);

    let left_min = SAMPLES.iter().map(|&s| ff.a(-s)).fold(f64::INFINITY, f64::min);
    let completely_absorbing = left_min >= 0.0;

    let flag = |b: bool| if b { Flag::Yes } else { Flag::No };
    Classification {
        s_minus: flag(s_minus),
        s_plus_star: flag(s_plus_star),
        completely_absorbing: flag(completely_absorbing),
    }
}
