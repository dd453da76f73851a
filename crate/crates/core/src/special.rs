//! Scalar special functions used throughout the crate.

use std::f64::consts::FRAC_1_SQRT_2;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `Φ(-x)/φ(x)`, accurate in relative terms for all x where
/// the result is finite.
pub fn mills_ratio(x: f64) -> f64 {
    if x < 5.0 {
        norm_cdf(-x) / norm_pdf(x)
    } else {
        // Lentz evaluation of 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64;
            d = x + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 / f
    }
}

/// `Φ(x)/φ(x)`; this is `h₁` for the OU process and `𝐃₁(x)`.
pub fn norm_cdf_over_pdf(x: f64) -> f64 {
    mills_ratio(-x)
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_he(n: usize, x: f64) -> f64 {
    hermite_he_pair(n, x).0
}

/// `(He_n(x), He_{n-1}(x))`, with `He_{-1} := 0`.
pub(crate) fn hermite_he_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Catalan number `(2r)!/(r!(r+1)!)` as a float.
pub fn catalan(r: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..r {
        c *= 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
    }
    c
}

/// `(2r-1)!!`, with `(-1)!! = 1`.
pub fn double_factorial_odd(r: usize) -> f64 {
    (1..=r).map(|k| (2 * k - 1) as f64).product()
}

/// Numerically stable `ln cosh x`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Beta function via log-gamma.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mills_ratio_branches_agree() {
        // Both branches near the switch point.
        let a = norm_cdf(-5.0) / norm_pdf(5.0);
        assert_relative_eq!(a, mills_ratio(5.0), max_relative = 1e-14);
        // High-precision reference values.
        for (x, r) in [(1.0, 0.655_679_542_418_798_47), (3.0, 0.304_590_298_710_103_30), (5.0, 0.192_808_104_715_315_76)] {
            assert_relative_eq!(mills_ratio(x), r, max_relative = 2e-15);
        }
        let b = mills_ratio(4.999_999);
        assert_relative_eq!(a, b, max_relative = 1e-6);
        // Asymptotic series at large argument.
        let x = 30.0_f64;
        let series = 1.0 / x - 1.0 / x.powi(3) + 3.0 / x.powi(5) - 15.0 / x.powi(7);
        assert_relative_eq!(mills_ratio(x), series, max_relative = 1e-9);
    }

    #[test]
    fn cdf_over_pdf_at_zero() {
        assert_relative_eq!(
            norm_cdf_over_pdf(0.0),
            (std::f64::consts::PI / 2.0).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn hermite_low_orders() {
        for &x in &[-2.0, -0.3, 0.0, 1.7] {
            assert_relative_eq!(hermite_he(2, x), x * x - 1.0, epsilon = 1e-14);
            assert_relative_eq!(hermite_he(3, x), x * x * x - 3.0 * x, epsilon = 1e-14);
            assert_relative_eq!(
                hermite_he(4, x),
                x.powi(4) - 6.0 * x * x + 3.0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn catalan_numbers() {
        let expect = [1.0, 1.0, 2.0, 5.0, 14.0, 42.0, 132.0, 429.0];
        for (r, e) in expect.iter().enumerate() {
            assert_eq!(catalan(r), *e);
        }
    }

    #[test]
    fn ln_cosh_large() {
        assert_relative_eq!(ln_cosh(800.0), 800.0 - std::f64::consts::LN_2, max_relative = 1e-15);
        assert_relative_eq!(ln_cosh(0.3), 0.3_f64.cosh().ln(), max_relative = 1e-14);
    }
}
