//! Parabolic cylinder functions in the normalisation
//! `𝐃_s(y) = Γ(s)⁻¹ ∫₀^∞ u^{s-1} e^{yu - u²/2} du`,
//! and the OU decay rate as the rightmost zero of `s ↦ 𝐃_s(y₊)`.

use serde::Serialize;

use crate::error::{FptError, Result};
use crate::quad::Integrator;
use crate::roots::bisect;
use crate::special::{gamma, hermite_he_pair, ln_gamma};

/// Largest `|y|` accepted by [`pcf`].
pub const PCF_Y_MAX: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PcfMethod {
    Integral,
    Recursion,
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PcfEval {
    pub s: f64,
    pub y: f64,
    pub value: f64,
    pub method: PcfMethod,
}

/// `𝐃_s(y)`.
pub fn pcf(s: f64, y: f64) -> Result<f64> {
    pcf_eval(s, y).map(|e| e.value)
}

pub fn pcf_eval(s: f64, y: f64) -> Result<PcfEval> {
    if !s.is_finite() || !y.is_finite() {
        return Err(FptError::InvalidParameter(format!("pcf({s}, {y}): non-finite input")));
    }
    if y.abs() > PCF_Y_MAX {
        return Err(FptError::Overflow { what: "pcf", arg: y, range: "|y| <= 40" });
    }
    let (value, method) = if s <= 0.0 && s == s.round() {
        let r = (-s) as usize;
        let sign = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
        (sign * hermite_he_pair(r, y).0, PcfMethod::Hermite)
    } else if s > 0.0 {
        (pcf_integral(s, y)?, PcfMethod::Integral)
    } else {
        // Reduce to σ ∈ (0, 1) and recurse downwards:
        // 𝐃_s = -y 𝐃_{s+1} + (s+1) 𝐃_{s+2}.
        let n = (-s).ceil() as usize;
        let sigma = s + n as f64;
        let mut d2 = pcf_integral(sigma + 1.0, y)?;
        let mut d1 = pcf_integral(sigma, y)?;
        for k in 1..=n {
            let order = sigma - k as f64;
            let d0 = -y * d1 + (order + 1.0) * d2;
            d2 = d1;
            d1 = d0;
        }
        (d1, PcfMethod::Recursion)
    };
    if !value.is_finite() {
        return Err(FptError::Overflow { what: "pcf", arg: y, range: "|y| <= 40 and moderate s" });
    }
    Ok(PcfEval { s, y, value, method })
}

/// Integral representation for `s > 0`.
fn pcf_integral(s: f64, y: f64) -> Result<f64> {
    let quad = Integrator { abs_tol: 1e-300, rel_tol: 1e-13, max_panels: 400 };
    let head = if s >= 1.0 {
        // [0, 1] with u = v^{1/s}; the u^{s-1} factor becomes 1/s.
        let q = quad.integrate(
            |v: f64| {
                let u = v.powf(1.0 / s);
                (y * u - 0.5 * u * u).exp()
            },
            0.0,
            1.0,
        )?;
        q.value / gamma(s + 1.0)
    } else {
        // Subtract g(0) = 1 so the remainder is u^s times a smooth
        // function, then put u = v^{1/(s+1)}.
        let p = 1.0 / (s + 1.0);
        let q = quad.integrate(
            |v: f64| {
                let u = v.powf(p);
                (y * u - 0.5 * u * u).exp_m1() / u
            },
            0.0,
            1.0,
        )?;
        1.0 / gamma(s + 1.0) + s * q.value / gamma(s + 2.0)
    };

    // [1, ∞): scale by the peak of φ(u) = (s-1)ln u + yu - u²/2.
    let phi = |u: f64| (s - 1.0) * u.ln() + y * u - 0.5 * u * u;
    let u_star = (0.5 * (y + (y * y + 4.0 * (s - 1.0)).max(0.0).sqrt())).max(1.0);
    let peak = phi(u_star);
    let mut u_end = u_star + 1.0;
    while phi(u_end) > peak - 46.0 {
        u_end = u_star + 2.0 * (u_end - u_star);
    }
    let breaks = if u_star > 1.0 { vec![1.0, u_star, u_end] } else { vec![1.0, u_end] };
    let tail = quad.integrate_breaks(|u: f64| (phi(u) - peak).exp(), &breaks)?;
    let tail = tail.value * (peak - ln_gamma(s)).exp();
    Ok(head + tail)
}

/// Truncated reflection sum `Σ_{k=0}^{kmax} c_k 𝐃_{2k+1}(y)` with
/// `c_k = (s)_k (1-s)_k / k!`; equals `𝐃_s(y)𝐃_{1-s}(y)` as `kmax → ∞`.
pub fn reflection_product(s: f64, y: f64, kmax: usize) -> Result<f64> {
    check_reflection_order(s)?;
    let mut c = 1.0;
    let mut total = 0.0;
    for k in 0..=kmax {
        total += c * pcf(2.0 * k as f64 + 1.0, y)?;
        let kf = k as f64;
        c *= (kf + s) * (kf + 1.0 - s) / (kf + 1.0);
    }
    Ok(total)
}

/// Reflection sum continued until terms stop contributing. Returns the sum
/// and the number of terms used.
pub fn reflection_product_adaptive(s: f64, y: f64) -> Result<(f64, usize)> {
    check_reflection_order(s)?;
    let mut c = 1.0;
    let mut total = 0.0;
    let mut quiet = 0;
    for k in 0..400 {
        let term = c * pcf(2.0 * k as f64 + 1.0, y)?;
        total += term;
        if term.abs() <= 1e-17 * total.abs() {
            quiet += 1;
            if quiet == 3 {
                return Ok((total, k + 1));
            }
        } else {
            quiet = 0;
        }
        let kf = k as f64;
        c *= (kf + s) * (kf + 1.0 - s) / (kf + 1.0);
    }
    Err(FptError::Unsupported(format!("reflection sum did not settle for s = {s}, y = {y}")))
}

fn check_reflection_order(s: f64) -> Result<()> {
    if s == s.round() {
        return Err(FptError::InvalidParameter(format!(
            "reflection formula needs non-integer s, got {s}"
        )));
    }
    Ok(())
}

/// Controls for [`rightmost_zero_with`].
#[derive(Debug, Clone, Copy)]
pub struct ZeroScan {
    /// Step of the downward scan in `s`.
    pub step: f64,
    /// Bisection tolerance in `s`; 0 runs to machine precision.
    pub tol: f64,
}

impl Default for ZeroScan {
    fn default() -> Self {
        Self { step: 0.05, tol: 0.0 }
    }
}

/// Exact OU decay rate `λ = -s*` where `s*` is the largest negative zero
/// of `s ↦ 𝐃_s(y₊)`.
pub fn rightmost_zero(y_plus: f64) -> Result<f64> {
    rightmost_zero_with(y_plus, ZeroScan::default())
}

pub fn rightmost_zero_with(y_plus: f64, scan: ZeroScan) -> Result<f64> {
    if !(scan.step > 0.0) {
        return Err(FptError::InvalidParameter("scan step must be positive".into()));
    }
    let f = |s: f64| pcf(s, y_plus);
    // λ ≈ y₊²/4 far left; scan comfortably past it.
    let s_min = -(0.4 * y_plus * y_plus + 10.0);
    let mut trace = Vec::new();
    let mut s_prev = 0.0;
    let mut f_prev = f(0.0)?;
    let mut k = 1usize;
    loop {
        let mut s = -(k as f64) * scan.step;
        if (s - s.round()).abs() < 1e-12 {
            s = s.round();
        }
        if s < s_min {
            break;
        }
        let fs = f(s)?;
        trace.push((s, fs));
        if fs == 0.0 {
            return Ok(-s);
        }
        if fs.signum() != f_prev.signum() {
            let root = bisect(f, s, s_prev, fs, f_prev, scan.tol)?;
            return Ok(-root);
        }
        s_prev = s;
        f_prev = fs;
        k += 1;
    }
    let shown: Vec<String> = trace
        .iter()
        .rev()
        .take(8)
        .map(|(s, v)| format!("D({s:.3}) = {v:e}"))
        .collect();
    Err(FptError::Bracket(format!(
        "no zero of s -> D_s({y_plus}) in [{s_min:.2}, 0); last scan points: {}",
        shown.join(", ")
    )))
}

/// Leftmost zero `ζ_n` of `He_n`; a barrier there gives `λ = n` for OU.
pub fn hermite_leftmost_zero(n: usize) -> f64 {
    assert!(n >= 1, "hermite_leftmost_zero needs n >= 1");
    // Newton from the left of all zeros converges monotonically.
    let mut x = -((4 * n + 2) as f64).sqrt();
    for _ in 0..200 {
        let (h, hm1) = hermite_he_pair(n, x);
        let step = h / (n as f64 * hm1);
        let next = x - step;
        if step.abs() <= 1e-16 * (1.0 + next.abs()) || next <= x {
            return next.max(x);
        }
        x = next;
    }
    x
}

/// A row of the published OU table of `λ` against barrier position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    /// Barrier as printed.
    pub label: &'static str,
    /// Barrier used for evaluation: the Hermite zero `ζ_n` on exact rows.
    pub y_plus: f64,
    pub lambda: f64,
    /// True when `λ` is an integer attained exactly at `ζ_n`.
    pub exact: bool,
}

/// The twelve reference rows.
pub fn reference_table() -> Vec<ReferenceRow> {
    let exact = |label, n: usize| ReferenceRow {
        label,
        y_plus: hermite_leftmost_zero(n),
        lambda: n as f64,
        exact: true,
    };
    let approx = |label, y_plus, lambda| ReferenceRow { label, y_plus, lambda, exact: false };
    vec![
        exact("-2.86", 5),
        exact("-2.33", 4),
        exact("-sqrt(3)", 3),
        exact("-1", 2),
        approx("-0.5", -0.5, 1.449),
        exact("0", 1),
        approx("0.5", 0.5, 0.649),
        approx("1", 1.0, 0.388),
        approx("1.5", 1.5, 0.209),
        approx("2", 2.0, 0.0973),
        approx("2.5", 2.5, 0.0377),
        approx("3", 3.0, 0.0116),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{hermite_he, norm_cdf_over_pdf};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn order_one_is_mills_ratio() {
        for &y in &[-6.0, -2.0, -0.3, 0.0, 1.1, 3.5, 7.0] {
            assert_relative_eq!(pcf(1.0, y).unwrap(), norm_cdf_over_pdf(y), max_relative = 1e-13);
        }
        assert_relative_eq!(pcf(1.0, 0.0).unwrap(), 1.253_314_137_315_500_3, max_relative = 1e-14);
    }

    #[test]
    fn nonpositive_integers_are_hermite() {
        for &y in &[-2.5, -1.0, 0.0, 0.7, 2.0] {
            assert_relative_eq!(pcf(-2.0, y).unwrap(), y * y - 1.0, epsilon = 1e-14);
            assert_relative_eq!(pcf(-3.0, y).unwrap(), -hermite_he(3, y), epsilon = 1e-13);
            assert_eq!(pcf(-4.0, y).unwrap(), hermite_he(4, y));
        }
        assert_eq!(pcf_eval(-2.0, 1.0).unwrap().method, PcfMethod::Hermite);
    }

    #[test]
    fn reference_values() {
        // 𝐃_s(y) = e^{y²/4} D_{-s}(-y) in the Whittaker normalisation,
        // evaluated at 30 digits.
        let cases = [
            (1e-7, 1.0, 1.000_000_272_858_809_1),
            (0.05, 1.0, 1.136_826_774_204_014_9),
            (0.5, 0.0, 1.216_280_214_257_520_3),
            (21.0, 0.0, 3.372_849_391_595_481_2e-10),
            (-2.5, -1.0, -0.959_985_726_306_149_7),
        ];
        for (s, y, v) in cases {
            assert_relative_eq!(pcf(s, y).unwrap(), v, max_relative = 1e-12);
        }
        // Near a zero only absolute accuracy is meaningful.
        assert!((pcf(-0.0116, 3.0).unwrap() - 4.834_804_884_920_156e-4).abs() < 1e-10);
    }

    #[test]
    fn order_two_closed_form() {
        // 𝐃₂ = 1 + y 𝐃₁
        for &y in &[-3.0, 0.0, 2.0] {
            assert_relative_eq!(
                pcf(2.0, y).unwrap(),
                1.0 + y * norm_cdf_over_pdf(y),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn continuous_across_integer_orders() {
        for &y in &[-1.5, 0.4, 2.0] {
            let at = pcf(-2.0, y).unwrap();
            let near = pcf(-2.0 + 1e-9, y).unwrap();
            assert!((at - near).abs() < 1e-7, "{y}");
            let near = pcf(-2.0 - 1e-9, y).unwrap();
            assert!((at - near).abs() < 1e-7, "{y}");
        }
    }

    #[test]
    fn derivative_in_y() {
        for &(s, y) in &[(0.5, 0.3), (-0.7, -1.2), (-2.4, 1.0), (1.7, 2.5)] {
            let h = 1e-5;
            let fd = (pcf(s, y + h).unwrap() - pcf(s, y - h).unwrap()) / (2.0 * h);
            let exact = s * pcf(s + 1.0, y).unwrap();
            assert!((fd - exact).abs() < 1e-8 * (1.0 + exact.abs()), "({s}, {y})");
        }
    }

    #[test]
    fn large_argument_overflows_cleanly() {
        assert!(matches!(pcf(1.0, 41.0), Err(FptError::Overflow { .. })));
        assert!(pcf(0.5, -40.0).is_ok());
    }

    #[test]
    fn reflection_at_half() {
        let d = pcf(0.5, 0.0).unwrap();
        let (sum, used) = reflection_product_adaptive(0.5, 0.0).unwrap();
        assert_relative_eq!(sum, d * d, max_relative = 1e-12);
        assert!(used > 10);
        assert!(reflection_product(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn reflection_symmetric_in_s() {
        let a = reflection_product(0.3, 0.8, 40).unwrap();
        let b = reflection_product(0.7, 0.8, 40).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn table_zeros() {
        assert_eq!(rightmost_zero(0.0).unwrap(), 1.0);
        assert_eq!(rightmost_zero(-1.0).unwrap(), 2.0);
        assert!((rightmost_zero(-3f64.sqrt()).unwrap() - 3.0).abs() < 1e-10);
        assert!((rightmost_zero(2.0).unwrap() - 0.0973).abs() < 5e-5);
        assert!((rightmost_zero(3.0).unwrap() - 0.0116).abs() < 5e-5);
    }

    #[test]
    fn reference_rows_match() {
        for row in reference_table() {
            let lam = rightmost_zero(row.y_plus).unwrap();
            let tol = if row.exact { 1e-8 } else { 5e-4 };
            assert!((lam - row.lambda).abs() <= tol, "{}: {lam}", row.label);
            let printed: f64 = row.label.parse().unwrap_or(-(3f64.sqrt()));
            assert!((printed - row.y_plus).abs() < 5e-3, "{}", row.label);
        }
    }

    #[test]
    fn hermite_zeros() {
        assert_eq!(hermite_leftmost_zero(1), 0.0);
        assert_relative_eq!(hermite_leftmost_zero(2), -1.0, max_relative = 1e-15);
        assert_relative_eq!(hermite_leftmost_zero(3), -3f64.sqrt(), max_relative = 1e-15);
        assert!((hermite_leftmost_zero(5) + 2.857).abs() < 1e-3);
        for n in 1..=5 {
            let z = hermite_leftmost_zero(n);
            assert!((rightmost_zero(z).unwrap() - n as f64).abs() < 1e-8, "n = {n}");
        }
    }

    #[test]
    fn decay_rate_decreasing_in_barrier() {
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let y = -3.0 + 6.0 * k as f64 / 49.0;
            let l = rightmost_zero(y).unwrap();
            assert!(l < prev, "not decreasing at {y}");
            prev = l;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn recursion_residual(s in -3.0f64..0.0, y in -3.0f64..3.0) {
            let d0 = pcf(s, y).unwrap();
            let d1 = pcf(s + 1.0, y).unwrap();
            let d2 = pcf(s + 2.0, y).unwrap();
            let scale = d0.abs().max((y * d1).abs()).max(((s + 1.0) * d2).abs());
            prop_assert!((d0 + y * d1 - (s + 1.0) * d2).abs() <= 1e-9 * scale);
        }
    }
}
