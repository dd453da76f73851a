//! Bracketed bisection.

use crate::error::{FptError, Result};

/// Bisect `f` on a sign-changing bracket until the bracket width drops to
/// `x_tol` (or stops shrinking in floating point).
///
/// `f_lo` and `f_hi` are the already-known values at the ends; an exact
/// zero at either end is returned immediately.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, f_lo: f64, f_hi: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(FptError::Bracket(format!(
            "f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}"
        )));
    }
    let lo_neg = f_lo < 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
