//! Bracketing root finder shared by the parameter fit and the capture search.

use crate::error::{Error, Result};

/// Bisection on a bracket `[lo, hi]` whose endpoints have opposite signs.
///
/// Stops when the bracket is narrower than `xtol` or `f` is exactly zero.
/// The objective may fail; errors propagate unchanged.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Fit(format!(
            "bracket [{lo}, {hi}] does not enclose a sign change ({f_lo}, {f_hi})"
        )));
    }
    // 200 halvings exhaust f64 resolution for any finite bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x| Ok(1.0 - x), 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn exact_endpoint() {
        assert_eq!(bisect(|x| Ok(x - 1.0), 1.0, 2.0, 1e-12).unwrap(), 1.0);
    }
}
