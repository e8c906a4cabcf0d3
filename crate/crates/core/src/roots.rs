//! Bracketed root finding for strictly monotone functions.
//!
//! Bisection guarantees progress; a Newton step is taken instead whenever it
//! lands strictly inside the current bracket. Iteration continues until the
//! bracket collapses to a few ulps, so callers get the best root double
//! precision can represent rather than stopping at a loose residual.

use crate::error::{Error, Result};

const MAX_ITER: usize = 256;

/// Root of a strictly monotone `f` on `[lo, hi]`, with derivative `df` used
/// for Newton acceleration. `f(lo)` and `f(hi)` must differ in sign; an exact
/// zero at either endpoint is returned immediately.
pub fn solve_monotone<F, D>(f: F, df: D, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut fhi = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }

        let width_tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= width_tol {
            // bracket exhausted; hand back the endpoint with the smaller residual
            return Ok(if flo.abs() <= fhi.abs() { lo } else { hi });
        }

        let d = df(x);
        let newton = x - fx / d;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence(format!(
        "no convergence after {MAX_ITER} iterations, bracket [{lo}, {hi}]"
    )))
}

/// Grow `hi` geometrically from `start` until `f(hi) <= 0`, for functions
/// known to decrease to -inf. Errors out instead of looping forever.
pub fn grow_upper<F: Fn(f64) -> f64>(f: F, start: f64) -> Result<f64> {
    let mut hi = start;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Convergence(
                "no sign change found while growing the bracket".into(),
            ));
        }
    }
    Ok(hi)
}
