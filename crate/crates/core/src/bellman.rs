//! Pure numeric kernels for the maximal-operator Bellman problem.
//!
//! The kernel `H_p(z) = -(p-1) z^p + p z^{p-1}` decreases from H_p(1) = 1 to
//! H_p(p/(p-1)) = 0, and its inverse on that branch is `omega_p`. The exact
//! Bellman value of the three-constraint problem is known on the critical
//! surface where omega_p(f^p/F) = omega_q(f^q/A); off the surface the
//! function h(t) = p t^{p-q} - (p-q) t^p supplies an upper bound on the
//! whole domain. Everything here is a scalar function of its arguments.

use crate::error::{Error, Result};
use crate::roots;
use crate::types::{BoundReport, ConstraintTriple, Exponents, MAX_EXPONENT};

/// Relative tolerance used to decide that a supplied F sits on the critical
/// surface F(f, A).
pub const SURFACE_REL_TOL: f64 = 1e-9;

fn check_exponent(name: &str, e: f64) -> Result<()> {
    if !e.is_finite() || e <= 1.0 || e > MAX_EXPONENT {
        return Err(Error::Domain(format!(
            "{name} must lie in (1, {MAX_EXPONENT}], got {e}"
        )));
    }
    Ok(())
}

/// The kernel H_p(z) = -(p-1) z^p + p z^{p-1} for p > 1, z >= 0.
///
/// H_p(1) = 1 and H_p vanishes at z = p/(p-1); it is strictly decreasing in
/// between, which is the branch [`omega`] inverts.
pub fn hp(p: f64, z: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::Domain(format!("z must be finite and >= 0, got {z}")));
    }
    Ok(-(p - 1.0) * z.powf(p) + p * z.powf(p - 1.0))
}

/// omega_p(tau): the unique z in [1, p/(p-1)] with H_p(z) = tau, for
/// tau in [0, 1]. Strictly decreasing in tau; the endpoints tau = 0 and
/// tau = 1 are returned exactly without iteration.
pub fn omega(p: f64, tau: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if !(tau.is_finite() && (0.0..=1.0).contains(&tau)) {
        return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
    }
    // H_p' degenerates at z = 1; skip iteration at both ends of the branch
    if tau == 1.0 {
        return Ok(1.0);
    }
    let zmax = p / (p - 1.0);
    if tau == 0.0 {
        return Ok(zmax);
    }
    let f = |z: f64| -(p - 1.0) * z.powf(p) + p * z.powf(p - 1.0) - tau;
    let df = |z: f64| p * (p - 1.0) * (z.powf(p - 2.0) - z.powf(p - 1.0));
    roots::solve_monotone(f, df, 1.0, zmax)
}

/// The alpha-perturbed calibration root: the unique z >= 1 with
///
/// ```text
/// (1-alpha)^{q-1} z^q - (z-alpha)^q = tau * alpha * (1-alpha)^{q-1}
/// ```
///
/// for q > 1, alpha in (0,1), tau in (0,1]. The left side is strictly
/// decreasing on [1, inf), and the root tends to omega_q(tau) as alpha -> 0+.
/// It calibrates the extremal construction so its full q-series hits a
/// prescribed value.
pub fn omega_perturbed(q: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_exponent("q", q)?;
    if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(tau.is_finite() && 0.0 < tau && tau <= 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1], got {tau}")));
    }
    if tau == 1.0 {
        return Ok(1.0);
    }
    let w = (1.0 - alpha).powf(q - 1.0);
    let g = move |z: f64| w * z.powf(q) - (z - alpha).powf(q) - tau * alpha * w;
    let dg = move |z: f64| q * (w * z.powf(q - 1.0) - (z - alpha).powf(q - 1.0));
    // g(1) = w * alpha * (1 - tau) > 0 and g -> -inf
    let hi = roots::grow_upper(g, 2.0)?;
    roots::solve_monotone(g, dg, 1.0, hi)
}

fn surface_parts(exps: &Exponents, f: f64, a: f64) -> Result<(f64, f64)> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain(format!("f must be finite and > 0, got {f}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("A must be finite and > 0, got {a}")));
    }
    let tau = f.powf(exps.q()) / a;
    if tau >= 1.0 {
        return Err(Error::Domain(format!(
            "need f^q < A, got f^q = {}, A = {a}",
            f.powf(exps.q())
        )));
    }
    let w = omega(exps.q(), tau)?;
    let h = hp(exps.p(), w)?;
    if h <= 0.0 {
        return Err(Error::Surface(format!(
            "omega_q(f^q/A) = {w} >= p/(p-1) = {}; F(f, A) is infinite for this pair",
            exps.p() / (exps.p() - 1.0)
        )));
    }
    Ok((w, h))
}

/// The critical-surface value F(f, A) = f^p / H_p(omega_q(f^q / A)).
///
/// Rejects pairs whose omega_q value reaches p/(p-1): the surface does not
/// exist there and clamping would fabricate a value.
pub fn critical_f(exps: &Exponents, f: f64, a: f64) -> Result<f64> {
    let (_, h) = surface_parts(exps, f, a)?;
    Ok(f.powf(exps.p()) / h)
}

/// Exact Bellman value on the critical surface:
/// omega_q(f^q/A)^p * F(f, A).
pub fn bellman_on_surface(exps: &Exponents, f: f64, a: f64) -> Result<f64> {
    let (w, h) = surface_parts(exps, f, a)?;
    Ok(f.powf(exps.p()) * w.powf(exps.p()) / h)
}

/// Two-variable Bellman value F * omega_p(f^p / F)^p for 0 < f^p <= F.
pub fn two_var_bellman(p: f64, f: f64, fp: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if !(f.is_finite() && f > 0.0) || !(fp.is_finite() && fp > 0.0) {
        return Err(Error::Domain(format!(
            "f and F must be finite and > 0, got f={f}, F={fp}"
        )));
    }
    let tau = f.powf(p) / fp;
    if tau > 1.0 {
        return Err(Error::Domain(format!(
            "need f^p <= F, got f^p = {}, F = {fp}",
            f.powf(p)
        )));
    }
    Ok(fp * omega(p, tau)?.powf(p))
}

/// h(t) = p t^{p-q} - (p-q) t^p for t > 0. On [1, inf) it decreases from
/// h(1) = q to -inf; [`h_inv`] inverts that branch.
pub fn h_fn(exps: &Exponents, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t must be finite and > 0, got {t}")));
    }
    let (p, q) = (exps.p(), exps.q());
    Ok(p * t.powf(p - q) - (p - q) * t.powf(p))
}

/// Inverse of h on the decreasing branch [1, inf); defined for y <= q.
pub fn h_inv(exps: &Exponents, y: f64) -> Result<f64> {
    let (p, q) = (exps.p(), exps.q());
    if !y.is_finite() || y > q {
        return Err(Error::Domain(format!(
            "h^-1 is defined on (-inf, q]; got y = {y} with q = {q}"
        )));
    }
    if y == q {
        return Ok(1.0);
    }
    let g = move |t: f64| p * t.powf(p - q) - (p - q) * t.powf(p) - y;
    let dg = move |t: f64| p * (p - q) * (t.powf(p - q - 1.0) - t.powf(p - 1.0));
    let hi = roots::grow_upper(g, 2.0)?;
    roots::solve_monotone(g, dg, 1.0, hi)
}

/// General upper bound F * h^{-1}(k)^p with k = (p f^{p-q} A - (p-q) f^p)/F.
///
/// The triple's invariants guarantee 0 < k <= q, so a k outside that range
/// (beyond roundoff at the k = q boundary) signals corrupted input. When the
/// triple lies on the critical surface within [`SURFACE_REL_TOL`] the exact
/// Bellman value is filled in alongside.
pub fn upper_bound(exps: &Exponents, triple: &ConstraintTriple) -> Result<BoundReport> {
    let t = ConstraintTriple::new(exps, triple.f, triple.a, triple.fp)?;
    let (p, q) = (exps.p(), exps.q());
    let k = (p * t.f.powf(p - q) * t.a - (p - q) * t.f.powf(p)) / t.fp;
    if !(k > 0.0 && k <= q * (1.0 + 1e-12)) {
        return Err(Error::Invariant(format!(
            "k = {k} outside (0, q], q = {q}: triple ({}, {}, {}) is corrupted",
            t.f, t.a, t.fp
        )));
    }
    let k = k.min(q);
    let upper = t.fp * h_inv(exps, k)?.powf(p);

    let (on_surface, exact) = match critical_f(exps, t.f, t.a) {
        Ok(fc) if ((t.fp - fc) / fc).abs() <= SURFACE_REL_TOL => {
            (true, Some(bellman_on_surface(exps, t.f, t.a)?))
        }
        _ => (false, None),
    };

    Ok(BoundReport {
        exact,
        upper,
        empirical_lower: None,
        k,
        on_surface,
    })
}
