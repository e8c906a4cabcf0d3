//! Shared domain types: exponent pairs, constraint triples, bound reports.

use crate::error::{Error, Result};

/// Largest exponent accepted anywhere in the crate. Powers like z^p run out
/// of double-precision headroom beyond this.
pub const MAX_EXPONENT: f64 = 64.0;

/// An exponent pair 1 < q < p <= [`MAX_EXPONENT`], with the conjugate
/// exponent of q cached so that 1/q + 1/q_conj = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    p: f64,
    q: f64,
    q_conj: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() || !(1.0 < q && q < p) {
            return Err(Error::Domain(format!(
                "exponents must satisfy 1 < q < p, got p={p}, q={q}"
            )));
        }
        if p > MAX_EXPONENT {
            return Err(Error::Domain(format!(
                "p={p} exceeds the supported exponent limit {MAX_EXPONENT}"
            )));
        }
        Ok(Self {
            p,
            q,
            q_conj: q / (q - 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Conjugate exponent of q.
    pub fn q_conj(&self) -> f64 {
        self.q_conj
    }
}

/// Integral constraints (f, A, F) = (∫phi, ∫phi^q, ∫phi^p) of a nonnegative
/// function on a probability space. Nonconstant functions satisfy the strict
/// chain f^q < A < F^{q/p}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintTriple {
    pub f: f64,
    pub a: f64,
    pub fp: f64,
}

impl ConstraintTriple {
    pub fn new(exps: &Exponents, f: f64, a: f64, fp: f64) -> Result<Self> {
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::Domain(format!("f must be finite and >= 0, got {f}")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("A must be finite and > 0, got {a}")));
        }
        if !(fp.is_finite() && fp > 0.0) {
            return Err(Error::Domain(format!("F must be finite and > 0, got {fp}")));
        }
        if f.powf(exps.q()) >= a {
            return Err(Error::Domain(format!(
                "constraint f^q < A violated: f^q = {}, A = {a}",
                f.powf(exps.q())
            )));
        }
        if a >= fp.powf(exps.q() / exps.p()) {
            return Err(Error::Domain(format!(
                "constraint A < F^(q/p) violated: A = {a}, F^(q/p) = {}",
                fp.powf(exps.q() / exps.p())
            )));
        }
        Ok(Self { f, a, fp })
    }
}

/// Sandwich around a Bellman value: the h-based upper bound, the exact value
/// when the triple lies on the critical surface, and (when a witness function
/// has been integrated) an empirical lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Exact Bellman value; present only when `on_surface`.
    pub exact: Option<f64>,
    /// Upper bound F * h^{-1}(k)^p.
    pub upper: f64,
    /// ∫(M phi)^p of a concrete witness, when one was evaluated.
    pub empirical_lower: Option<f64>,
    /// k = (p f^{p-q} A - (p-q) f^p) / F; always in (0, q].
    pub k: f64,
    pub on_surface: bool,
}
