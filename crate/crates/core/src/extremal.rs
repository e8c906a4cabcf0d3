//! The recursive residual-cell construction that realizes near-extremal step
//! functions for the three-constraint Bellman problem.
//!
//! For alpha = j/m^k, each selected cell I keeps its first m^k - j depth-k
//! descendants as next-generation members and leaves the last j as the
//! residual cell A_I, so mu(A_I) = alpha * mu(I) exactly in integer leaf
//! counts. The function takes the value (f/z) * gamma^r on every rank-r
//! residual cell and 0 beyond the last constructed rank. With z calibrated
//! by the alpha-perturbed root, the full series of its q-th moment equals a
//! prescribed A, and the maximal integrals approach the exact Bellman value
//! as alpha -> 0+.
//!
//! All truncated quantities are compared against exact partial geometric
//! sums, never against the asymptotic limits, so every check in
//! [`verify_construction`] is sharp rather than approximate.

use std::ops::Range;

use crate::bellman;
use crate::error::{Error, Result};
use crate::tree::{compensated_sum, Compensated, MadicTree, StepFunction};
use crate::types::{ConstraintTriple, Exponents};

/// A base-m rational alpha = num / m^scale in (0, 1), stored in canonical
/// form (num not divisible by m). Only alphas of this shape can be realized
/// exactly on a homogeneous m-adic tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MadicAlpha {
    num: u64,
    scale: u32,
    m: u32,
}

impl MadicAlpha {
    pub fn new(m: u32, num: u64, scale: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("base m must be >= 2, got {m}")));
        }
        let den = (m as u64).checked_pow(scale).ok_or_else(|| {
            Error::Representation(format!("denominator {m}^{scale} overflows"))
        })?;
        if !(0 < num && num < den) {
            return Err(Error::Domain(format!(
                "alpha = {num}/{m}^{scale} must lie strictly between 0 and 1"
            )));
        }
        let (mut num, mut scale) = (num, scale);
        while num % m as u64 == 0 {
            num /= m as u64;
            scale -= 1;
        }
        Ok(Self { num, scale, m })
    }

    /// Accepts `j/den` with den a power of m, or a decimal such as `0.125`
    /// that reduces exactly to a base-m fraction.
    pub fn parse(s: &str, m: u32) -> Result<Self> {
        let s = s.trim();
        if let Some((num_s, den_s)) = s.split_once('/') {
            let num: u64 = num_s
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad numerator {num_s:?}: {e}")))?;
            let den: u64 = den_s
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad denominator {den_s:?}: {e}")))?;
            return Self::from_fraction(m, num, den);
        }
        if let Some((int_s, frac_s)) = s.split_once('.') {
            if !(int_s.is_empty() || int_s == "0") {
                return Err(Error::Domain(format!("alpha must lie in (0, 1), got {s:?}")));
            }
            if frac_s.is_empty() || frac_s.len() > 18 || !frac_s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Parse(format!("bad decimal alpha {s:?}")));
            }
            let num: u64 = frac_s.parse().unwrap();
            let den = 10u64.pow(frac_s.len() as u32);
            return Self::from_fraction(m, num, den);
        }
        Err(Error::Parse(format!(
            "alpha must be a fraction j/m^k or a decimal, got {s:?}"
        )))
    }

    fn from_fraction(m: u32, num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::Domain(format!(
                "alpha = {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        let g = gcd(num, den);
        let (num, mut den) = (num / g, den / g);
        // the reduced denominator must be a pure power of m
        let mut scale = 0u32;
        while den > 1 && den % m as u64 == 0 {
            den /= m as u64;
            scale += 1;
        }
        if den != 1 {
            return Err(Error::Representation(format!(
                "alpha has no finite base-{m} expansion (reduced denominator has a factor {den})"
            )));
        }
        Self::new(m, num, scale)
    }

    pub fn base(&self) -> u32 {
        self.m
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    /// Number of base-m digits: alpha = numerator / m^scale.
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn denominator(&self) -> u64 {
        (self.m as u64).pow(self.scale)
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.denominator() as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All scalar parameters of the construction for one alpha:
/// beta = (z-1)/(1-alpha), gamma = (z-alpha)/(z(1-alpha)) and the weight
/// scale lambda = f * alpha^{-1/q'} * (1 - gamma(1-alpha)) = f alpha^{1/q}/z.
///
/// Analytic formulas accept any alpha in (0, 1); exact base-m form is needed
/// only to build on a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalParams {
    pub exps: Exponents,
    pub f: f64,
    pub alpha: f64,
    pub z: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl ExtremalParams {
    /// Calibrate z with the alpha-perturbed root so that the full q-moment
    /// series of the construction equals `a`. Requires f^q < a.
    pub fn calibrated(exps: Exponents, f: f64, a: f64, alpha: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::Domain(format!("f must be finite and > 0, got {f}")));
        }
        let tau = f.powf(exps.q()) / a;
        if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!(
                "need 0 < f^q < A, got f^q = {}, A = {a}",
                f.powf(exps.q())
            )));
        }
        let z = bellman::omega_perturbed(exps.q(), alpha, tau)?;
        Self::from_z(exps, f, alpha, z)
    }

    /// Build the parameter record from an explicitly chosen z > 1.
    pub fn from_z(exps: Exponents, f: f64, alpha: f64, z: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::Domain(format!("f must be finite and > 0, got {f}")));
        }
        if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(z.is_finite() && z > 1.0) {
            return Err(Error::Domain(format!("z must be finite and > 1, got {z}")));
        }
        let beta = (z - 1.0) / (1.0 - alpha);
        let gamma = (z - alpha) / (z * (1.0 - alpha));
        let lambda = f * alpha.powf(1.0 / exps.q()) / z;
        let params = Self {
            exps,
            f,
            alpha,
            z,
            beta,
            gamma,
            lambda,
        };
        if params.moment_ratio(exps.q()) >= 1.0 {
            return Err(Error::Domain(format!(
                "gamma^q (1-alpha) = {} >= 1; the q-moment series diverges for z = {z}",
                params.moment_ratio(exps.q())
            )));
        }
        Ok(params)
    }

    /// Value of the function on the rank-r residual band: (f/z) * gamma^r.
    pub fn band_value(&self, rank: u32) -> f64 {
        (self.f / self.z) * self.gamma.powi(rank as i32)
    }

    /// Full-series average over a rank-r member: f * gamma^r.
    pub fn full_average(&self, rank: u32) -> f64 {
        self.f * self.gamma.powi(rank as i32)
    }

    /// Average over a rank-r member of the function truncated at `max_rank`:
    /// the partial geometric sum (f alpha / z) gamma^r sum_{s<=max_rank-r} (gamma(1-alpha))^s.
    pub fn truncated_average(&self, rank: u32, max_rank: u32) -> f64 {
        assert!(rank <= max_rank);
        let ratio = self.gamma * (1.0 - self.alpha);
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..=(max_rank - rank) {
            sum += term;
            term *= ratio;
        }
        (self.f * self.alpha / self.z) * self.gamma.powi(rank as i32) * sum
    }

    /// gamma - 1 = alpha (z-1) / (z (1-alpha)), cancellation-free.
    fn gamma_minus_one(&self) -> f64 {
        self.alpha * (self.z - 1.0) / (self.z * (1.0 - self.alpha))
    }

    /// Geometric ratio gamma^r (1-alpha) of the r-th moment series.
    pub fn moment_ratio(&self, r: f64) -> f64 {
        self.gamma.powf(r) * (1.0 - self.alpha)
    }

    /// 1 - gamma^r (1-alpha) evaluated without cancellation, accurate even
    /// for alpha near 0 where the ratio is within ulps of 1.
    fn one_minus_moment_ratio(&self, r: f64) -> f64 {
        -f64::exp_m1(r * f64::ln_1p(self.gamma_minus_one()) + f64::ln_1p(-self.alpha))
    }

    /// The r-th moment of the construction, r >= 1: the exact partial
    /// geometric sum through `max_rank` bands, or the full series when
    /// `max_rank` is `None` (which then requires gamma^r (1-alpha) < 1).
    pub fn moment(&self, r: f64, max_rank: Option<u32>) -> Result<f64> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::Domain(format!("moment order must be >= 1, got {r}")));
        }
        let coeff = (self.f / self.z).powf(r) * self.alpha;
        match max_rank {
            Some(last) => {
                let ratio = self.moment_ratio(r);
                let mut sum = 0.0;
                let mut term = 1.0;
                for _ in 0..=last {
                    sum += term;
                    term *= ratio;
                }
                Ok(coeff * sum)
            }
            None => {
                let denom = self.one_minus_moment_ratio(r);
                if denom <= 0.0 {
                    return Err(Error::Divergence(format!(
                        "gamma^{r} (1-alpha) = {} >= 1: the series has no finite sum",
                        self.moment_ratio(r)
                    )));
                }
                Ok(coeff / denom)
            }
        }
    }
}

/// The analytic moments of the construction: full closed-form sums, or exact
/// partial sums through a finite number of rank bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticNorms {
    /// ∫ phi.
    pub l1: f64,
    /// ∫ phi^q; equals the calibrated A for the full series.
    pub lq: f64,
    /// ∫ phi^p, the F(alpha) of the construction.
    pub lp: f64,
    /// z^p * lp, the analytic lower bound for ∫ (M phi)^p.
    pub lower_bound: f64,
}

/// Moments through `max_rank` bands (`None` = full series).
pub fn analytic_norms(params: &ExtremalParams, max_rank: Option<u32>) -> Result<AnalyticNorms> {
    let (p, q) = (params.exps.p(), params.exps.q());
    let lp = params.moment(p, max_rank)?;
    Ok(AnalyticNorms {
        l1: params.moment(1.0, max_rank)?,
        lq: params.moment(q, max_rank)?,
        lp,
        lower_bound: params.z.powf(p) * lp,
    })
}

/// One generation of members: the cells of a fixed rank, addressed by their
/// node index at tree level rank * scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub rank: u32,
    pub members: Vec<u64>,
}

/// The realized family: members of ranks 0..=max_rank, each with its
/// residual cell (the last j depth-k descendants, a single contiguous leaf
/// range thanks to the deterministic first-descendants selection).
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    tree: MadicTree,
    alpha: MadicAlpha,
    max_rank: u32,
    bands: Vec<Band>,
}

impl Construction {
    /// Deterministic realization: every member keeps its first m^k - j
    /// depth-k descendants as the next generation and cedes the last j to
    /// the residual cell; recursion runs through rank `max_rank`.
    ///
    /// The deepest residual cells live at level k*(max_rank + 1), so the
    /// tree must be at least that deep.
    pub fn build(tree: MadicTree, alpha: MadicAlpha, max_rank: u32) -> Result<Self> {
        if alpha.base() != tree.branching() {
            return Err(Error::Domain(format!(
                "alpha is base {} but the tree branches by {}",
                alpha.base(),
                tree.branching()
            )));
        }
        let k = alpha.scale();
        let needed = max_rank
            .checked_add(1)
            .and_then(|bands| k.checked_mul(bands))
            .ok_or_else(|| Error::Capacity("rank * scale overflows".into()))?;
        if needed > tree.depth() {
            return Err(Error::Capacity(format!(
                "depth {} cannot host max_rank {} at alpha scale {k}: the deepest residual \
                 cells need level {needed}",
                tree.depth(),
                max_rank
            )));
        }

        let step = alpha.denominator(); // m^k children per member
        let keep = step - alpha.numerator();
        let mut bands = Vec::with_capacity(max_rank as usize + 1);
        bands.push(Band {
            rank: 0,
            members: vec![0],
        });
        for rank in 1..=max_rank {
            let prev = &bands[rank as usize - 1].members;
            let mut members = Vec::with_capacity(prev.len() * keep as usize);
            for &idx in prev {
                let base = idx * step;
                members.extend(base..base + keep);
            }
            bands.push(Band { rank, members });
        }

        Ok(Self {
            tree,
            alpha,
            max_rank,
            bands,
        })
    }

    pub fn tree(&self) -> MadicTree {
        self.tree
    }

    pub fn alpha(&self) -> MadicAlpha {
        self.alpha
    }

    pub fn max_rank(&self) -> u32 {
        self.max_rank
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Tree level of rank-r members.
    pub fn level_of_rank(&self, rank: u32) -> u32 {
        rank * self.alpha.scale()
    }

    /// Leaves covered by a member cell.
    pub fn member_span(&self, rank: u32, index: u64) -> Range<u64> {
        self.tree.leaf_span(self.level_of_rank(rank), index)
    }

    /// Leaves of the member's residual cell: its last j depth-k descendants.
    pub fn residual_span(&self, rank: u32, index: u64) -> Range<u64> {
        let step = self.alpha.denominator();
        let child_level = self.level_of_rank(rank) + self.alpha.scale();
        let first_resid = index * step + (step - self.alpha.numerator());
        let start = self.tree.leaf_span(child_level, first_resid).start;
        let end = self.tree.leaf_span(child_level, (index + 1) * step - 1).end;
        start..end
    }

    /// Weight x_I = lambda * gamma^r * mu(I)^{1/q}; constant across a band.
    pub fn weight(&self, params: &ExtremalParams, rank: u32) -> f64 {
        let mu = self.tree.cell_measure(self.level_of_rank(rank));
        params.lambda * params.gamma.powi(rank as i32) * mu.powf(1.0 / params.exps.q())
    }

    /// Integer identities of the realized family, checked in u128 arithmetic
    /// with no rounding:
    /// mu(A_I) = alpha * mu(I) per member, band cardinalities (m^k - j)^r,
    /// and the band measures (1-alpha)^r * mu(X).
    pub fn check_exact_measures(&self) -> Result<()> {
        let m = self.tree.branching() as u128;
        let k = self.alpha.scale();
        let j = self.alpha.numerator() as u128;
        let step = self.alpha.denominator() as u128;
        let keep = step - j;
        let total = self.tree.leaf_count() as u128;

        for band in &self.bands {
            let expected_count = keep.pow(band.rank);
            if band.members.len() as u128 != expected_count {
                return Err(Error::Invariant(format!(
                    "rank {} has {} members, expected {expected_count}",
                    band.rank,
                    band.members.len()
                )));
            }
            let mut band_leaves: u128 = 0;
            for &idx in &band.members {
                let span = self.member_span(band.rank, idx);
                let resid = self.residual_span(band.rank, idx);
                let member_len = (span.end - span.start) as u128;
                let resid_len = (resid.end - resid.start) as u128;
                // mu(A_I) = alpha mu(I)  <=>  |A_I| * m^k = j * |I|
                if resid_len * step != j * member_len {
                    return Err(Error::Invariant(format!(
                        "residual measure of rank {} member {idx} is not alpha * mu(I)",
                        band.rank
                    )));
                }
                // the selected children carry (1 - alpha) mu(I)
                let kept_len = member_len - resid_len;
                if kept_len * step != keep * member_len {
                    return Err(Error::Invariant(format!(
                        "selected children of rank {} member {idx} do not carry (1-alpha) mu(I)",
                        band.rank
                    )));
                }
                band_leaves += member_len;
            }
            // sum of rank-r member measures = (1-alpha)^r:
            // band_leaves / m^D = keep^r / m^{k r}
            if band_leaves * m.pow(k * band.rank) != keep.pow(band.rank) * total {
                return Err(Error::Invariant(format!(
                    "rank {} band measure is not (1-alpha)^rank",
                    band.rank
                )));
            }
        }
        Ok(())
    }

    /// Audit listing: one member per line as `rank  level  index  x_I`.
    pub fn sidecar_tsv(&self, params: &ExtremalParams) -> String {
        let mut out = String::from("rank\tlevel\tindex\tx\n");
        for band in &self.bands {
            let x = self.weight(params, band.rank);
            let level = self.level_of_rank(band.rank);
            for &idx in &band.members {
                out.push_str(&format!("{}\t{level}\t{idx}\t{x}\n", band.rank));
            }
        }
        out
    }
}

/// Realize the step function of the construction: the value
/// x_I / mu(A_I)^{1/q} = (f/z) gamma^r on each rank-r residual cell, zero on
/// the unassigned remainder beyond rank `max_rank`.
pub fn build_phi(params: &ExtremalParams, cons: &Construction) -> Result<StepFunction> {
    if params.alpha != cons.alpha().value() {
        return Err(Error::Domain(format!(
            "params were built for alpha = {} but the construction holds {}",
            params.alpha,
            cons.alpha().value()
        )));
    }
    let mut values = vec![0.0; cons.tree().leaf_count() as usize];
    for band in cons.bands() {
        let v = params.band_value(band.rank);
        for &idx in &band.members {
            let span = cons.residual_span(band.rank, idx);
            values[span.start as usize..span.end as usize].fill(v);
        }
    }
    StepFunction::new(cons.tree(), values)
}

/// Result of checking a realized construction against its analytic partial
/// sums and the maximal-operator lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// Relative residuals of tree-integrated (∫phi, ∫phi^q, ∫phi^p) against
    /// the exact partial geometric sums.
    pub norm_residuals: [f64; 3],
    /// Worst relative residual of tree member averages against the
    /// truncated-series prediction.
    pub average_residual: f64,
    /// sum over members of mu(A_I) * (tree average over I)^p.
    pub tree_lower_bound: f64,
    /// ∫ (M phi)^p on the tree.
    pub maximal_p_integral: f64,
    /// Whether tree_lower_bound <= maximal_p_integral held.
    pub lower_bound_ok: bool,
    /// Upper bound evaluated at the truncated function's own (f, A, F).
    pub upper_bound: f64,
    pub upper_bound_ok: bool,
    pub measures_exact: bool,
    pub pass: bool,
}

/// Check a realized construction:
/// (a) tree integrals of phi, phi^q, phi^p match the analytic partial sums,
/// (b) every member's tree average matches the truncated-series prediction,
/// (c) ∫(M phi)^p dominates the sum of mu(A_I) * average^p (the residual-cell
///     lower bound, valid because M phi >= avg_I phi on A_I),
/// (d) the integer measure identities hold exactly,
/// (e) ∫(M phi)^p also respects the general upper bound at the truncated
///     function's own constraint triple.
pub fn verify_construction(
    params: &ExtremalParams,
    cons: &Construction,
    phi: &StepFunction,
    tol: f64,
) -> Result<VerifyReport> {
    if params.alpha != cons.alpha().value() {
        return Err(Error::Domain(
            "params and construction disagree on alpha".into(),
        ));
    }
    if phi.tree() != cons.tree() {
        return Err(Error::Domain(
            "step function was built on a different tree".into(),
        ));
    }
    let exps = &params.exps;
    let (p, q) = (exps.p(), exps.q());
    let max_rank = cons.max_rank();

    let measures_exact = cons.check_exact_measures().is_ok();

    // (a) moments against exact partial sums
    let mut norm_residuals = [0.0; 3];
    for (slot, r) in [1.0, q, p].into_iter().enumerate() {
        let tree_val = phi.integrate(r)?;
        let analytic = params.moment(r, Some(max_rank))?;
        norm_residuals[slot] = (tree_val - analytic).abs() / analytic.max(f64::MIN_POSITIVE);
    }

    // (b) member averages + (c) residual-cell lower bound
    let m = cons.tree().branching() as f64;
    let depth = cons.tree().depth();
    let values = phi.values();
    let mut average_residual: f64 = 0.0;
    let mut lower = Compensated::default();
    for band in cons.bands() {
        let level = cons.level_of_rank(band.rank);
        let to_avg = m.powi(level as i32 - depth as i32);
        let a_cell = params.alpha * cons.tree().cell_measure(level);
        let predicted = params.truncated_average(band.rank, max_rank);
        for &idx in &band.members {
            let span = cons.member_span(band.rank, idx);
            let sum = compensated_sum(values[span.start as usize..span.end as usize].iter().copied());
            let avg = sum * to_avg;
            let resid = (avg - predicted).abs() / predicted.max(f64::MIN_POSITIVE);
            average_residual = average_residual.max(resid);
            lower.add(a_cell * avg.powf(p));
        }
    }
    let tree_lower_bound = lower.value();

    let mphi = phi.maximal_operator();
    let maximal_p_integral = mphi.integrate(p)?;
    let lower_bound_ok = tree_lower_bound <= maximal_p_integral * (1.0 + tol);

    // (e) domination by the general upper bound at phi's own triple
    let triple = ConstraintTriple::new(exps, phi.integrate(1.0)?, phi.integrate(q)?, phi.integrate(p)?)?;
    let report = bellman::upper_bound(exps, &triple)?;
    let upper_bound_ok = maximal_p_integral <= report.upper * (1.0 + tol);

    let pass = measures_exact
        && lower_bound_ok
        && upper_bound_ok
        && average_residual <= tol
        && norm_residuals.iter().all(|r| *r <= tol);

    Ok(VerifyReport {
        norm_residuals,
        average_residual,
        tree_lower_bound,
        maximal_p_integral,
        lower_bound_ok,
        upper_bound: report.upper,
        upper_bound_ok,
        measures_exact,
        pass,
    })
}
