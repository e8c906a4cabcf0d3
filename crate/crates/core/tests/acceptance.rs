//! Acceptance suite: every release-gating property of the crate, one test
//! per criterion, each printing a pass line and holding to a runtime budget.
//!
//! Run with `cargo test -p maxbell --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use std::time::{Duration, Instant};

use maxbell::bellman::{
    bellman_on_surface, critical_f, hp, omega, omega_perturbed, two_var_bellman, upper_bound,
};
use maxbell::extremal::{
    analytic_norms, build_phi, verify_construction, Construction, ExtremalParams, MadicAlpha,
};
use maxbell::harness::{convergence_study, run_suite, Suite, SuiteConfig};
use maxbell::tree::MadicTree;
use maxbell::{ConstraintTriple, Exponents};

fn conclude(name: &str, start: Instant, budget: Duration, detail: &str) {
    let elapsed = start.elapsed();
    println!("acceptance {name}: PASS — {detail} (elapsed {elapsed:?}, budget {budget:?})");
    assert!(
        elapsed <= budget,
        "{name} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}

fn corpus_config() -> SuiteConfig {
    SuiteConfig {
        seed: 7,
        trials: 1000,
        m: 2,
        max_depth: 10,
        pairs: vec![(3.0, 2.0), (2.0, 1.5), (5.0, 3.0)],
        tolerance: 1e-9,
    }
}

/// Independent bisection for h^{-1}, used to pin upper-bound values.
fn h_inv_oracle(p: f64, q: f64, y: f64) -> f64 {
    let h = |t: f64| p * t.powf(p - q) - (p - q) * t.powf(p);
    let (mut lo, mut hi) = (1.0, 2.0);
    while h(hi) > y {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_1_omega_closed_form_and_roundtrip() {
    let start = Instant::now();
    let grid = 10_000;
    for i in 0..=grid {
        let tau = i as f64 / grid as f64;
        let w = omega(2.0, tau).unwrap();
        let closed = 1.0 + (1.0 - tau).sqrt();
        assert!(
            (w - closed).abs() <= 1e-12,
            "omega_2({tau}) = {w}, closed form {closed}"
        );
    }
    for &p in &[1.5, 2.0, 2.5, 3.0, 5.0] {
        for i in 0..=grid {
            let tau = i as f64 / grid as f64;
            let back = hp(p, omega(p, tau).unwrap()).unwrap();
            assert!(
                (back - tau).abs() <= 1e-12,
                "roundtrip failed at p={p}, tau={tau}: {back}"
            );
        }
    }
    conclude(
        "1 omega oracle",
        start,
        Duration::from_secs(1),
        "closed form within 1e-12 on 10^4 points; H_p roundtrip within 1e-12 for 5 exponents",
    );
}

#[test]
fn criterion_2_calibration_root_residual_and_limit() {
    let start = Instant::now();

    // defining-equation residual over a (q, alpha, tau) grid
    let mut worst_resid: f64 = 0.0;
    for &q in &[1.5, 2.0, 2.5, 3.0, 5.0] {
        for ai in 1..=19 {
            for ti in 1..=20 {
                let alpha = ai as f64 / 20.0;
                let tau = ti as f64 / 20.0;
                let z = omega_perturbed(q, alpha, tau).unwrap();
                let w = (1.0 - alpha).powf(q - 1.0);
                let resid = (w * z.powf(q) - (z - alpha).powf(q) - tau * alpha * w).abs();
                assert!(resid <= 1e-13, "q={q} alpha={alpha} tau={tau}: {resid}");
                worst_resid = worst_resid.max(resid);
            }
        }
    }

    // closed form at q = 2
    for ai in 1..=19 {
        for ti in 1..=19 {
            let alpha = ai as f64 / 20.0;
            let tau = ti as f64 / 20.0;
            let z = omega_perturbed(2.0, alpha, tau).unwrap();
            let closed = 1.0 + ((1.0 - alpha) * (1.0 - tau)).sqrt();
            assert!((z - closed).abs() <= 1e-12, "alpha={alpha} tau={tau}");
        }
    }

    // at alpha = 2^-20 the root sits within 1e-5 of omega_q
    let alpha = 0.5f64.powi(20);
    let mut worst_gap: f64 = 0.0;
    for &q in &[1.5, 2.0, 2.5, 3.0, 5.0] {
        for ti in 1..=9 {
            let tau = ti as f64 / 10.0;
            let gap = (omega_perturbed(q, alpha, tau).unwrap() - omega(q, tau).unwrap()).abs();
            assert!(gap <= 1e-5, "q={q} tau={tau}: gap {gap}");
            worst_gap = worst_gap.max(gap);
        }
    }

    conclude(
        "2 calibration root",
        start,
        Duration::from_secs(5),
        &format!("worst residual {worst_resid:.2e}; worst gap to omega at alpha=2^-20 {worst_gap:.2e}"),
    );
}

#[test]
fn criterion_3_exact_value_at_reference_point() {
    let start = Instant::now();
    // exact rational chain: omega = 7/5, H_3 = 49/125, F = 125/49, value 7
    let e = Exponents::new(3.0, 2.0).unwrap();
    let v = bellman_on_surface(&e, 1.0, 25.0 / 21.0).unwrap();
    assert!((v - 7.0).abs() <= 1e-9, "{v}");
    conclude(
        "3 exact reference value",
        start,
        Duration::from_secs(1),
        &format!("B(1, 25/21, 125/49) = {v}"),
    );
}

#[test]
fn criterion_4_surface_consistency_across_grids() {
    let start = Instant::now();
    for &(p, q) in &[(3.0, 2.0), (2.0, 1.5), (4.0, 2.0)] {
        let e = Exponents::new(p, q).unwrap();
        // the surface exists for tau above H_q(p/(p-1))
        let tau_min = hp(q, p / (p - 1.0)).unwrap();
        let mut points = 0;
        for fi in 0..5 {
            let f = 0.5 + fi as f64;
            for i in 1..=20 {
                let tau = tau_min + (1.0 - tau_min) * i as f64 / 21.0;
                let a = f.powf(q) / tau;
                let fc = critical_f(&e, f, a).unwrap();
                let direct = bellman_on_surface(&e, f, a).unwrap();
                let via_two_var = two_var_bellman(p, f, fc).unwrap();
                assert!(
                    (direct - via_two_var).abs() <= 1e-12 * direct,
                    "(p,q)=({p},{q}) f={f} tau={tau}: {direct} vs {via_two_var}"
                );
                points += 1;
            }
        }
        assert_eq!(points, 100);
    }
    conclude(
        "4 surface consistency",
        start,
        Duration::from_secs(1),
        "both Bellman routes agree to 1e-12 on 100 points for each of 3 exponent pairs",
    );
}

#[test]
fn criterion_5_extremal_convergence_and_tree_verification() {
    let e = Exponents::new(3.0, 2.0).unwrap();
    let (f, a) = (1.0, 25.0 / 21.0);

    // analytic part
    let start = Instant::now();
    let alphas: Vec<MadicAlpha> = (1..=10).map(|k| MadicAlpha::new(2, 1, k).unwrap()).collect();
    let rows = convergence_study(&e, f, a, &alphas, None).unwrap();
    for w in rows.windows(2) {
        assert!(
            w[1].analytic_lower > w[0].analytic_lower,
            "lower bound not increasing: {} then {}",
            w[0].analytic_lower,
            w[1].analytic_lower
        );
    }
    let at_eighth = rows[2].analytic_lower;
    assert!((at_eighth - 6.62).abs() <= 0.02, "alpha=1/8: {at_eighth}");
    let near_tenth = {
        let params = ExtremalParams::calibrated(e, f, a, 0.1).unwrap();
        analytic_norms(&params, None).unwrap().lower_bound
    };
    assert!((near_tenth - 6.705).abs() <= 0.02, "alpha=0.1: {near_tenth}");
    let last = rows.last().unwrap();
    assert!(
        last.analytic_lower >= 0.95 * 7.0,
        "alpha=2^-10 reaches only {}",
        last.analytic_lower
    );

    // independent series route at alpha = 1/8, everything rebuilt from the
    // q=2 closed form: z = 1 + sqrt((1-a)(1-tau))
    {
        let alpha = 0.125f64;
        let tau = f * f / a;
        let z = 1.0 + ((1.0 - alpha) * (1.0 - tau)).sqrt();
        let gamma = (z - alpha) / (z * (1.0 - alpha));
        let ratio = gamma.powi(3) * (1.0 - alpha);
        let mut sum = 0.0;
        let mut term = (f / z).powi(3) * alpha;
        while term > sum * 1e-18 + 1e-300 {
            sum += term;
            term *= ratio;
        }
        let oracle_lower = z.powi(3) * sum;
        assert!(
            (oracle_lower - at_eighth).abs() <= 1e-11 * at_eighth,
            "series oracle {oracle_lower} vs closed form {at_eighth}"
        );
    }
    conclude(
        "5a extremal convergence (analytic)",
        start,
        Duration::from_secs(1),
        &format!(
            "lower bound increases along 2^-1..2^-10; 1/8 -> {at_eighth:.4}, 0.1 -> {near_tenth:.4}, final {:.4} >= 6.65",
            last.analytic_lower
        ),
    );

    // tree part: the deepest residual cells of max_rank 6 at alpha = 1/8
    // live at level 3*(6+1) = 21, so depth 21 is the minimal host
    let start = Instant::now();
    let alpha = MadicAlpha::new(2, 1, 3).unwrap();
    let tree = MadicTree::new(2, 21).unwrap();
    let cons = Construction::build(tree, alpha, 6).unwrap();
    let params = ExtremalParams::calibrated(e, f, a, alpha.value()).unwrap();
    let phi = build_phi(&params, &cons).unwrap();
    let report = verify_construction(&params, &cons, &phi, 1e-10).unwrap();
    assert!(report.measures_exact);
    for (i, r) in report.norm_residuals.iter().enumerate() {
        assert!(*r <= 1e-10, "norm residual {i} = {r}");
    }
    assert!(report.average_residual <= 1e-10, "{}", report.average_residual);
    assert!(report.lower_bound_ok, "truncated lower bound failed");
    assert!(report.upper_bound_ok, "upper bound failed on the truncated function");
    assert!(report.pass);
    // the tree lower bound (truncated averages) sits below the analytic
    // partial sum with full-series averages, which sits below the full bound
    let partial_lower = params.z.powi(3) * params.moment(3.0, Some(6)).unwrap();
    assert!(report.tree_lower_bound < partial_lower);
    assert!(partial_lower < at_eighth);
    // with 7 bands the analytic partial sum is (1 - (gamma^3 (7/8))^7) of the full bound
    let ratio = params.gamma.powi(3) * 0.875;
    assert!((partial_lower - (1.0 - ratio.powi(7)) * at_eighth).abs() <= 1e-12 * at_eighth);
    conclude(
        "5b extremal tree verification",
        start,
        Duration::from_secs(30),
        &format!(
            "depth-21 tree, alpha=1/8, max_rank=6: norms match partial sums to {:.2e}, lower bound {:.4} <= integral {:.4}",
            report.norm_residuals.iter().cloned().fold(0.0, f64::max),
            report.tree_lower_bound,
            report.maximal_p_integral
        ),
    );
}

#[test]
fn criterion_6_mixed_moment_inequality_corpus() {
    let start = Instant::now();
    let report = run_suite(Suite::MixedMoment, &corpus_config()).unwrap();
    assert!(
        report.pass,
        "violations: {:?}",
        report.violations.first().map(|v| &v.message)
    );
    assert_eq!(report.trials, 1000);
    conclude(
        "6 mixed-moment suite",
        start,
        Duration::from_secs(60),
        &format!("{} checks over 1000 functions, 0 violations (constants hit equality)", report.checks),
    );
}

#[test]
fn criterion_7_weak_type_corpus() {
    let start = Instant::now();
    let report = run_suite(Suite::WeakType, &corpus_config()).unwrap();
    assert!(
        report.pass,
        "violations: {:?}",
        report.violations.first().map(|v| &v.message)
    );
    conclude(
        "7 weak-type suite",
        start,
        Duration::from_secs(60),
        &format!("{} checks over 1000 functions, 0 violations at every level-set breakpoint", report.checks),
    );
}

#[test]
fn criterion_8_domination_corpus_and_surface_points() {
    let start = Instant::now();
    let report = run_suite(Suite::Domination, &corpus_config()).unwrap();
    assert!(
        report.pass,
        "violations: {:?}",
        report.violations.first().map(|v| &v.message)
    );

    // 50 surface points for (p, q) = (3, 2), the exact-7 point among them
    let e = Exponents::new(3.0, 2.0).unwrap();
    let mut taus: Vec<f64> = (0..49).map(|i| 0.76 + 0.235 * i as f64 / 48.0).collect();
    taus.push(0.84);
    let mut checked = 0;
    for tau in taus {
        let a = 1.0 / tau;
        let fc = critical_f(&e, 1.0, a).unwrap();
        let exact = bellman_on_surface(&e, 1.0, a).unwrap();
        let triple = ConstraintTriple::new(&e, 1.0, a, fc).unwrap();
        let rep = upper_bound(&e, &triple).unwrap();
        assert!(rep.on_surface, "tau={tau}");
        assert!(
            rep.upper >= exact * (1.0 - 1e-12),
            "tau={tau}: upper {} < exact {exact}",
            rep.upper
        );
        checked += 1;
    }
    assert_eq!(checked, 50);

    // pinned value at the exact-7 point: k = 126/125, bound from the oracle
    let a = 25.0 / 21.0;
    let triple = ConstraintTriple::new(&e, 1.0, a, critical_f(&e, 1.0, a).unwrap()).unwrap();
    let rep = upper_bound(&e, &triple).unwrap();
    assert!((rep.k - 1.008).abs() <= 1e-9);
    let oracle = triple.fp * h_inv_oracle(3.0, 2.0, rep.k).powi(3);
    assert!((rep.upper - oracle).abs() <= 1e-9, "{} vs {oracle}", rep.upper);
    assert!((9.0..9.3).contains(&rep.upper), "{}", rep.upper);
    assert!(rep.upper >= rep.exact.unwrap());

    conclude(
        "8 domination suite",
        start,
        Duration::from_secs(60),
        &format!(
            "{} corpus checks with 0 violations; upper >= exact at 50 surface points, {:.4} >= 7 at the reference",
            report.checks, rep.upper
        ),
    );
}

#[test]
fn criterion_9_maximal_operator_matches_brute_force() {
    let start = Instant::now();
    let cfg = SuiteConfig {
        seed: 11,
        trials: 200,
        ..SuiteConfig::default()
    };
    let report = run_suite(Suite::MaximalBrute, &cfg).unwrap();
    assert!(
        report.pass,
        "violations: {:?}",
        report.violations.first().map(|v| &v.message)
    );
    assert_eq!(report.checks, 200);
    conclude(
        "9 brute-force equivalence",
        start,
        Duration::from_secs(5),
        "one-pass maximal operator bit-identical to naive enumeration on 200 functions",
    );
}
