//! Command-line front end for the maxbell library.
//!
//! Subcommands:
//! - `omega`    evaluate omega_p(tau) with its round-trip residual
//! - `bellman`  critical-surface F(f, A), exact value and upper bound
//! - `extremal` build and verify the residual-cell construction on a tree
//! - `verify`   run the randomized property suites
//! - `sweep`    tabulate values and bounds over parameter ranges (CSV/JSON)
//!
//! Exit codes: 0 success, 1 property/verification failure, 2 argument or
//! domain error, 3 surface error, 4 tree-capacity error.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use maxbell::bellman::{bellman_on_surface, critical_f, hp, omega, upper_bound};
use maxbell::extremal::{
    analytic_norms, build_phi, verify_construction, Construction, ExtremalParams, MadicAlpha,
};
use maxbell::harness::{run_suite, write_failures, Suite, SuiteConfig};
use maxbell::tree::MadicTree;
use maxbell::{ConstraintTriple, Error, Exponents};

/// All human-readable and CSV numbers carry 15 significant digits; the same
/// build always prints the same bytes.
fn sig15(x: f64) -> String {
    format!("{:.14e}", x)
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Surface(_) => 3,
            Error::Capacity(_) => 4,
            _ => 2,
        };
        Failure::new(code, err.to_string())
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "maxbell",
    version,
    about = "Bellman values, sharp bounds and extremal constructions for the tree maximal operator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate omega_p(tau), the inverse of H_p on [1, p/(p-1)]
    Omega {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        tau: f64,
        /// Machine-readable output (full f64 precision)
        #[arg(long)]
        json: bool,
    },
    /// Critical-surface F(f, A), the exact Bellman value there, and the
    /// general upper bound
    Bellman {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        f: f64,
        #[arg(long = "A")]
        a: f64,
        #[arg(long)]
        json: bool,
    },
    /// Build the extremal construction on an m-adic tree and verify it
    Extremal {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        f: f64,
        #[arg(long = "A")]
        a: f64,
        /// Base-m rational, e.g. `1/8` or `0.125`
        #[arg(long)]
        alpha: String,
        /// Tree branching
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// Tree depth; the deepest residual cells need depth >= k*(max_rank+1)
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        max_rank: u32,
        /// Write the step function here (plus a `.members.tsv` sidecar)
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run randomized property suites
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 200)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// Random trees draw depths in 1..=depth
        #[arg(long, default_value_t = 10)]
        depth: u32,
        /// Where to write failing cases (default `maxbell-failures/`)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate surface values and bounds over parameter ranges.
    /// Ranges are `start:stop:count` (inclusive) or single numbers.
    Sweep {
        #[arg(long, default_value = "3")]
        p: String,
        #[arg(long, default_value = "2")]
        q: String,
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long = "A")]
        a: String,
        /// Explicit F range; omitted means F = F(f, A) on the surface
        #[arg(long = "F")]
        fp: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    MixedMoment,
    WeakType,
    Domination,
    MaximalBrute,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Omega { p, tau, json } => cmd_omega(p, tau, json),
        Command::Bellman { p, q, f, a, json } => cmd_bellman(p, q, f, a, json),
        Command::Extremal {
            p,
            q,
            f,
            a,
            alpha,
            m,
            depth,
            max_rank,
            dump,
            json,
        } => cmd_extremal(p, q, f, a, &alpha, m, depth, max_rank, dump, json),
        Command::Verify {
            suite,
            trials,
            seed,
            m,
            depth,
            out_dir,
        } => cmd_verify(suite, trials, seed, m, depth, out_dir),
        Command::Sweep {
            p,
            q,
            f,
            a,
            fp,
            format,
        } => cmd_sweep(&p, &q, &f, &a, fp.as_deref(), format),
    }
}

fn cmd_omega(p: f64, tau: f64, json: bool) -> CmdResult {
    let w = omega(p, tau)?;
    let residual = (hp(p, w)? - tau).abs();
    if json {
        println!(
            "{}",
            json!({ "p": p, "tau": tau, "omega": w, "roundtrip_residual": residual })
        );
    } else {
        println!("omega = {}", sig15(w));
        println!("roundtrip_residual = {}", sig15(residual));
    }
    Ok(())
}

fn cmd_bellman(p: f64, q: f64, f: f64, a: f64, json: bool) -> CmdResult {
    let exps = Exponents::new(p, q)?;
    let fc = critical_f(&exps, f, a)?;
    let omega_q = omega(q, f.powf(q) / a)?;
    let triple = ConstraintTriple::new(&exps, f, a, fc)?;
    let report = upper_bound(&exps, &triple)?;
    let exact = report
        .exact
        .expect("the constructed triple lies on the surface");
    if json {
        println!(
            "{}",
            json!({
                "f": f, "A": a, "F": fc, "omega_q": omega_q,
                "exact": exact, "upper": report.upper, "k": report.k,
                "on_surface": report.on_surface,
            })
        );
    } else {
        println!("F = {}", sig15(fc));
        println!("omega_q = {}", sig15(omega_q));
        println!("exact = {}", sig15(exact));
        println!("upper = {}", sig15(report.upper));
        println!("k = {}", sig15(report.k));
        println!("on_surface = {}", report.on_surface);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_extremal(
    p: f64,
    q: f64,
    f: f64,
    a: f64,
    alpha_text: &str,
    m: u32,
    depth: u32,
    max_rank: u32,
    dump: Option<PathBuf>,
    json: bool,
) -> CmdResult {
    let exps = Exponents::new(p, q)?;
    let alpha = MadicAlpha::parse(alpha_text, m)?;
    let tree = MadicTree::new(m, depth)?;
    let cons = Construction::build(tree, alpha, max_rank)?;
    let params = ExtremalParams::calibrated(exps, f, a, alpha.value())?;
    let phi = build_phi(&params, &cons)?;
    let report = verify_construction(&params, &cons, &phi, 1e-9)?;
    let full = analytic_norms(&params, None).ok();

    let one_minus_alpha = 1.0 - alpha.value();
    let mut rank_rows = Vec::new();
    for band in cons.bands() {
        let r = band.rank;
        let row = (
            r,
            band.members.len() as u64,
            one_minus_alpha.powi(r as i32),
            params.moment(1.0, Some(r))?,
            params.moment(q, Some(r))?,
            params.moment(p, Some(r))?,
        );
        rank_rows.push(row);
    }
    let partial_lower = params.z.powf(p) * rank_rows.last().unwrap().5;

    if let Some(path) = &dump {
        let mut w = BufWriter::new(File::create(path).map_err(Error::from)?);
        phi.write_text(&mut w)?;
        w.flush().map_err(Error::from)?;
        let sidecar = path.with_extension(format!(
            "{}members.tsv",
            path.extension()
                .map(|e| format!("{}.", e.to_string_lossy()))
                .unwrap_or_default()
        ));
        std::fs::write(&sidecar, cons.sidecar_tsv(&params)).map_err(Error::from)?;
    }

    if json {
        println!(
            "{}",
            json!({
                "alpha": alpha.value(),
                "alpha_fraction": format!("{}/{}", alpha.numerator(), alpha.denominator()),
                "z": params.z, "gamma": params.gamma, "lambda": params.lambda,
                "max_rank": max_rank,
                "ranks": rank_rows.iter().map(|r| json!({
                    "rank": r.0, "members": r.1, "band_measure": r.2,
                    "l1_partial": r.3, "lq_partial": r.4, "lp_partial": r.5,
                })).collect::<Vec<_>>(),
                "full_norms": full.map(|n| json!({
                    "l1": n.l1, "lq": n.lq, "lp": n.lp, "lower_bound": n.lower_bound,
                })),
                "partial_lower_bound": partial_lower,
                "tree_lower_bound": report.tree_lower_bound,
                "maximal_p_integral": report.maximal_p_integral,
                "upper_bound": report.upper_bound,
                "norm_residuals": report.norm_residuals,
                "average_residual": report.average_residual,
                "pass": report.pass,
            })
        );
    } else {
        println!(
            "alpha = {}/{} (scale k = {}), z = {}, gamma = {}",
            alpha.numerator(),
            alpha.denominator(),
            alpha.scale(),
            sig15(params.z),
            sig15(params.gamma)
        );
        println!("rank members band_measure l1_partial lq_partial lp_partial");
        for r in &rank_rows {
            println!(
                "{} {} {} {} {} {}",
                r.0,
                r.1,
                sig15(r.2),
                sig15(r.3),
                sig15(r.4),
                sig15(r.5)
            );
        }
        if let Some(n) = full {
            println!(
                "full series: l1 = {}, lq = {}, lp = {}, lower_bound = {}",
                sig15(n.l1),
                sig15(n.lq),
                sig15(n.lp),
                sig15(n.lower_bound)
            );
        }
        println!("partial_lower_bound = {}", sig15(partial_lower));
        println!("tree_lower_bound = {}", sig15(report.tree_lower_bound));
        println!("maximal_p_integral = {}", sig15(report.maximal_p_integral));
        println!("upper_bound = {}", sig15(report.upper_bound));
        println!(
            "norm_residuals = {} {} {}",
            sig15(report.norm_residuals[0]),
            sig15(report.norm_residuals[1]),
            sig15(report.norm_residuals[2])
        );
        println!("verification: {}", if report.pass { "PASS" } else { "FAIL" });
    }

    if report.pass {
        Ok(())
    } else {
        Err(Failure::new(1, "construction verification failed"))
    }
}

fn cmd_verify(
    suite: SuiteArg,
    trials: u32,
    seed: u64,
    m: u32,
    depth: u32,
    out_dir: Option<PathBuf>,
) -> CmdResult {
    let cfg = SuiteConfig {
        seed,
        trials,
        m,
        max_depth: depth,
        ..SuiteConfig::default()
    };
    let suites: Vec<Suite> = match suite {
        SuiteArg::MixedMoment => vec![Suite::MixedMoment],
        SuiteArg::WeakType => vec![Suite::WeakType],
        SuiteArg::Domination => vec![Suite::Domination],
        SuiteArg::MaximalBrute => vec![Suite::MaximalBrute],
        SuiteArg::All => vec![
            Suite::MixedMoment,
            Suite::WeakType,
            Suite::Domination,
            Suite::MaximalBrute,
        ],
    };
    let mut failed = false;
    for s in suites {
        let report = run_suite(s, &cfg)?;
        println!(
            "suite {}: trials={} checks={} violations={} -> {}",
            s.name(),
            report.trials,
            report.checks,
            report.violations.len(),
            if report.pass { "PASS" } else { "FAIL" }
        );
        if !report.pass {
            failed = true;
            let base = out_dir.clone().unwrap_or_else(|| PathBuf::from("maxbell-failures"));
            let written = write_failures(&report, &cfg, &base).map_err(Error::from)?;
            for path in written {
                eprintln!("wrote failing case to {}", path.display());
            }
        }
    }
    if failed {
        Err(Failure::new(1, "one or more suites reported violations"))
    } else {
        Ok(())
    }
}

/// `start:stop:count` (inclusive linspace) or a single number.
fn parse_range(name: &str, text: &str) -> Result<Vec<f64>, Failure> {
    let bad = |msg: String| Failure::new(2, msg);
    if let Some((start_s, rest)) = text.split_once(':') {
        let (stop_s, count_s) = rest
            .split_once(':')
            .ok_or_else(|| bad(format!("range for {name} must be start:stop:count, got {text:?}")))?;
        let start: f64 = start_s
            .parse()
            .map_err(|e| bad(format!("bad start in {name} range: {e}")))?;
        let stop: f64 = stop_s
            .parse()
            .map_err(|e| bad(format!("bad stop in {name} range: {e}")))?;
        let count: usize = count_s
            .parse()
            .map_err(|e| bad(format!("bad count in {name} range: {e}")))?;
        if count == 0 {
            return Err(bad(format!("empty range for {name}: count must be >= 1")));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(bad(format!("range bounds for {name} must be finite")));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        let v: f64 = text
            .parse()
            .map_err(|e| bad(format!("bad value for {name}: {e}")))?;
        if !v.is_finite() {
            return Err(bad(format!("{name} must be finite")));
        }
        Ok(vec![v])
    }
}

struct SweepRow {
    p: f64,
    q: f64,
    f: f64,
    a: f64,
    fp: f64,
    omega_q: f64,
    exact: Option<f64>,
    upper: f64,
    k: f64,
}

fn cmd_sweep(
    p_text: &str,
    q_text: &str,
    f_text: &str,
    a_text: &str,
    fp_text: Option<&str>,
    format: Format,
) -> CmdResult {
    let ps = parse_range("p", p_text)?;
    let qs = parse_range("q", q_text)?;
    let fs = parse_range("f", f_text)?;
    let avals = parse_range("A", a_text)?;
    let fps = fp_text.map(|t| parse_range("F", t)).transpose()?;

    // cartesian product of the requested ranges
    let mut combos: Vec<(f64, f64, f64, f64, Option<f64>)> = Vec::new();
    for &p in &ps {
        for &q in &qs {
            for &f in &fs {
                for &a in &avals {
                    match &fps {
                        Some(list) => {
                            for &fp in list {
                                combos.push((p, q, f, a, Some(fp)));
                            }
                        }
                        None => combos.push((p, q, f, a, None)),
                    }
                }
            }
        }
    }

    let results: Vec<Result<SweepRow, String>> = combos
        .par_iter()
        .map(|&(p, q, f, a, fp)| sweep_row(p, q, f, a, fp).map_err(|e| e.to_string()))
        .collect();

    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for (combo, res) in combos.iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(msg) => {
                skipped += 1;
                eprintln!(
                    "skipping p={} q={} f={} A={}: {msg}",
                    combo.0, combo.1, combo.2, combo.3
                );
            }
        }
    }
    if rows.is_empty() {
        return Err(Failure::new(3, format!("no sweep row succeeded ({skipped} skipped)")));
    }

    match format {
        Format::Csv => {
            println!("p,q,f,A,F,omega_q,exact,upper,k");
            for r in &rows {
                println!(
                    "{},{},{},{},{},{},{},{},{}",
                    sig15(r.p),
                    sig15(r.q),
                    sig15(r.f),
                    sig15(r.a),
                    sig15(r.fp),
                    sig15(r.omega_q),
                    r.exact.map(sig15).unwrap_or_default(),
                    sig15(r.upper),
                    sig15(r.k)
                );
            }
        }
        Format::Json => {
            let objs: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "p": r.p, "q": r.q, "f": r.f, "A": r.a, "F": r.fp,
                        "omega_q": r.omega_q, "exact": r.exact, "upper": r.upper, "k": r.k,
                    })
                })
                .collect();
            println!("{}", serde_json::Value::Array(objs));
        }
    }
    Ok(())
}

fn sweep_row(p: f64, q: f64, f: f64, a: f64, fp: Option<f64>) -> maxbell::Result<SweepRow> {
    let exps = Exponents::new(p, q)?;
    let omega_q = omega(q, f.powf(q) / a)?;
    let (fp, exact) = match fp {
        Some(fp) => (fp, None),
        None => (
            critical_f(&exps, f, a)?,
            Some(bellman_on_surface(&exps, f, a)?),
        ),
    };
    let triple = ConstraintTriple::new(&exps, f, a, fp)?;
    let report = upper_bound(&exps, &triple)?;
    Ok(SweepRow {
        p,
        q,
        f,
        a,
        fp,
        omega_q,
        exact: exact.or(report.exact),
        upper: report.upper,
        k: report.k,
    })
}
