//! Acceptance comparisons shared by `phi4 verify` and the acceptance tests.

use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};

use super::csv::render_csv;
use super::series::perturbative_series;
use super::sweep::{run_sweep, OutputFormat, SweepConfig, DEFAULT_LAMBDAS, STUDY_LAMBDAS};
use crate::combinatorics::{factorial_exact, for_each_triple, symmetry_factor, triple_coefficient_exact};
use crate::dynamics::{
    contraction_estimate, delta_change, iterate_from, IterateSettings, IterationStatus,
    IterationTrace, Setup, StartLabel,
};
use crate::error::Result;
use crate::membership::{check_small_lambda_limits, stability_at, PhiChecker, DEFAULT_K0};

/// SHA-256 of the CSV of the default sweep restricted to lambda = 0.01.
pub const GOLDEN_SWEEP_SHA256: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/sweep_lambda_0.01.sha256"));

pub const CONVERGENCE_N_MAX: usize = 25;
pub const AGREE_NU_COARSE: usize = 6;
pub const AGREE_TOL_COARSE: f64 = 1e-3;
pub const AGREE_NU_FINE: usize = 10;
pub const AGREE_TOL_FINE: f64 = 1e-8;
pub const CONVERGENCE_BUDGET_SECS: f64 = 10.0;
pub const DIVERGENT_LAMBDA: f64 = 0.15;
pub const MONOTONE_SLACK: f64 = 1e-9;
pub const MONOTONE_LAMBDA_CAP: f64 = 0.05;
pub const LARGE_N_MAX: usize = 1001;
pub const LARGE_N_ITERS: usize = 5;
pub const LARGE_N_STABLE_LAMBDA: f64 = 0.01;
pub const LARGE_N_UNSTABLE_LAMBDA: f64 = 0.075;
pub const LARGE_N_BUDGET_SECS: f64 = 300.0;
pub const CONTRACTION_LAMBDAS: [f64; 3] = [0.01, 0.03, 0.05];
pub const CONTRACTION_SCAN: [f64; 9] = [0.01, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.45];
pub const CONTRACTION_PAIRS: usize = 32;
pub const CONTRACTION_RHO: f64 = 1e-4;
pub const CONTRACTION_SEED: u64 = 20_240_601;
pub const ORACLE_LAMBDA: f64 = 1e-3;
pub const ORACLE_N_MAX: usize = 9;
pub const ORACLE_ORDER: usize = 20;
pub const ORACLE_TOL: f64 = 1e-9;
pub const ORBIT_N_MAX: usize = 31;
pub const LIMIT_LAMBDA: f64 = 1e-6;
pub const LIMIT_N_MAX: usize = 15;
pub const LIMIT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}. {}: {}", self.id, self.name, self.detail)
    }
}

fn study_settings(nu_max: usize) -> IterateSettings {
    IterateSettings {
        nu_max,
        ..IterateSettings::default()
    }
}

fn pair(lambda: f64, n_max: usize, settings: &IterateSettings) -> Result<(IterationTrace, IterationTrace)> {
    let setup = Setup::new(lambda, n_max);
    let (a, b) = rayon::join(
        || iterate_from(&setup, StartLabel::Max, settings),
        || iterate_from(&setup, StartLabel::Min, settings),
    );
    Ok((a?, b?))
}

fn relative_gap(a: &IterationTrace, b: &IterationTrace, nu: usize) -> f64 {
    delta_change(&a.at_or_last(nu).delta, &b.at_or_last(nu).delta, a.n_check)
}

/// Max and min starts converge on the study grid and agree at nu = 6 and nu = 10.
pub fn convergence_grid() -> Result<Outcome> {
    let clock = Instant::now();
    let settings = study_settings(20);
    let mut passed = true;
    let mut notes = Vec::new();
    for &lambda in &STUDY_LAMBDAS {
        let (hi, lo) = pair(lambda, CONVERGENCE_N_MAX, &settings)?;
        let coarse = relative_gap(&hi, &lo, AGREE_NU_COARSE);
        let fine = relative_gap(&hi, &lo, AGREE_NU_FINE);
        let ok = hi.status.is_converged()
            && lo.status.is_converged()
            && coarse <= AGREE_TOL_COARSE
            && fine <= AGREE_TOL_FINE;
        passed &= ok;
        notes.push(format!(
            "lambda={lambda}: max {} / min {}, gap(nu=6)={coarse:.2e}, gap(nu=10)={fine:.2e}",
            hi.status, lo.status
        ));
    }
    let secs = clock.elapsed().as_secs_f64();
    passed &= secs <= CONVERGENCE_BUDGET_SECS;
    notes.push(format!("{secs:.2}s"));
    Ok(Outcome {
        id: 1,
        name: "convergence grid",
        passed,
        detail: notes.join("; "),
    })
}

/// Both starts diverge at lambda = 0.15 within 20 iterations.
pub fn divergence() -> Result<Outcome> {
    let (hi, lo) = pair(DIVERGENT_LAMBDA, CONVERGENCE_N_MAX, &study_settings(20))?;
    let diverged = |t: &IterationTrace| matches!(t.status, IterationStatus::Diverged { .. });
    Ok(Outcome {
        id: 2,
        name: "divergence at lambda = 0.15",
        passed: diverged(&hi) && diverged(&lo),
        detail: format!("max {}, min {}", hi.status, lo.status),
    })
}

/// Max-start deltas fall and min-start deltas rise, and the max start moves further on step one.
pub fn monotone_approach() -> Result<Outcome> {
    let settings = study_settings(20);
    let mut passed = true;
    let mut notes = Vec::new();
    for &lambda in STUDY_LAMBDAS.iter().filter(|&&l| l <= MONOTONE_LAMBDA_CAP) {
        let (hi, lo) = pair(lambda, CONVERGENCE_N_MAX, &settings)?;
        let mut breaks = 0usize;
        let mut first_step_bad = Vec::new();
        for n in (7..=CONVERGENCE_N_MAX).step_by(2) {
            let series = |t: &IterationTrace| -> Vec<f64> {
                t.snapshots.iter().map(|s| s.delta.get(n).unwrap_or(f64::NAN)).collect()
            };
            let (up, down) = (series(&hi), series(&lo));
            breaks += up.windows(2).filter(|w| !(w[1] <= w[0] + MONOTONE_SLACK)).count();
            breaks += down.windows(2).filter(|w| !(w[1] >= w[0] - MONOTONE_SLACK)).count();
            let step = |v: &[f64]| if v.len() > 1 { (v[1] - v[0]).abs() } else { f64::NAN };
            if !(step(&up) > step(&down)) {
                first_step_bad.push(n);
            }
        }
        passed &= breaks == 0 && first_step_bad.is_empty();
        notes.push(format!(
            "lambda={lambda}: {breaks} non-monotone steps, first-step order broken at n={first_step_bad:?}"
        ));
    }
    Ok(Outcome {
        id: 3,
        name: "monotone approach",
        passed,
        detail: notes.join("; "),
    })
}

/// Every iterate (nu >= 1) of every convergent run with lambda <= 0.05 lies in Φ₀.
pub fn phi0_stability() -> Result<Outcome> {
    let settings = study_settings(20);
    let mut passed = true;
    let mut checked = 0usize;
    let mut skipped = Vec::new();
    let mut notes = Vec::new();
    for &lambda in STUDY_LAMBDAS.iter().filter(|&&l| l <= MONOTONE_LAMBDA_CAP) {
        let (hi, lo) = pair(lambda, CONVERGENCE_N_MAX, &settings)?;
        let checker = PhiChecker::new(lambda, DEFAULT_K0, crate::sequences::DEFAULT_D0, CONVERGENCE_N_MAX)?;
        for trace in [&hi, &lo] {
            if !trace.status.is_converged() {
                skipped.push(format!("{lambda}/{}", trace.start));
                continue;
            }
            checked += 1;
            for (nu, snap) in trace.snapshots.iter().enumerate().skip(1) {
                let report = checker.check(&snap.h, &snap.delta);
                if let Some(level) = report.first_failure() {
                    passed = false;
                    notes.push(format!("lambda={lambda} {} leaves Φ₀ at nu={nu}, n={}", trace.start, level.n));
                    break;
                }
            }
        }
    }
    passed &= checked > 0;
    notes.push(format!("{checked} convergent runs checked, non-convergent skipped: {skipped:?}"));
    Ok(Outcome {
        id: 4,
        name: "stability of Φ₀",
        passed,
        detail: notes.join("; "),
    })
}

/// With N_max = 1001 lambda = 0.01 stays stable for 5 iterations while lambda = 0.075 does not.
pub fn large_n_instability() -> Result<Outcome> {
    let clock = Instant::now();
    let settings = IterateSettings {
        nu_max: LARGE_N_ITERS,
        tol_converge: 0.0,
        ..IterateSettings::default()
    };
    let starts = [StartLabel::Max, StartLabel::Min];
    let (stable, unstable) = rayon::join(
        || stability_at(&Setup::new(LARGE_N_STABLE_LAMBDA, LARGE_N_MAX), &starts, &settings, DEFAULT_K0),
        || stability_at(&Setup::new(LARGE_N_UNSTABLE_LAMBDA, LARGE_N_MAX), &starts, &settings, DEFAULT_K0),
    );
    let (stable, unstable) = (stable?, unstable?);
    let secs = clock.elapsed().as_secs_f64();
    Ok(Outcome {
        id: 5,
        name: "large-n instability",
        passed: stable.stable && !unstable.stable && secs <= LARGE_N_BUDGET_SECS,
        detail: format!(
            "lambda={}: stable={} {:?}; lambda={}: stable={} {:?}; {secs:.1}s",
            LARGE_N_STABLE_LAMBDA,
            stable.stable,
            stable.failure,
            LARGE_N_UNSTABLE_LAMBDA,
            unstable.stable,
            unstable.failure
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRow {
    pub lambda: f64,
    pub max_q: f64,
    pub mean_q: f64,
}

/// Max/mean contraction ratios over `lambdas`; failed probes report NaN.
pub fn contraction_table(lambdas: &[f64], n_max: usize, rho: f64, pairs: usize, seed: u64) -> Vec<ContractionRow> {
    use rayon::prelude::*;
    lambdas
        .par_iter()
        .map(|&lambda| match contraction_estimate(&Setup::new(lambda, n_max), rho, pairs, seed) {
            Ok(s) => ContractionRow {
                lambda,
                max_q: s.max_q,
                mean_q: s.mean_q,
            },
            Err(_) => ContractionRow {
                lambda,
                max_q: f64::NAN,
                mean_q: f64::NAN,
            },
        })
        .collect()
}

/// First lambda where `max_q` reaches 1, linearly interpolated between grid points.
pub fn contraction_crossing(rows: &[ContractionRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.max_q < 1.0 && !(b.max_q < 1.0) {
            if b.max_q.is_finite() {
                Some(a.lambda + (1.0 - a.max_q) / (b.max_q - a.max_q) * (b.lambda - a.lambda))
            } else {
                Some(b.lambda)
            }
        } else {
            None
        }
    })
}

/// `max_q < 1` at lambda in {0.01, 0.03, 0.05}; the scan and its q = 1 crossing are reported.
pub fn contractivity() -> Result<Outcome> {
    let table = contraction_table(&CONTRACTION_SCAN, CONVERGENCE_N_MAX, CONTRACTION_RHO, CONTRACTION_PAIRS, CONTRACTION_SEED);
    let passed = table
        .iter()
        .filter(|r| CONTRACTION_LAMBDAS.contains(&r.lambda))
        .all(|r| r.max_q < 1.0);
    let cells: Vec<String> = table
        .iter()
        .map(|r| format!("{}:{:.3}/{:.3}", r.lambda, r.max_q, r.mean_q))
        .collect();
    let crossing = match contraction_crossing(&table) {
        Some(l) => format!("q = 1 near lambda = {l:.3}"),
        None => "no q = 1 crossing on the scan".to_string(),
    };
    Ok(Outcome {
        id: 6,
        name: "contractivity probe",
        passed,
        detail: format!("lambda:max_q/mean_q {}; {crossing}", cells.join(" ")),
    })
}

/// Sum over ordered odd triples of `n!/(i1! i2! i3!)` equals `6 sum_canonical n!/(i1! i2! i3! sigma)`.
pub fn orbit_identity_holds(n_max: usize) -> bool {
    (3..=n_max).step_by(2).all(|n| {
        let f = |k: usize| factorial_exact(k).expect("exact factorial");
        let mut ordered: u128 = 0;
        for i1 in (1..n).step_by(2) {
            for i2 in (1..n - i1).step_by(2) {
                let i3 = n - i1 - i2;
                if i3 % 2 == 1 {
                    ordered += f(n) / (f(i1) * f(i2) * f(i3));
                }
            }
        }
        let mut canonical: u128 = 0;
        let mut orbits_ok = true;
        for_each_triple(n, |t| {
            canonical += 6 * triple_coefficient_exact(n, &t).expect("exact coefficient");
            let perms = [
                (t.i1, t.i2, t.i3),
                (t.i1, t.i3, t.i2),
                (t.i2, t.i1, t.i3),
                (t.i2, t.i3, t.i1),
                (t.i3, t.i1, t.i2),
                (t.i3, t.i2, t.i1),
            ];
            let mut distinct = perms.to_vec();
            distinct.sort();
            distinct.dedup();
            orbits_ok &= distinct.len() as u32 * symmetry_factor(&t) == 6;
        });
        orbits_ok && ordered == canonical
    })
}

/// Fixed point at lambda = 0.001 against the exact series, plus the orbit identity.
pub fn oracle_equivalence() -> Result<Outcome> {
    let setup = Setup::new(ORACLE_LAMBDA, CONVERGENCE_N_MAX);
    let trace = iterate_from(&setup, StartLabel::Max, &study_settings(60))?;
    let table = perturbative_series(ORACLE_N_MAX, ORACLE_ORDER, setup.params.include_j2_zero)?;
    let mut worst = 0.0f64;
    for n in (1..=ORACLE_N_MAX).step_by(2) {
        let got = trace.last().h.get(n).map_or(f64::NAN, |v| v.to_f64());
        let want = table.eval(n, ORACLE_LAMBDA).unwrap_or(f64::NAN);
        let rel = (got - want).abs() / want.abs();
        worst = if rel.is_nan() { f64::NAN } else { worst.max(rel) };
    }
    let orbits = orbit_identity_holds(ORBIT_N_MAX);
    Ok(Outcome {
        id: 7,
        name: "oracle equivalence",
        passed: trace.status.is_converged() && worst <= ORACLE_TOL && orbits,
        detail: format!(
            "fixed point ({}) vs order-{ORACLE_ORDER} series, n <= {ORACLE_N_MAX}: max rel {worst:.2e}; orbit identity to n = {ORBIT_N_MAX}: {orbits}",
            trace.status
        ),
    })
}

/// `delta_n / lambda -> 3n(n-1)` (6 at n = 3) at lambda = 1e-6 for n <= 15.
pub fn splitting_limits() -> Result<Outcome> {
    let ns: Vec<usize> = (3..=LIMIT_N_MAX).step_by(2).collect();
    let rows = check_small_lambda_limits(&ns, LIMIT_LAMBDA, &study_settings(60))?;
    let worst = rows.iter().map(|r| r.deviation).fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    Ok(Outcome {
        id: 8,
        name: "splitting limits",
        passed: worst <= LIMIT_TOL,
        detail: format!("max relative deviation {worst:.2e} over n = 3..={LIMIT_N_MAX}"),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV of the golden sweep: the default configuration restricted to lambda = 0.01.
pub fn golden_sweep_csv() -> Result<String> {
    let cfg = SweepConfig {
        lambdas: vec![0.01],
        formats: vec![],
        ..SweepConfig::default()
    };
    Ok(render_csv(&run_sweep(&cfg)?.rows))
}

/// Default sweep writes all three figure sets and a CSV that is byte-stable and matches the golden hash.
pub fn reproduction_artifacts(out_dir: &Path) -> Result<Outcome> {
    let run = |sub: &str| {
        let cfg = SweepConfig {
            out_dir: Some(out_dir.join(sub)),
            formats: vec![OutputFormat::Csv, OutputFormat::Svg],
            ..SweepConfig::default()
        };
        run_sweep(&cfg)
    };
    let first = run("run1")?;
    let second = run("run2")?;
    let read = |dir: &str| std::fs::read(out_dir.join(dir).join("sweep.csv")).unwrap_or_default();
    let stable = {
        let a = read("run1");
        !a.is_empty() && a == read("run2")
    };
    let mut missing = Vec::new();
    for &lambda in &DEFAULT_LAMBDAS {
        for set in [1, 2] {
            let name = format!("set{set}_lambda_{lambda}.svg");
            if !out_dir.join("run1").join(&name).is_file() {
                missing.push(name);
            }
        }
    }
    for start in ["max", "min"] {
        let name = format!("set3_{start}.svg");
        if !out_dir.join("run1").join(&name).is_file() {
            missing.push(name);
        }
    }
    let digest = sha256_hex(golden_sweep_csv()?.as_bytes());
    let golden = GOLDEN_SWEEP_SHA256.trim();
    let matches = digest == golden;
    Ok(Outcome {
        id: 9,
        name: "reproduction artifacts",
        passed: stable && missing.is_empty() && matches && first.files.len() == second.files.len(),
        detail: format!(
            "{} files, byte-stable csv: {stable}, missing figures: {missing:?}, golden sha256 {}",
            first.files.len(),
            if matches { "matches".to_string() } else { format!("differs ({digest} vs {golden})") }
        ),
    })
}

/// Runs criteria 1 to 9 in order. Errors become failed outcomes.
pub fn run_all(out_dir: &Path) -> Vec<Outcome> {
    type Check<'a> = (u8, &'static str, Box<dyn Fn() -> Result<Outcome> + 'a>);
    let checks: Vec<Check> = vec![
        (1, "convergence grid", Box::new(convergence_grid)),
        (2, "divergence at lambda = 0.15", Box::new(divergence)),
        (3, "monotone approach", Box::new(monotone_approach)),
        (4, "stability of Φ₀", Box::new(phi0_stability)),
        (5, "large-n instability", Box::new(large_n_instability)),
        (6, "contractivity probe", Box::new(contractivity)),
        (7, "oracle equivalence", Box::new(oracle_equivalence)),
        (8, "splitting limits", Box::new(splitting_limits)),
        (9, "reproduction artifacts", Box::new(move || reproduction_artifacts(out_dir))),
    ];
    checks
        .into_iter()
        .map(|(id, name, f)| {
            f().unwrap_or_else(|e| Outcome {
                id,
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
