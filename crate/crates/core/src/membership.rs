//! Φ / Φ₀ membership checks and the stability and small-coupling certificates built on them.

use rayon::prelude::*;

use crate::combinatorics::ln_factorial;
use crate::dynamics::{extract_delta_lossy, iterate_from, IterateSettings, IterationStatus, Setup, StartLabel};
use crate::error::Result;
use crate::sequences::{
    build_h_max, build_h_min, check_lambda, delta_max, delta_min, expected_sign, DeltaSequence,
    GreenSequence,
};

pub const DEFAULT_K0: f64 = 10.0;
/// Absolute slack on the envelope band, in δ units.
pub const BAND_SLACK: f64 = 1e-12;
/// Slack on `ln|H|` in the bracket comparison.
pub const BRACKET_SLACK: f64 = 1e-12;

/// Per-level flags. `n = 1` carries no splitting factor, so its band flags are vacuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiLevel {
    pub n: usize,
    pub delta: f64,
    pub sign_ok: bool,
    pub delta_positive: bool,
    pub band_ok: bool,
    pub bracket_ok: bool,
    pub bound_ok: bool,
}

impl PhiLevel {
    pub fn phi_ok(&self) -> bool {
        self.sign_ok && self.delta_positive && self.band_ok && self.bound_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiReport {
    pub lambda: f64,
    pub k0: f64,
    pub levels: Vec<PhiLevel>,
    pub phi_member: bool,
    pub phi0_member: bool,
}

impl PhiReport {
    /// First level that breaks Φ₀, if any.
    pub fn first_failure(&self) -> Option<&PhiLevel> {
        self.levels.iter().find(|l| !(l.phi_ok() && l.bracket_ok))
    }
}

/// Checks every entry of `h`.
pub fn check_phi(h: &GreenSequence, k0: f64, d0: f64) -> Result<PhiReport> {
    check_phi_upto(h, k0, d0, h.n_work())
}

/// Checks the entries with `n <= n_top`.
pub fn check_phi_upto(h: &GreenSequence, k0: f64, d0: f64, n_top: usize) -> Result<PhiReport> {
    let checker = PhiChecker::new(h.lambda(), k0, d0, n_top.min(h.n_work()))?;
    Ok(checker.check(h, &extract_delta_lossy(h)))
}

/// Envelopes and bounds for one `(lambda, n_top)`, reusable across many sequences.
#[derive(Debug, Clone)]
pub struct PhiChecker {
    lambda: f64,
    k0: f64,
    n_top: usize,
    ln_hi: Vec<f64>,
    ln_lo: Vec<f64>,
    band: Vec<(f64, f64)>,
    ln_bound: Vec<f64>,
}

impl PhiChecker {
    pub fn new(lambda: f64, k0: f64, d0: f64, n_top: usize) -> Result<Self> {
        check_lambda(lambda)?;
        if !(k0 > 0.0) {
            return Err(crate::Error::Domain(format!("K0 must be positive, got {k0}")));
        }
        let grid = n_top.max(3) | 1;
        let hi = build_h_max(lambda, grid, d0)?;
        let lo = build_h_min(lambda, grid)?;
        let mut band = vec![(f64::NEG_INFINITY, f64::INFINITY)];
        for n in (3..=grid).step_by(2) {
            band.push((delta_min(n, lambda)?, delta_max(n, lambda, d0)?));
        }
        let ln_k0 = k0.ln();
        Ok(PhiChecker {
            lambda,
            k0,
            n_top,
            ln_hi: hi.values().iter().map(|v| v.ln_abs()).collect(),
            ln_lo: lo.values().iter().map(|v| v.ln_abs()).collect(),
            band,
            ln_bound: (0..hi.len()).map(|k| ln_factorial(2 * k + 1) + (2 * k + 1) as f64 * ln_k0).collect(),
        })
    }

    /// `delta` must be the splitting of `h`.
    pub fn check(&self, h: &GreenSequence, delta: &DeltaSequence) -> PhiReport {
        let mut levels = Vec::new();
        for (k, v) in h.values().iter().enumerate() {
            let n = 2 * k + 1;
            if n > self.n_top || k >= self.ln_hi.len() {
                break;
            }
            let ln_abs = v.ln_abs();
            let sign_ok = v.sign() == expected_sign(n);
            let bound_ok = v.is_zero() || ln_abs <= self.ln_bound[k];
            let bracket_ok = !v.is_zero()
                && ln_abs <= self.ln_hi[k] + BRACKET_SLACK
                && ln_abs >= self.ln_lo[k] - BRACKET_SLACK;
            let (d, delta_positive, band_ok) = if n == 1 {
                (delta.delta_1, true, true)
            } else {
                let d = delta.get(n).unwrap_or(f64::NAN);
                let (lower, upper) = self.band[k];
                (d, d > 0.0, d >= lower - BAND_SLACK && d <= upper + BAND_SLACK)
            };
            levels.push(PhiLevel {
                n,
                delta: d,
                sign_ok,
                delta_positive,
                band_ok,
                bracket_ok,
                bound_ok,
            });
        }
        let phi_member = levels.iter().all(PhiLevel::phi_ok);
        let phi0_member = phi_member && levels.iter().all(|l| l.bracket_ok);
        PhiReport {
            lambda: self.lambda,
            k0: self.k0,
            levels,
            phi_member,
            phi0_member,
        }
    }
}

/// Where a stability run first left Φ₀ or stopped badly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFailure {
    pub start: StartLabel,
    pub nu: usize,
    /// Offending level; `None` when the run itself diverged or hit a singularity.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub lambda: f64,
    pub stable: bool,
    pub statuses: Vec<(StartLabel, IterationStatus)>,
    pub failure: Option<StabilityFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub n_max: usize,
    pub nu_max: usize,
    pub rows: Vec<StabilityRow>,
    /// Top of the leading run of stable Λ values (grid sorted ascending).
    pub largest_stable: Option<f64>,
}

pub const STABILITY_STARTS: [StartLabel; 3] = [StartLabel::Max, StartLabel::Min, StartLabel::H0];

/// Runs every start in `starts` at one Λ and checks each iterate (`nu >= 1`; the
/// start itself is not an iterate) against Φ₀ for `n <= n_max`.
pub fn stability_at(
    setup: &Setup,
    starts: &[StartLabel],
    settings: &IterateSettings,
    k0: f64,
) -> Result<StabilityRow> {
    let checker = PhiChecker::new(setup.lambda, k0, setup.params.d0, setup.n_max)?;
    let mut statuses = Vec::with_capacity(starts.len());
    let mut failure = None;
    for &label in starts {
        let trace = iterate_from(setup, label, settings)?;
        statuses.push((label, trace.status));
        if failure.is_some() {
            continue;
        }
        for (nu, snap) in trace.snapshots.iter().enumerate().skip(1) {
            let report = checker.check(&snap.h, &snap.delta);
            if let Some(level) = report.first_failure() {
                failure = Some(StabilityFailure {
                    start: label,
                    nu,
                    n: Some(level.n),
                });
                break;
            }
        }
        if failure.is_none() {
            if let IterationStatus::Diverged { nu } | IterationStatus::Singular { nu, .. } = trace.status {
                failure = Some(StabilityFailure { start: label, nu, n: None });
            }
        }
    }
    Ok(StabilityRow {
        lambda: setup.lambda,
        stable: failure.is_none(),
        statuses,
        failure,
    })
}

/// Stability verdict per Λ, running `H_max`, `H_min` and `H_0` starts.
pub fn check_stability(
    lambda_grid: &[f64],
    template: &Setup,
    settings: &IterateSettings,
    k0: f64,
) -> Result<StabilityTable> {
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let setup = Setup { lambda, ..*template };
            stability_at(&setup, &STABILITY_STARTS, settings, k0)
        })
        .collect::<Result<Vec<_>>>()?;
    let largest_stable = rows.iter().take_while(|r| r.stable).last().map(|r| r.lambda);
    Ok(StabilityTable {
        n_max: template.n_max,
        nu_max: settings.nu_max,
        rows,
        largest_stable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub n: usize,
    /// `δ_n/Λ` for `n >= 3`, `δ_1` itself for `n = 1`.
    pub value: f64,
    pub target: f64,
    /// Relative deviation for `n >= 3`, absolute for `n = 1`.
    pub deviation: f64,
}

/// Compares `δ_n/Λ` at the fixed point reached from `H_0` with `3n(n-1)` (6 at `n = 3`).
pub fn check_small_lambda_limits(
    n_list: &[usize],
    lambda_probe: f64,
    settings: &IterateSettings,
) -> Result<Vec<LimitRow>> {
    check_lambda(lambda_probe)?;
    let top = n_list.iter().copied().max().unwrap_or(3).max(3) | 1;
    let setup = Setup::new(lambda_probe, top);
    let trace = iterate_from(&setup, StartLabel::H0, settings)?;
    let delta = &trace.last().delta;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        crate::sequences::check_odd_at_least(n, 1)?;
        let row = if n == 1 {
            LimitRow {
                n,
                value: delta.delta_1,
                target: 0.0,
                deviation: delta.delta_1.abs(),
            }
        } else {
            let target = if n == 3 { 6.0 } else { 3.0 * (n * (n - 1)) as f64 };
            let value = delta.get(n).unwrap_or(f64::NAN) / lambda_probe;
            LimitRow {
                n,
                value,
                target,
                deviation: (value - target).abs() / target,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{build_h0, ModelParams, DEFAULT_D0};

    #[test]
    fn h0_is_in_phi0_at_weak_coupling() {
        let h = build_h0(0.001, 25, &ModelParams::default()).unwrap();
        let report = check_phi(&h, DEFAULT_K0, DEFAULT_D0).unwrap();
        assert!(report.phi_member && report.phi0_member, "{:?}", report.first_failure());
    }

    #[test]
    fn h0_overshoots_upper_band_at_large_n() {
        // delta_{n,0} tends to 3 lambda n(n-1), which the d0-damped upper envelope undercuts
        let h = build_h0(0.01, 25, &ModelParams::default()).unwrap();
        let report = check_phi(&h, DEFAULT_K0, DEFAULT_D0).unwrap();
        for l in &report.levels {
            assert!(l.sign_ok && l.delta_positive && l.bracket_ok && l.bound_ok);
            assert_eq!(l.band_ok, l.n <= 13, "n = {}", l.n);
        }
        assert!(!report.phi_member);
        let head = check_phi_upto(&h, DEFAULT_K0, DEFAULT_D0, 13).unwrap();
        assert!(head.phi0_member);
    }

    #[test]
    fn doubled_h_max_leaves_bracket() {
        let h = build_h_max(0.01, 25, DEFAULT_D0).unwrap().scaled(2.0);
        let report = check_phi(&h, DEFAULT_K0, DEFAULT_D0).unwrap();
        assert!(report.levels.iter().all(|l| !l.bracket_ok));
        assert!(!report.phi0_member);
    }

    #[test]
    fn positive_h4_breaks_sign() {
        let h = build_h0(0.01, 9, &ModelParams::default()).unwrap();
        let flipped = h.map_values(|n, v| if n == 3 { -v } else { v });
        let report = check_phi(&flipped, DEFAULT_K0, DEFAULT_D0).unwrap();
        let l3 = report.levels[1];
        assert_eq!(l3.n, 3);
        assert!(!l3.sign_ok && !l3.delta_positive);
        assert!(!report.phi_member && !report.phi0_member);
    }

    #[test]
    fn tiny_k0_breaks_bound_only() {
        let h = build_h0(0.01, 9, &ModelParams::default()).unwrap();
        let report = check_phi(&h, 1e-3, DEFAULT_D0).unwrap();
        assert!(report.levels.iter().any(|l| !l.bound_ok));
        assert!(report.levels.iter().all(|l| l.sign_ok && l.band_ok && l.bracket_ok));
        assert!(check_phi(&h, 0.0, DEFAULT_D0).is_err());
    }

    #[test]
    fn envelopes_touch_their_own_band_edge() {
        for lambda in [0.001, 0.05] {
            let hi = build_h_max(lambda, 25, DEFAULT_D0).unwrap();
            let lo = build_h_min(lambda, 25).unwrap();
            assert!(check_phi(&hi, DEFAULT_K0, DEFAULT_D0).unwrap().phi0_member);
            assert!(check_phi(&lo, DEFAULT_K0, DEFAULT_D0).unwrap().phi0_member);
        }
    }

    #[test]
    fn small_coupling_limits() {
        let rows = check_small_lambda_limits(&[1, 3, 7], 1e-8, &IterateSettings::default()).unwrap();
        assert!(rows[0].deviation < 1e-6);
        assert_eq!(rows[1].target, 6.0);
        assert!(rows[1].deviation < 1e-4);
        assert_eq!(rows[2].target, 126.0);
        assert!(rows[2].deviation < 1e-4);
    }

    #[test]
    fn stability_small_and_large_coupling() {
        let template = Setup::new(0.01, 25);
        let settings = IterateSettings::default();
        let table = check_stability(&[0.15, 0.01], &template, &settings, DEFAULT_K0).unwrap();
        assert_eq!(table.rows[0].lambda, 0.01);
        assert!(table.rows[0].stable, "{:?}", table.rows[0].failure);
        assert!(!table.rows[1].stable);
        assert_eq!(table.largest_stable, Some(0.01));
    }
}
