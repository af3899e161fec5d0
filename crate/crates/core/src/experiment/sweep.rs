//! Sweep orchestration over `(lambda, start)` cells.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::dynamics::{
    iterate_from, IterateSettings, IterationStatus, IterationTrace, PadPolicy, Setup, StartLabel,
};
use crate::error::{Error, Result};
use crate::membership::DEFAULT_K0;
use crate::sequences::{ModelParams, DEFAULT_D0};

/// Smallest `n` written to sweep rows.
pub const FIRST_REPORTED_N: usize = 7;

/// Couplings of the main convergence study.
pub const STUDY_LAMBDAS: [f64; 6] = [0.001, 0.01, 0.03, 0.05, 0.075, 0.1];

/// Study couplings, the extra figure couplings and the divergent 0.15.
pub const DEFAULT_LAMBDAS: [f64; 13] = [
    0.0005, 0.001, 0.01, 0.015, 0.02, 0.025, 0.03, 0.05, 0.07, 0.075, 0.09, 0.1, 0.15,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            _ => Err(Error::Usage(format!("unknown format '{s}' (expected csv, svg)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub n_max: usize,
    pub nu_max: usize,
    pub starts: Vec<StartLabel>,
    pub d0: f64,
    pub k0: f64,
    pub include_j2_zero: bool,
    pub pad_policy: PadPolicy,
    pub tol_converge: f64,
    pub div_threshold: f64,
    pub out_dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let it = IterateSettings::default();
        SweepConfig {
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            n_max: 25,
            nu_max: it.nu_max,
            starts: vec![StartLabel::Max, StartLabel::Min],
            d0: DEFAULT_D0,
            k0: DEFAULT_K0,
            include_j2_zero: false,
            pad_policy: PadPolicy::Fundamental,
            tol_converge: it.tol_converge,
            div_threshold: it.div_threshold,
            out_dir: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Svg],
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Usage("lambda list is empty".into()));
        }
        if let Some(bad) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Usage(format!("lambda must be positive and finite, got {bad}")));
        }
        if self.n_max < FIRST_REPORTED_N || self.n_max.is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "n-max must be odd and at least {FIRST_REPORTED_N}, got {}",
                self.n_max
            )));
        }
        if self.nu_max < 1 {
            return Err(Error::Usage("iteration count must be at least 1".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::Usage("start list is empty".into()));
        }
        if self.starts.contains(&StartLabel::Custom) {
            return Err(Error::Usage("sweeps take max, min or h0 starts".into()));
        }
        if !(self.d0 > 0.0) || !(self.k0 > 0.0) {
            return Err(Error::Usage("d0 and k0 must be positive".into()));
        }
        if !(self.tol_converge >= 0.0) || !(self.div_threshold > 0.0) {
            return Err(Error::Usage("tolerances must be positive".into()));
        }
        if !self.formats.is_empty() && self.out_dir.is_none() {
            return Err(Error::Usage("an output directory is needed to write files".into()));
        }
        Ok(())
    }

    pub fn setup(&self, lambda: f64) -> Setup {
        Setup {
            params: ModelParams {
                d0: self.d0,
                include_j2_zero: self.include_j2_zero,
            },
            pad_policy: self.pad_policy,
            ..Setup::new(lambda, self.n_max)
        }
    }

    pub fn settings(&self) -> IterateSettings {
        IterateSettings {
            nu_max: self.nu_max,
            tol_converge: self.tol_converge,
            div_threshold: self.div_threshold,
        }
    }
}

/// One `(lambda, start, nu, n)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub n: usize,
    pub nu: usize,
    pub start: StartLabel,
    pub delta: f64,
    pub h_sign: i8,
    pub h_log10_abs: f64,
    /// `ok` before the last snapshot; the run's final status on it.
    pub status: &'static str,
}

/// Sort key of the CSV: `(lambda, start label, nu, n)`.
pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then_with(|| a.start.as_str().cmp(b.start.as_str()))
            .then_with(|| a.nu.cmp(&b.nu))
            .then_with(|| a.n.cmp(&b.n))
    });
}

/// Flattens a trace into rows for `FIRST_REPORTED_N <= n <= n_max`.
pub fn trace_rows(trace: &IterationTrace, n_max: usize) -> Vec<SweepRow> {
    let last = trace.nu_stop();
    let final_label = match trace.status {
        IterationStatus::Running => "ok",
        s => s.label(),
    };
    let mut rows = Vec::new();
    for (nu, snap) in trace.snapshots.iter().enumerate() {
        let status = if nu == last { final_label } else { "ok" };
        for n in (FIRST_REPORTED_N..=n_max).step_by(2) {
            let h = snap.h.get(n).unwrap_or(crate::logval::LogValue::ZERO);
            rows.push(SweepRow {
                lambda: trace.lambda,
                n,
                nu,
                start: trace.start,
                delta: snap.delta.get(n).unwrap_or(f64::NAN),
                h_sign: h.sign().as_i8(),
                h_log10_abs: h.log10_abs(),
                status,
            });
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub traces: Vec<IterationTrace>,
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

impl SweepResult {
    /// Traces at `lambda <= lambda_cap` that diverged or hit a singularity.
    pub fn unexpected_failures(&self, lambda_cap: f64) -> Vec<&IterationTrace> {
        self.traces
            .iter()
            .filter(|t| t.lambda <= lambda_cap && t.status.is_failure())
            .collect()
    }
}

/// Runs every `(lambda, start)` cell in parallel, then writes the requested files.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let cells: Vec<(f64, StartLabel)> = config
        .lambdas
        .iter()
        .flat_map(|&l| config.starts.iter().map(move |&s| (l, s)))
        .collect();
    let settings = config.settings();
    let mut traces = cells
        .par_iter()
        .map(|&(lambda, start)| iterate_from(&config.setup(lambda), start, &settings))
        .collect::<Result<Vec<_>>>()?;
    traces.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then_with(|| a.start.as_str().cmp(b.start.as_str()))
    });
    let mut rows: Vec<SweepRow> = traces
        .iter()
        .flat_map(|t| trace_rows(t, config.n_max))
        .collect();
    sort_rows(&mut rows);

    let mut files = Vec::new();
    if let Some(dir) = &config.out_dir {
        if !config.formats.is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        if config.formats.contains(&OutputFormat::Csv) {
            let path = dir.join("sweep.csv");
            super::csv::emit_csv(&rows, &path)?;
            files.push(path);
        }
        if config.formats.contains(&OutputFormat::Svg) {
            for set in 1..=3 {
                files.extend(super::svg::emit_svg(&rows, set, dir)?);
            }
        }
    }
    Ok(SweepResult {
        traces,
        rows,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(lambdas: &[f64]) -> SweepConfig {
        SweepConfig {
            lambdas: lambdas.to_vec(),
            formats: vec![],
            ..Default::default()
        }
    }

    #[test]
    fn rows_are_complete_and_unique() {
        let cfg = quiet(&STUDY_LAMBDAS);
        let res = run_sweep(&cfg).unwrap();
        let expected: usize = res.traces.iter().map(|t| t.snapshots.len() * 10).sum();
        assert_eq!(res.rows.len(), expected);
        assert!(res.rows.len() <= 6 * 2 * 21 * 10);
        let mut keys: Vec<_> = res
            .rows
            .iter()
            .map(|r| (r.lambda.to_bits(), r.start, r.nu, r.n))
            .collect();
        let before = keys.len();
        keys.dedup();
        assert_eq!(keys.len(), before);
        assert!(res.files.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(quiet(&[]).validate().is_err());
        assert!(quiet(&[-0.1]).validate().is_err());
        assert!(SweepConfig { n_max: 8, ..quiet(&[0.01]) }.validate().is_err());
        assert!(SweepConfig { n_max: 5, ..quiet(&[0.01]) }.validate().is_err());
        assert!(SweepConfig { nu_max: 0, ..quiet(&[0.01]) }.validate().is_err());
        assert!(SweepConfig::default().validate().is_err());
        assert!(quiet(&[0.01]).validate().is_ok());
    }

    #[test]
    fn strong_coupling_rows_are_not_converged() {
        let res = run_sweep(&quiet(&[0.15])).unwrap();
        for t in &res.traces {
            assert!(!t.status.is_converged());
        }
    }
}
