//! `phi4` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::series::perturbative_series;
use super::sweep::{run_sweep, OutputFormat, SweepConfig, DEFAULT_LAMBDAS};
use super::verify::{self, contraction_crossing, contraction_table};
use crate::dynamics::{iterate, iterate_from, IterationStatus, PadPolicy, Setup, StartLabel};
use crate::error::{Error, Result};
use crate::membership::{check_phi_upto, check_stability, DEFAULT_K0};
use crate::sequences::{
    build_h_max, build_h_min, delta_max, delta_min, norm_weights, ModelParams, DEFAULT_D0,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

/// Under `--strict`, failures at couplings up to this value are unexpected.
pub const STRICT_LAMBDA_CAP: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "phi4", version, about = "Zero-dimensional phi^4 Green's functions: envelopes, the M* iteration and its study")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Single coupling.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Comma-separated couplings.
    #[arg(long, global = true, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Largest reported n (odd).
    #[arg(long, global = true, default_value_t = 25)]
    n_max: usize,
    /// Number of M* applications.
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Comma-separated starts: max, min, h0.
    #[arg(long, global = true, value_delimiter = ',')]
    start: Option<Vec<String>>,
    #[arg(long, global = true, default_value_t = DEFAULT_D0)]
    d0: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_K0)]
    k0: f64,
    /// Include the j2 = 0 partition in the B-term.
    #[arg(long, global = true)]
    j2_zero: bool,
    /// fundamental, envelope or zero.
    #[arg(long, global = true, default_value = "fundamental")]
    pad_policy: String,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 1e6)]
    div_threshold: f64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated output formats: csv, svg.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<String>>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Exit 2 when a run at lambda <= 0.1 diverges or turns singular.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate M* at one coupling and print the trace.
    Iterate,
    /// Run the (lambda, start) grid and write CSV/SVG output.
    Sweep,
    /// Print the delta envelopes and norm weights.
    Envelopes,
    /// Check a start sequence (optionally iterated) against Φ and Φ₀.
    CheckPhi,
    /// Per-coupling stability verdicts from the max, min and h0 starts.
    Stability,
    /// Estimate the contraction ratio of M* near H_0.
    Contraction {
        #[arg(long, default_value_t = verify::CONTRACTION_RHO)]
        rho: f64,
        #[arg(long, default_value_t = verify::CONTRACTION_PAIRS)]
        pairs: usize,
    },
    /// Print the exact weak-coupling series coefficients.
    SeriesOracle {
        #[arg(long, default_value_t = 6)]
        order: usize,
    },
    /// Run the acceptance comparisons.
    Verify,
}

impl Cli {
    fn params(&self) -> ModelParams {
        ModelParams {
            d0: self.d0,
            include_j2_zero: self.j2_zero,
        }
    }

    fn setup(&self, lambda: f64) -> Result<Setup> {
        Ok(Setup {
            params: self.params(),
            pad_policy: self.pad_policy.parse::<PadPolicy>()?,
            ..Setup::new(lambda, self.n_max)
        })
    }

    fn lambda(&self) -> Result<f64> {
        match (self.lambda, self.lambdas.as_deref()) {
            (Some(l), _) => Ok(l),
            (None, Some([l])) => Ok(*l),
            _ => Err(Error::Usage("this command needs --lambda".into())),
        }
    }

    fn starts(&self, default: &[StartLabel]) -> Result<Vec<StartLabel>> {
        match &self.start {
            None => Ok(default.to_vec()),
            Some(v) => v.iter().map(|s| s.parse()).collect(),
        }
    }

    fn settings(&self, default_iters: usize) -> crate::dynamics::IterateSettings {
        crate::dynamics::IterateSettings {
            nu_max: self.iters.unwrap_or(default_iters),
            tol_converge: self.tol,
            div_threshold: self.div_threshold,
        }
    }

    fn sweep_config(&self) -> Result<SweepConfig> {
        let lambdas = match (&self.lambdas, self.lambda) {
            (Some(v), _) => v.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => DEFAULT_LAMBDAS.to_vec(),
        };
        let formats = match &self.format {
            None => vec![OutputFormat::Csv, OutputFormat::Svg],
            Some(v) => v.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<Result<_>>()?,
        };
        Ok(SweepConfig {
            lambdas,
            n_max: self.n_max,
            nu_max: self.iters.unwrap_or(20),
            starts: self.starts(&[StartLabel::Max, StartLabel::Min])?,
            d0: self.d0,
            k0: self.k0,
            include_j2_zero: self.j2_zero,
            pad_policy: self.pad_policy.parse()?,
            tol_converge: self.tol,
            div_threshold: self.div_threshold,
            out_dir: Some(self.out.clone()),
            formats,
            seed: self.seed,
        })
    }
}

fn strict_failure(strict: bool, lambda: f64, status: IterationStatus) -> bool {
    strict && lambda <= STRICT_LAMBDA_CAP && status.is_failure()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.10e}"))
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    match &cli.command {
        Command::Iterate => {
            let lambda = cli.lambda()?;
            let setup = cli.setup(lambda)?;
            let settings = cli.settings(20);
            let mut code = EXIT_OK;
            for label in cli.starts(&[StartLabel::Max])? {
                let trace = iterate_from(&setup, label, &settings)?;
                writeln!(out, "lambda={lambda} start={label} n_max={} pad={}", setup.n_max, setup.pad_policy.as_str()).map_err(w)?;
                writeln!(out, "nu  change            delta_3           delta_7           delta_{}", setup.n_max).map_err(w)?;
                for (nu, snap) in trace.snapshots.iter().enumerate() {
                    let change = if nu == 0 {
                        "-".to_string()
                    } else {
                        format!("{:.3e}", crate::dynamics::delta_change(&trace.snapshots[nu - 1].delta, &snap.delta, setup.n_max))
                    };
                    writeln!(
                        out,
                        "{nu:<3} {change:<17} {:<17} {:<17} {}",
                        fmt_opt(snap.delta.get(3)),
                        fmt_opt(snap.delta.get(7)),
                        fmt_opt(snap.delta.get(setup.n_max))
                    )
                    .map_err(w)?;
                }
                writeln!(out, "status: {}", trace.status).map_err(w)?;
                if strict_failure(cli.strict, lambda, trace.status) {
                    code = EXIT_DIVERGED;
                }
            }
            Ok(code)
        }
        Command::Sweep => {
            let cfg = cli.sweep_config()?;
            let result = run_sweep(&cfg)?;
            for t in &result.traces {
                writeln!(out, "lambda={} start={}: {}", t.lambda, t.start, t.status).map_err(w)?;
            }
            writeln!(out, "{} rows", result.rows.len()).map_err(w)?;
            for f in &result.files {
                writeln!(out, "wrote {}", f.display()).map_err(w)?;
            }
            let failing = result.unexpected_failures(STRICT_LAMBDA_CAP);
            if cli.strict && !failing.is_empty() {
                return Ok(EXIT_DIVERGED);
            }
            Ok(EXIT_OK)
        }
        Command::Envelopes => {
            let lambda = cli.lambda()?;
            let hi = build_h_max(lambda, cli.n_max, cli.d0)?;
            let lo = build_h_min(lambda, cli.n_max)?;
            let m = norm_weights(lambda, cli.n_max, cli.d0)?;
            writeln!(out, "n,delta_max,delta_min,M_n,h_max,h_min").map_err(w)?;
            for n in (1..=cli.n_max).step_by(2) {
                let (dx, dn) = if n == 1 {
                    (None, None)
                } else {
                    (Some(delta_max(n, lambda, cli.d0)?), Some(delta_min(n, lambda)?))
                };
                writeln!(
                    out,
                    "{n},{},{},{:.10e},{:.10e},{:.10e}",
                    fmt_opt(dx),
                    fmt_opt(dn),
                    m.get(n).unwrap_or(f64::NAN),
                    hi.get(n).map_or(f64::NAN, |v| v.to_f64()),
                    lo.get(n).map_or(f64::NAN, |v| v.to_f64())
                )
                .map_err(w)?;
            }
            Ok(EXIT_OK)
        }
        Command::CheckPhi => {
            let lambda = cli.lambda()?;
            let setup = cli.setup(lambda)?;
            let label = *cli.starts(&[StartLabel::H0])?.first().unwrap_or(&StartLabel::H0);
            let settings = cli.settings(0);
            let trace = iterate(setup.start(label)?, label, setup.pad(label)?, &setup.params, &settings, setup.n_max)?;
            let h = &trace.last().h;
            let report = check_phi_upto(h, cli.k0, cli.d0, setup.n_max)?;
            writeln!(out, "lambda={lambda} start={label} nu={} k0={}", trace.nu_stop(), cli.k0).map_err(w)?;
            writeln!(out, "n,delta,sign_ok,delta_positive,band_ok,bracket_ok,bound_ok").map_err(w)?;
            for l in &report.levels {
                writeln!(
                    out,
                    "{},{:.10e},{},{},{},{},{}",
                    l.n, l.delta, l.sign_ok, l.delta_positive, l.band_ok, l.bracket_ok, l.bound_ok
                )
                .map_err(w)?;
            }
            writeln!(out, "phi_member={} phi0_member={}", report.phi_member, report.phi0_member).map_err(w)?;
            Ok(EXIT_OK)
        }
        Command::Stability => {
            let grid = cli.lambdas.clone().unwrap_or_else(|| super::sweep::STUDY_LAMBDAS.to_vec());
            let template = cli.setup(grid.first().copied().unwrap_or(0.01))?;
            let table = check_stability(&grid, &template, &cli.settings(20), cli.k0)?;
            for row in &table.rows {
                let statuses: Vec<String> = row.statuses.iter().map(|(s, st)| format!("{s}: {st}")).collect();
                writeln!(out, "lambda={} stable={} [{}] failure={:?}", row.lambda, row.stable, statuses.join(", "), row.failure)
                    .map_err(w)?;
            }
            writeln!(out, "largest stable lambda: {}", table.largest_stable.map_or("none".into(), |l| l.to_string())).map_err(w)?;
            Ok(EXIT_OK)
        }
        Command::Contraction { rho, pairs } => {
            let grid = match (&cli.lambdas, cli.lambda) {
                (Some(v), _) => v.clone(),
                (None, Some(l)) => vec![l],
                (None, None) => verify::CONTRACTION_SCAN.to_vec(),
            };
            if !(*rho > 0.0) || *pairs == 0 {
                return Err(Error::Usage("--rho must be positive and --pairs at least 1".into()));
            }
            let table = contraction_table(&grid, cli.n_max, *rho, *pairs, cli.seed);
            writeln!(out, "lambda,max_q,mean_q").map_err(w)?;
            for r in &table {
                writeln!(out, "{},{:.6},{:.6}", r.lambda, r.max_q, r.mean_q).map_err(w)?;
            }
            match contraction_crossing(&table) {
                Some(l) => writeln!(out, "max_q reaches 1 near lambda = {l:.4}").map_err(w)?,
                None => writeln!(out, "max_q does not cross 1 on this grid").map_err(w)?,
            }
            Ok(EXIT_OK)
        }
        Command::SeriesOracle { order } => {
            let table = perturbative_series(cli.n_max, *order, cli.j2_zero)?;
            for n in (1..=cli.n_max).step_by(2) {
                let cs: Vec<String> = table.coefficients(n).unwrap_or(&[]).iter().map(|c| c.to_string()).collect();
                writeln!(out, "H^{}: {}", n + 1, cs.join(" ")).map_err(w)?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify => {
            std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
            let outcomes = verify::run_all(&cli.out);
            for o in &outcomes {
                writeln!(out, "{o}").map_err(w)?;
            }
            Ok(if outcomes.iter().all(|o| o.passed) { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
