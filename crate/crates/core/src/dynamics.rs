//! Equation-of-motion terms, the mapping `M*`, and the fixed-point iteration.
//!
//! For odd `n >= 3` the equations read `H^{n+1} = A^{n+1} + B^{n+1} + C^{n+1}`
//! with
//!
//! * `A^{n+1} = -lambda H^{n+3}`
//! * `B^{n+1} = -3 lambda sum_{(j1, j2)} n!/(j1! j2!) H^{j2+2} H^{j1+1}`
//! * `C^{n+1} = -6 lambda sum_{(i1, i2, i3)} n!/(i1! i2! i3! sigma) H^{i1+1} H^{i2+1} H^{i3+1}`
//!
//! and `H^2 = 1 - lambda H^4`. `M*` rewrites every level as
//! `H'^{n+1} = C^{n+1}(H') / (1 + D_n(H))` with
//! `D_n(H) = (|B^{n+1}| - |A^{n+1}|) / |H^{n+1}|`, building the primed sequence
//! bottom-up so each C-term sees only entries that are already primed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{for_each_triple, ln_factorial, symmetry_factor};
use crate::error::{Error, Result};
use crate::logval::{LogValue, SignedLogSum};
use crate::sequences::{
    build_h0, build_h_max, build_h_min, check_lambda, check_odd_at_least, index_of,
    ln_splitting_scale, n_of, norm_weights, ratio_difference, seq_distance, seq_norm,
    DeltaSequence, GreenSequence, ModelParams, NormWeights,
};

#[inline]
fn lookup(values: &[LogValue], pad: Option<LogValue>, n: usize) -> Result<LogValue> {
    let k = index_of(n);
    match values.get(k) {
        Some(v) => Ok(*v),
        None if k == values.len() && pad.is_some() => Ok(pad.unwrap_or(LogValue::ZERO)),
        None => Err(Error::PaddingRequired {
            n,
            n_work: n_of(values.len().saturating_sub(1)),
        }),
    }
}

pub(crate) fn a_term_slice(
    values: &[LogValue],
    pad: Option<LogValue>,
    lambda: f64,
    n: usize,
) -> Result<LogValue> {
    Ok(-lookup(values, pad, n + 2)?.scale(lambda))
}

pub(crate) fn b_term_slice(
    values: &[LogValue],
    pad: Option<LogValue>,
    lambda: f64,
    n: usize,
    include_j2_zero: bool,
) -> Result<LogValue> {
    let top = if include_j2_zero { n } else { n - 2 };
    let ln_nf = ln_factorial(n);
    let mut acc = SignedLogSum::new();
    for j1 in (1..=top).step_by(2) {
        let j2 = n - j1;
        let upper = lookup(values, pad, j2 + 1)?;
        let lower = lookup(values, pad, j1)?;
        let ln = ln_nf - ln_factorial(j1) - ln_factorial(j2) + upper.ln_abs() + lower.ln_abs();
        acc.push_parts(upper.sign() * lower.sign(), ln);
    }
    Ok(-acc.total().scale(3.0 * lambda))
}

/// Needs entries up to `n - 2`; panics otherwise.
pub(crate) fn c_term_slice(values: &[LogValue], lambda: f64, n: usize) -> LogValue {
    let ln_nf = ln_factorial(n);
    let mut acc = SignedLogSum::new();
    for_each_triple(n, |t| {
        let a = values[index_of(t.i1)];
        let b = values[index_of(t.i2)];
        let c = values[index_of(t.i3)];
        let ln = ln_nf - ln_factorial(t.i1) - ln_factorial(t.i2) - ln_factorial(t.i3)
            - f64::from(symmetry_factor(&t)).ln()
            + a.ln_abs()
            + b.ln_abs()
            + c.ln_abs();
        acc.push_parts(a.sign() * b.sign() * c.sign(), ln);
    });
    -acc.total().scale(6.0 * lambda)
}

/// `A^{n+1} = -lambda H^{n+3}`. Fails with [`Error::PaddingRequired`] at the top of the grid.
pub fn term_a(h: &GreenSequence, n: usize) -> Result<LogValue> {
    check_odd_at_least(n, 3)?;
    a_term_slice(h.values(), None, h.lambda(), n)
}

/// [`term_a`] with `pad` standing in for the entry just above the grid.
pub fn term_a_padded(h: &GreenSequence, pad: LogValue, n: usize) -> Result<LogValue> {
    check_odd_at_least(n, 3)?;
    a_term_slice(h.values(), Some(pad), h.lambda(), n)
}

pub fn term_b(h: &GreenSequence, n: usize, include_j2_zero: bool) -> Result<LogValue> {
    check_odd_at_least(n, 3)?;
    b_term_slice(h.values(), None, h.lambda(), n, include_j2_zero)
}

pub fn term_c(h: &GreenSequence, n: usize) -> Result<LogValue> {
    check_odd_at_least(n, 3)?;
    if index_of(n - 2) >= h.len() {
        return Err(Error::PaddingRequired {
            n: n - 2,
            n_work: h.n_work(),
        });
    }
    Ok(c_term_slice(h.values(), h.lambda(), n))
}

/// Floor guarding the residual denominator.
pub const RESIDUAL_FLOOR: f64 = 1e-300;

/// Relative residual of the equation of motion at level `n`.
///
/// `n = 1` checks `H^2 = 1 - lambda H^4`; `n >= 3` checks
/// `H^{n+1} = A + B + C`. `pad` supplies `H^{N_work+3}` when `n = N_work`.
pub fn equation_residual(
    h: &GreenSequence,
    n: usize,
    pad: Option<LogValue>,
    params: &ModelParams,
) -> Result<f64> {
    check_odd_at_least(n, 1)?;
    let lambda = h.lambda();
    let values = h.values();
    let lhs = lookup(values, None, n)?;
    let rhs = if n == 1 {
        LogValue::ONE.sub(&lookup(values, pad, 3)?.scale(lambda))
    } else {
        let mut acc = SignedLogSum::new();
        acc.push(a_term_slice(values, pad, lambda, n)?);
        acc.push(b_term_slice(values, pad, lambda, n, params.include_j2_zero)?);
        acc.push(c_term_slice(values, lambda, n));
        acc.total()
    };
    let diff = lhs.sub(&rhs).to_f64().abs();
    let scale = lhs.to_f64().abs().max(rhs.to_f64().abs()).max(RESIDUAL_FLOOR);
    Ok(diff / scale)
}

/// Per-level intermediates of one `M*` application (levels `n >= 3`).
#[derive(Debug, Clone, PartialEq)]
pub struct MapLevel {
    pub n: usize,
    /// `A^{n+1}(H)` of the input.
    pub a: LogValue,
    /// `B^{n+1}(H)` of the input.
    pub b: LogValue,
    /// `C^{n+1}(H')` on the primed entries.
    pub c: LogValue,
    pub d: f64,
    pub delta_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapDiagnostics {
    pub delta_1_prime: f64,
    pub levels: Vec<MapLevel>,
}

/// One application of `M*`. The output has the same grid as `h`; `pad`
/// stands in for `H^{N_work+3}` in the top A-term.
pub fn map_star(
    h: &GreenSequence,
    pad: LogValue,
    params: &ModelParams,
) -> Result<(GreenSequence, MapDiagnostics)> {
    let lambda = h.lambda();
    let input = h.values();
    if input.len() < 2 {
        return Err(Error::Usage("M* needs at least H^2 and H^4".into()));
    }
    let pad = Some(pad);
    let mut out: Vec<LogValue> = Vec::with_capacity(input.len());
    let mut levels = Vec::with_capacity(input.len() - 1);

    let delta_1 = -input[1].to_f64();
    out.push(LogValue::ONE.add(&(-input[1]).scale(lambda)));

    for (k, &h_n) in input.iter().enumerate().skip(1) {
        let n = n_of(k);
        if h_n.is_zero() {
            return Err(Error::Singular {
                lambda,
                n,
                what: "|H^{n+1}| vanishes in D_n",
            });
        }
        let a = a_term_slice(input, pad, lambda, n)?;
        let b = b_term_slice(input, pad, lambda, n, params.include_j2_zero)?;
        let d = ratio_difference(&b, &a, &h_n);
        let one_plus_d = 1.0 + d;
        if one_plus_d == 0.0 {
            return Err(Error::Singular {
                lambda,
                n,
                what: "1 + D_n(H) vanishes",
            });
        }
        let c = c_term_slice(&out, lambda, n);
        let primed = c.checked_div(&LogValue::from_f64(one_plus_d)).unwrap_or(LogValue::ZERO);
        let delta_prime = if n == 3 {
            6.0 * lambda / one_plus_d
        } else {
            ln_splitting_scale(n, lambda).exp() / one_plus_d
        };
        out.push(primed);
        levels.push(MapLevel {
            n,
            a,
            b,
            c,
            d,
            delta_prime,
        });
    }
    Ok((
        GreenSequence::new(lambda, out)?,
        MapDiagnostics {
            delta_1_prime: delta_1,
            levels,
        },
    ))
}

/// Inverts the splitting:
/// `delta_1 = (H^2 - 1)/lambda`, `delta_3 = -H^4 / (H^2)^3`,
/// `delta_n = 3 lambda n(n-1) H^{n+1} / C^{n+1}(H)`.
pub fn extract_delta(h: &GreenSequence) -> Result<DeltaSequence> {
    extract_impl(h, true)
}

/// Like [`extract_delta`] but writes NaN where a denominator vanishes.
pub fn extract_delta_lossy(h: &GreenSequence) -> DeltaSequence {
    extract_impl(h, false).expect("lossy extraction does not fail")
}

fn extract_impl(h: &GreenSequence, strict: bool) -> Result<DeltaSequence> {
    let lambda = h.lambda();
    let values = h.values();
    let delta_1 = values[0].sub(&LogValue::ONE).to_f64() / lambda;
    let mut out = Vec::with_capacity(values.len().saturating_sub(1));
    for (k, &v) in values.iter().enumerate().skip(1) {
        let n = n_of(k);
        let (denominator, ln_scale) = if n == 3 {
            (-values[0].powi(3), 0.0)
        } else {
            (c_term_slice(values, lambda, n), ln_splitting_scale(n, lambda))
        };
        match v.checked_div(&denominator) {
            Some(r) => out.push(r.scale_ln(ln_scale).to_f64()),
            None if strict => {
                return Err(Error::Singular {
                    lambda,
                    n,
                    what: "splitting denominator vanishes",
                })
            }
            None => out.push(f64::NAN),
        }
    }
    Ok(DeltaSequence {
        lambda,
        delta_1,
        values: out,
    })
}

/// Where an iteration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StartLabel {
    Max,
    Min,
    H0,
    Custom,
}

impl StartLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StartLabel::Max => "max",
            StartLabel::Min => "min",
            StartLabel::H0 => "h0",
            StartLabel::Custom => "custom",
        }
    }
}

impl fmt::Display for StartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StartLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(StartLabel::Max),
            "min" => Ok(StartLabel::Min),
            "h0" => Ok(StartLabel::H0),
            "custom" => Ok(StartLabel::Custom),
            _ => Err(Error::Usage(format!(
                "unknown start '{s}' (expected max, min, h0)"
            ))),
        }
    }
}

/// Source of the single entry above the working grid that the top A-term reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadPolicy {
    /// `H_0` extension, whatever the start.
    Fundamental,
    /// Same-label envelope extension: `H_max` for the max start, `H_min` for the
    /// min start, `H_0` otherwise.
    Envelope,
    /// Zero.
    Zero,
}

impl PadPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            PadPolicy::Fundamental => "fundamental",
            PadPolicy::Envelope => "envelope",
            PadPolicy::Zero => "zero",
        }
    }
}

impl std::str::FromStr for PadPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fundamental" => Ok(PadPolicy::Fundamental),
            "envelope" => Ok(PadPolicy::Envelope),
            "zero" => Ok(PadPolicy::Zero),
            _ => Err(Error::Usage(format!(
                "unknown pad policy '{s}' (expected fundamental, envelope, zero)"
            ))),
        }
    }
}

/// Extra odd entries kept above `N_max` by default.
pub const DEFAULT_MARGIN: usize = 2;

/// Everything that fixes one `(lambda, grid)` cell of the study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub lambda: f64,
    /// Largest reported `n`.
    pub n_max: usize,
    /// Entries carried above `n_max` to absorb truncation effects.
    pub margin: usize,
    pub params: ModelParams,
    pub pad_policy: PadPolicy,
}

impl Setup {
    pub fn new(lambda: f64, n_max: usize) -> Self {
        Setup {
            lambda,
            n_max,
            margin: DEFAULT_MARGIN,
            params: ModelParams::default(),
            pad_policy: PadPolicy::Fundamental,
        }
    }

    pub fn n_work(&self) -> usize {
        self.n_max + 2 * self.margin
    }

    fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        check_odd_at_least(self.n_max, 3)
    }

    /// Start sequence for `label` on the working grid.
    pub fn start(&self, label: StartLabel) -> Result<GreenSequence> {
        self.validate()?;
        let n_work = self.n_work();
        match label {
            StartLabel::Max => build_h_max(self.lambda, n_work, self.params.d0),
            StartLabel::Min => build_h_min(self.lambda, n_work),
            StartLabel::H0 => build_h0(self.lambda, n_work, &self.params),
            StartLabel::Custom => Err(Error::Usage(
                "custom starts are supplied by the caller".into(),
            )),
        }
    }

    /// Value of `H^{N_work+3}` used by the top A-term.
    pub fn pad(&self, label: StartLabel) -> Result<LogValue> {
        self.validate()?;
        let top = self.n_work() + 2;
        let seq = match (self.pad_policy, label) {
            (PadPolicy::Zero, _) => return Ok(LogValue::ZERO),
            (PadPolicy::Envelope, StartLabel::Max) => build_h_max(self.lambda, top, self.params.d0)?,
            (PadPolicy::Envelope, StartLabel::Min) => build_h_min(self.lambda, top)?,
            _ => build_h0(self.lambda, top, &self.params)?,
        };
        Ok(seq.get(top).unwrap_or(LogValue::ZERO))
    }

    pub fn weights(&self) -> Result<NormWeights> {
        norm_weights(self.lambda, self.n_work(), self.params.d0)
    }
}

/// Stopping rules of [`iterate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateSettings {
    pub nu_max: usize,
    /// Converged once `max_n |delta^(nu) - delta^(nu-1)| / |delta^(nu-1)|` drops to this.
    pub tol_converge: f64,
    /// Diverged once some `|H^{n+1}| > div_threshold * M_n`.
    pub div_threshold: f64,
}

impl Default for IterateSettings {
    fn default() -> Self {
        IterateSettings {
            nu_max: 20,
            tol_converge: 1e-10,
            div_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationStatus {
    Converged { nu: usize },
    /// `nu_max` reached without meeting the tolerance.
    Running,
    Diverged { nu: usize },
    Singular { nu: usize, n: usize },
}

impl IterationStatus {
    pub fn label(&self) -> &'static str {
        match self {
            IterationStatus::Converged { .. } => "converged",
            IterationStatus::Running => "ok",
            IterationStatus::Diverged { .. } => "diverged",
            IterationStatus::Singular { .. } => "singular",
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, IterationStatus::Converged { .. })
    }

    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            IterationStatus::Diverged { .. } | IterationStatus::Singular { .. }
        )
    }
}

impl fmt::Display for IterationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterationStatus::Converged { nu } => write!(f, "converged at nu = {nu}"),
            IterationStatus::Running => write!(f, "not converged"),
            IterationStatus::Diverged { nu } => write!(f, "diverged at nu = {nu}"),
            IterationStatus::Singular { nu, n } => write!(f, "singular at nu = {nu}, n = {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub delta: DeltaSequence,
    pub h: GreenSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub lambda: f64,
    pub start: StartLabel,
    /// `snapshots[nu]` is the state after `nu` applications of `M*`.
    pub snapshots: Vec<Snapshot>,
    pub status: IterationStatus,
    /// Largest `n` the convergence metric looks at.
    pub n_check: usize,
}

impl IterationTrace {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trace holds at least its start")
    }

    /// Index of the last snapshot.
    pub fn nu_stop(&self) -> usize {
        self.snapshots.len() - 1
    }

    /// Snapshot at `nu`, or the last one if the run stopped earlier.
    pub fn at_or_last(&self, nu: usize) -> &Snapshot {
        &self.snapshots[nu.min(self.nu_stop())]
    }
}

/// `max_{1 <= n <= n_check} |new_n - old_n| / |old_n|`.
pub fn delta_change(old: &DeltaSequence, new: &DeltaSequence, n_check: usize) -> f64 {
    let mut worst = 0.0f64;
    for n in (1..=n_check).step_by(2) {
        let (Some(a), Some(b)) = (old.get(n), new.get(n)) else {
            continue;
        };
        let r = (b - a).abs() / a.abs();
        if r.is_nan() {
            return f64::NAN;
        }
        worst = worst.max(r);
    }
    worst
}

fn exceeds_threshold(h: &GreenSequence, weights: &NormWeights, ln_threshold: f64) -> bool {
    h.iter().any(|(n, v)| {
        !v.is_finite()
            || weights
                .ln_get(n)
                .is_some_and(|ln_m| !v.is_zero() && v.ln_abs() > ln_threshold + ln_m)
    })
}

/// Applies `M*` up to `settings.nu_max` times from `start`.
///
/// Stops early on convergence (measured on `delta_n` for `n <= n_check`),
/// divergence (a non-finite entry or `|H^{n+1}| > div_threshold * M_n`) or a
/// singular denominator.
pub fn iterate(
    start: GreenSequence,
    label: StartLabel,
    pad: LogValue,
    params: &ModelParams,
    settings: &IterateSettings,
    n_check: usize,
) -> Result<IterationTrace> {
    let lambda = start.lambda();
    let weights = norm_weights(lambda, start.n_work(), params.d0)?;
    let ln_threshold = settings.div_threshold.ln();
    let mut snapshots = vec![Snapshot {
        delta: extract_delta_lossy(&start),
        h: start,
    }];
    let mut status = IterationStatus::Running;
    for nu in 1..=settings.nu_max {
        let current = &snapshots[nu - 1];
        let next = match map_star(&current.h, pad, params) {
            Ok((h, _)) => h,
            Err(Error::Singular { n, .. }) => {
                status = IterationStatus::Singular { nu, n };
                break;
            }
            Err(e) => return Err(e),
        };
        let delta = extract_delta_lossy(&next);
        let diverged = exceeds_threshold(&next, &weights, ln_threshold);
        let change = delta_change(&current.delta, &delta, n_check);
        snapshots.push(Snapshot { delta, h: next });
        if diverged {
            status = IterationStatus::Diverged { nu };
            break;
        }
        if change <= settings.tol_converge {
            status = IterationStatus::Converged { nu };
            break;
        }
    }
    Ok(IterationTrace {
        lambda,
        start: label,
        snapshots,
        status,
        n_check,
    })
}

/// Builds the start and pad for `label` from `setup` and runs [`iterate`].
pub fn iterate_from(
    setup: &Setup,
    label: StartLabel,
    settings: &IterateSettings,
) -> Result<IterationTrace> {
    let start = setup.start(label)?;
    let pad = setup.pad(label)?;
    iterate(start, label, pad, &setup.params, settings, setup.n_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionStats {
    pub lambda: f64,
    pub rho: f64,
    pub max_q: f64,
    pub mean_q: f64,
    pub ratios: Vec<f64>,
}

/// Random point of the ball of radius `rho` around `center`, built from
/// uniform relative perturbations of every entry.
fn perturb(
    center: &GreenSequence,
    weights: &NormWeights,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GreenSequence> {
    let eps: Vec<f64> = (0..center.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let direction = center.map_values(|n, v| v.scale(eps[index_of(n)]));
    let size = seq_norm(&direction, weights)?;
    if size == 0.0 || !size.is_finite() {
        return Ok(center.clone());
    }
    let radius = rho * rng.gen_range(f64::EPSILON..=1.0);
    let s = radius / size;
    Ok(center.map_values(|n, v| v.scale(1.0 + s * eps[index_of(n)])))
}

/// Samples `num_pairs` pairs in the `rho`-ball around `H_0` and returns the
/// ratios `d(M* H_a, M* H_b) / d(H_a, H_b)`.
pub fn contraction_estimate(
    setup: &Setup,
    rho: f64,
    num_pairs: usize,
    seed: u64,
) -> Result<ContractionStats> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    let center = setup.start(StartLabel::H0)?;
    let pad = setup.pad(StartLabel::H0)?;
    let weights = setup.weights()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(num_pairs);
    let mut rejected = 0usize;
    while ratios.len() < num_pairs {
        let a = perturb(&center, &weights, rho, &mut rng)?;
        let b = perturb(&center, &weights, rho, &mut rng)?;
        let before = seq_distance(&a, &b, &weights)?;
        if before == 0.0 {
            rejected += 1;
            if rejected > 100 * num_pairs.max(1) {
                return Err(Error::Usage("could not draw distinct pairs".into()));
            }
            continue;
        }
        let (ma, _) = map_star(&a, pad, &setup.params)?;
        let (mb, _) = map_star(&b, pad, &setup.params)?;
        ratios.push(seq_distance(&ma, &mb, &weights)? / before);
    }
    let max_q = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_q = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok(ContractionStats {
        lambda: setup.lambda,
        rho,
        max_q,
        mean_q,
        ratios,
    })
}
