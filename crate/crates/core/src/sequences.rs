//! Envelope sequences, the bracketing sequences `H_max` / `H_min`, the
//! fundamental sequence `H_0`, and the weighted sup-norm.
//!
//! A sequence stores `H^{n+1}` for odd `n = 1, 3, ..., N_work`; slot `k` holds
//! `n = 2k + 1`.

use crate::dynamics::{a_term_slice, b_term_slice, c_term_slice};
use crate::error::{Error, Result};
use crate::logval::{LogValue, Sign};

/// Default `d0` of the upper envelope.
pub const DEFAULT_D0: f64 = 0.001;

#[inline]
pub(crate) fn index_of(n: usize) -> usize {
    (n - 1) / 2
}

#[inline]
pub(crate) fn n_of(index: usize) -> usize {
    2 * index + 1
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "coupling must be a positive finite real, got {lambda}"
        )));
    }
    Ok(())
}

pub(crate) fn check_odd_at_least(n: usize, min: usize) -> Result<()> {
    if n.is_multiple_of(2) || n < min {
        return Err(Error::Domain(format!("expected odd n >= {min}, got {n}")));
    }
    Ok(())
}

/// Knobs shared by every builder and by the mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Saturation constant of the upper envelope.
    pub d0: f64,
    /// Whether the pair `(n, 0)` takes part in the B-term.
    pub include_j2_zero: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            d0: DEFAULT_D0,
            include_j2_zero: false,
        }
    }
}

/// Green's functions `H^{n+1}(lambda)` on the odd grid `1..=N_work`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenSequence {
    lambda: f64,
    values: Vec<LogValue>,
}

impl GreenSequence {
    pub fn new(lambda: f64, values: Vec<LogValue>) -> Result<Self> {
        check_lambda(lambda)?;
        if values.is_empty() {
            return Err(Error::Usage("a Green sequence needs at least H^2".into()));
        }
        Ok(GreenSequence { lambda, values })
    }

    pub fn from_f64(lambda: f64, values: &[f64]) -> Result<Self> {
        Self::new(lambda, values.iter().map(|&x| LogValue::from_f64(x)).collect())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Highest stored odd `n`.
    pub fn n_work(&self) -> usize {
        n_of(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `H^{n+1}`, or `None` off the grid.
    pub fn get(&self, n: usize) -> Option<LogValue> {
        if n.is_multiple_of(2) {
            return None;
        }
        self.values.get(index_of(n)).copied()
    }

    pub fn values(&self) -> &[LogValue] {
        &self.values
    }

    /// `(n, H^{n+1})` pairs in increasing `n`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, LogValue)> + '_ {
        self.values.iter().enumerate().map(|(k, v)| (n_of(k), *v))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(LogValue::to_f64).collect()
    }

    /// Keeps entries with `n <= n_top`.
    pub fn truncated(&self, n_top: usize) -> GreenSequence {
        let len = (index_of(n_top.max(1)) + 1).min(self.values.len());
        GreenSequence {
            lambda: self.lambda,
            values: self.values[..len].to_vec(),
        }
    }

    pub fn scaled(&self, c: f64) -> GreenSequence {
        let f = LogValue::from_f64(c);
        GreenSequence {
            lambda: self.lambda,
            values: self.values.iter().map(|v| *v * f).collect(),
        }
    }

    pub fn map_values(&self, f: impl FnMut(usize, LogValue) -> LogValue) -> GreenSequence {
        let mut f = f;
        GreenSequence {
            lambda: self.lambda,
            values: self.iter().map(|(n, v)| f(n, v)).collect(),
        }
    }

    /// All entries have finite magnitude.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(LogValue::is_finite)
    }

    /// `sign(H^{n+1}) = (-1)^((n-1)/2)` for every stored `n`.
    pub fn is_sign_alternating(&self) -> bool {
        self.iter()
            .all(|(n, v)| v.sign() == expected_sign(n))
    }
}

/// Sign pattern of the physical solution: `+, -, +, ...` on `n = 1, 3, 5, ...`.
pub fn expected_sign(n: usize) -> Sign {
    Sign::alternating(index_of(n))
}

/// Splitting values `delta_n(lambda)`. `delta_1` has free sign and is kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSequence {
    pub lambda: f64,
    pub delta_1: f64,
    /// `delta_n` for `n = 3, 5, ...`
    pub values: Vec<f64>,
}

impl DeltaSequence {
    pub fn get(&self, n: usize) -> Option<f64> {
        match n {
            1 => Some(self.delta_1),
            n if n % 2 == 1 => self.values.get((n - 3) / 2).copied(),
            _ => None,
        }
    }

    pub fn n_top(&self) -> usize {
        if self.values.is_empty() {
            1
        } else {
            2 * self.values.len() + 1
        }
    }

    /// `(n, delta_n)` for `n >= 3`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &d)| (2 * k + 3, d))
    }
}

/// Upper envelope: `6 lambda` at `n = 3`, `3 lambda n(n-1) / (1 + 3 lambda n(n-1) d0)` above.
pub fn delta_max(n: usize, lambda: f64, d0: f64) -> Result<f64> {
    check_odd_at_least(n, 3)?;
    check_lambda(lambda)?;
    if n == 3 {
        return Ok(6.0 * lambda);
    }
    let x = 3.0 * lambda * (n * (n - 1)) as f64;
    Ok(x / (1.0 + x * d0))
}

/// Lower envelope: `6 lambda / (1 + 9 lambda (1 + 6 lambda^2))` at `n = 3`,
/// `3 lambda n(n-1) / (1 + 3 lambda n(n-1))` above.
pub fn delta_min(n: usize, lambda: f64) -> Result<f64> {
    check_odd_at_least(n, 3)?;
    check_lambda(lambda)?;
    if n == 3 {
        return Ok(6.0 * lambda / (1.0 + 9.0 * lambda * (1.0 + 6.0 * lambda * lambda)));
    }
    let x = 3.0 * lambda * (n * (n - 1)) as f64;
    Ok(x / (1.0 + x))
}

/// `ln(3 lambda n (n-1))`
#[inline]
pub(crate) fn ln_splitting_scale(n: usize, lambda: f64) -> f64 {
    (3.0 * lambda * (n * (n - 1)) as f64).ln()
}

fn build_enveloped(
    lambda: f64,
    n_work: usize,
    h2: f64,
    delta_3: f64,
    delta_n: impl Fn(usize) -> Result<f64>,
) -> Result<GreenSequence> {
    check_lambda(lambda)?;
    check_odd_at_least(n_work, 3)?;
    let len = index_of(n_work) + 1;
    let mut values = Vec::with_capacity(len);
    let h2 = LogValue::from_f64(h2);
    values.push(h2);
    values.push(-(h2.powi(3).scale(delta_3)));
    for k in 2..len {
        let n = n_of(k);
        let c = c_term_slice(&values, lambda, n);
        let ln_factor = delta_n(n)?.ln() - ln_splitting_scale(n, lambda);
        values.push(c.scale_ln(ln_factor));
    }
    GreenSequence::new(lambda, values)
}

/// The maximal sequence: `H^2 = (1 + 6 lambda^2)^2`, `H^4 = -6 lambda (H^2)^3`,
/// `H^{n+1} = delta_{n,max} C^{n+1} / (3 lambda n(n-1))`.
pub fn build_h_max(lambda: f64, n_work: usize, d0: f64) -> Result<GreenSequence> {
    check_lambda(lambda)?;
    let m1 = (1.0 + 6.0 * lambda * lambda).powi(2);
    build_enveloped(lambda, n_work, m1, 6.0 * lambda, |n| delta_max(n, lambda, d0))
}

/// The minimal sequence: `H^2 = 1`, `H^4 = -delta_{3,min} (H^2)^3`,
/// `H^{n+1} = delta_{n,min} C^{n+1} / (3 lambda n(n-1))`.
pub fn build_h_min(lambda: f64, n_work: usize) -> Result<GreenSequence> {
    check_lambda(lambda)?;
    build_enveloped(lambda, n_work, 1.0, delta_min(3, lambda)?, |n| delta_min(n, lambda))
}

/// The fundamental sequence `H_0`.
///
/// `H^2_0 = 1 - lambda H^4_min`,
/// `delta_{3,0} = 6 lambda / (1 + (|B^4_min| - |A^4_min|) / |H^4_min|)`, and for
/// `n >= 5` `delta_{n,0} = 3 lambda n(n-1) / (1 + D_n)` with
/// `D_n = (|B^{n+1}_min| - |A^{n+1}_min|) / |H^{n+1}_max|`. With the default
/// B-term (no `(n, 0)` pair) the `n = 3` denominator is
/// `1 + 9 lambda - lambda |H^6_min| / |H^4_min|`.
pub fn build_h0(lambda: f64, n_work: usize, params: &ModelParams) -> Result<GreenSequence> {
    check_lambda(lambda)?;
    check_odd_at_least(n_work, 3)?;
    let h_min = build_h_min(lambda, n_work + 2)?;
    let h_max = build_h_max(lambda, n_work, params.d0)?;
    let min = h_min.values();
    let len = index_of(n_work) + 1;
    let mut values = Vec::with_capacity(len);

    values.push(LogValue::ONE.sub(&min[1].scale(lambda)));

    let b4 = b_term_slice(min, None, lambda, 3, params.include_j2_zero)?;
    let a4 = a_term_slice(min, None, lambda, 3)?;
    let d3 = ratio_difference(&b4, &a4, &min[1]);
    let denom = 1.0 + d3;
    if !(denom > 0.0) {
        return Err(Error::Singular {
            lambda,
            n: 3,
            what: "delta_3,0 denominator is not positive",
        });
    }
    let delta_30 = 6.0 * lambda / denom;
    let h4 = -(values[0].powi(3).scale(delta_30));
    values.push(h4);

    for k in 2..len {
        let n = n_of(k);
        let b = b_term_slice(min, None, lambda, n, params.include_j2_zero)?;
        let a = a_term_slice(min, None, lambda, n)?;
        let d = ratio_difference(&b, &a, &h_max.values()[k]);
        let one_plus_d = 1.0 + d;
        if one_plus_d == 0.0 || !one_plus_d.is_finite() {
            return Err(Error::Singular {
                lambda,
                n,
                what: "1 + D_n(H_min) vanishes",
            });
        }
        let c = c_term_slice(&values, lambda, n);
        values.push(c.checked_div(&LogValue::from_f64(one_plus_d)).ok_or(
            Error::Singular {
                lambda,
                n,
                what: "1 + D_n(H_min) vanishes",
            },
        )?);
    }
    GreenSequence::new(lambda, values)
}

/// `(|b| - |a|) / |h|` evaluated through log-domain ratios.
pub(crate) fn ratio_difference(b: &LogValue, a: &LogValue, h: &LogValue) -> f64 {
    let part = |x: &LogValue| {
        if x.is_zero() {
            0.0
        } else {
            (x.ln_abs() - h.ln_abs()).exp()
        }
    };
    if h.is_zero() {
        return f64::NAN;
    }
    part(b) - part(a)
}

/// Weights `M_n` of the norm, stored as `ln M_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormWeights {
    pub lambda: f64,
    ln_m: Vec<f64>,
}

impl NormWeights {
    pub fn ln_get(&self, n: usize) -> Option<f64> {
        if n.is_multiple_of(2) {
            return None;
        }
        self.ln_m.get(index_of(n)).copied()
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.ln_get(n).map(f64::exp)
    }

    pub fn len(&self) -> usize {
        self.ln_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_m.is_empty()
    }

    pub fn n_work(&self) -> usize {
        n_of(self.ln_m.len() - 1)
    }
}

/// `M_1 = (1 + 6 lambda^2)^2`, `M_3 = delta_{3,max} M_1^3`,
/// `M_n = n(n-1) delta_{n,max} M_{n-2} M_1^2`.
pub fn norm_weights(lambda: f64, n_work: usize, d0: f64) -> Result<NormWeights> {
    check_lambda(lambda)?;
    check_odd_at_least(n_work, 1)?;
    let len = index_of(n_work) + 1;
    let ln_m1 = 2.0 * (1.0 + 6.0 * lambda * lambda).ln();
    let mut ln_m = Vec::with_capacity(len);
    ln_m.push(ln_m1);
    if len > 1 {
        ln_m.push(delta_max(3, lambda, d0)?.ln() + 3.0 * ln_m1);
    }
    for k in 2..len {
        let n = n_of(k);
        let prev = ln_m[k - 1];
        ln_m.push(((n * (n - 1)) as f64).ln() + delta_max(n, lambda, d0)?.ln() + prev + 2.0 * ln_m1);
    }
    Ok(NormWeights { lambda, ln_m })
}

fn check_grid(h: &GreenSequence, weights: &NormWeights) -> Result<()> {
    if h.len() != weights.len() || h.lambda() != weights.lambda {
        return Err(Error::Usage(format!(
            "grid mismatch: sequence (lambda = {}, N = {}) vs weights (lambda = {}, N = {})",
            h.lambda(),
            h.n_work(),
            weights.lambda,
            weights.n_work()
        )));
    }
    Ok(())
}

fn sup_ratio(values: impl Iterator<Item = LogValue>, weights: &NormWeights) -> f64 {
    values
        .zip(weights.ln_m.iter())
        .filter(|(v, _)| !v.is_zero())
        .map(|(v, ln_m)| v.ln_abs() - ln_m)
        .fold(f64::NEG_INFINITY, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
        .exp()
}

/// `max_n |H^{n+1}| / M_n` over the stored grid (the caller maximizes over lambda).
pub fn seq_norm(h: &GreenSequence, weights: &NormWeights) -> Result<f64> {
    check_grid(h, weights)?;
    Ok(sup_ratio(h.values().iter().copied(), weights))
}

/// Norm of the entrywise difference `H - G`.
pub fn seq_distance(h: &GreenSequence, g: &GreenSequence, weights: &NormWeights) -> Result<f64> {
    check_grid(h, weights)?;
    check_grid(g, weights)?;
    Ok(sup_ratio(
        h.values().iter().zip(g.values()).map(|(a, b)| a.sub(b)),
        weights,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn delta_max_examples() {
        assert!(rel(delta_max(3, 0.01, DEFAULT_D0).unwrap(), 0.06) < 1e-15);
        assert!(rel(delta_max(5, 0.01, DEFAULT_D0).unwrap(), 0.6 / 1.0006) < 1e-15);
        assert!(delta_max(5, 1e-300, DEFAULT_D0).unwrap() < 1e-297);
        assert!(matches!(delta_max(5, 0.0, DEFAULT_D0), Err(Error::Domain(_))));
        assert!(matches!(delta_max(4, 0.1, DEFAULT_D0), Err(Error::Domain(_))));
    }

    #[test]
    fn delta_min_examples() {
        assert!(rel(delta_min(3, 0.01).unwrap(), 0.06 / 1.090054) < 1e-15);
        assert!(rel(delta_min(5, 0.01).unwrap(), 0.375) < 1e-15);
        assert!(delta_min(25, 1e-300).unwrap() < 1e-296);
        assert!(matches!(delta_min(7, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn envelope_ordering_on_log_grid() {
        for i in 0..=60 {
            let lambda = 10f64.powf(-6.0 + 6.0 * i as f64 / 60.0);
            for n in (3..=201).step_by(2) {
                let hi = delta_max(n, lambda, DEFAULT_D0).unwrap();
                let lo = delta_min(n, lambda).unwrap();
                assert!(hi > lo, "n={n} lambda={lambda}");
            }
        }
    }

    #[test]
    fn small_coupling_limits_of_envelopes() {
        let lambda = 1e-11;
        for n in (3..=201).step_by(2) {
            let target = if n == 3 { 6.0 } else { 3.0 * (n * (n - 1)) as f64 };
            assert!(rel(delta_max(n, lambda, DEFAULT_D0).unwrap() / lambda, target) < 1e-4);
            assert!(rel(delta_min(n, lambda).unwrap() / lambda, target) < 1e-4);
        }
    }

    #[test]
    fn h_max_closed_forms() {
        let h = build_h_max(0.1, 9, DEFAULT_D0).unwrap();
        assert!(rel(h.get(1).unwrap().to_f64(), 1.1236) < 1e-14);
        assert!(rel(h.get(3).unwrap().to_f64(), -0.6 * 1.1236f64.powi(3)) < 1e-14);
        assert!(rel(h.get(3).unwrap().to_f64(), -0.851_111_467_353_6) < 1e-9);
        let tiny = build_h_max(1e-12, 7, DEFAULT_D0).unwrap();
        assert!((tiny.get(1).unwrap().to_f64() - 1.0).abs() < 1e-15);
        assert!(tiny.get(3).unwrap().to_f64().abs() < 1e-10);
    }

    #[test]
    fn h_min_closed_forms() {
        for lambda in [1e-4, 0.01, 0.3] {
            assert_eq!(build_h_min(lambda, 7).unwrap().get(1).unwrap().to_f64(), 1.0);
        }
        let h = build_h_min(0.01, 9).unwrap();
        assert!(rel(h.get(3).unwrap().to_f64(), -delta_min(3, 0.01).unwrap()) < 1e-15);
        assert!(rel(h.get(3).unwrap().to_f64(), -0.0550432) < 1e-5);
        let tiny = build_h_min(1e-12, 9).unwrap();
        assert!(tiny.iter().skip(1).all(|(_, v)| v.to_f64().abs() < 1e-10));
    }

    #[test]
    fn h_min_n5_by_hand() {
        // H^6_min = delta_{5,min} * (-6 lambda * 10 * H^4 (H^2)^2) / (60 lambda)
        let lambda = 0.01;
        let h = build_h_min(lambda, 5).unwrap();
        let h4 = -delta_min(3, lambda).unwrap();
        let c6 = -6.0 * lambda * 10.0 * h4;
        let expected = delta_min(5, lambda).unwrap() * c6 / (60.0 * lambda);
        assert!(rel(h.get(5).unwrap().to_f64(), expected) < 1e-14);
    }

    #[test]
    fn h0_low_entries() {
        let lambda = 0.01;
        let h0 = build_h0(lambda, 9, &ModelParams::default()).unwrap();
        let h2 = 1.0 + lambda * delta_min(3, lambda).unwrap();
        assert!(rel(h0.get(1).unwrap().to_f64(), h2) < 1e-14);
        assert!(rel(h0.get(1).unwrap().to_f64(), 1.000550) < 1e-6);
        // literal delta_{3,0} closed form
        let min = build_h_min(lambda, 11).unwrap();
        let ratio = min.get(5).unwrap().to_f64().abs() / min.get(3).unwrap().to_f64().abs();
        let delta_30 = 6.0 * lambda / (1.0 + 9.0 * lambda - lambda * ratio);
        assert!(rel(h0.get(3).unwrap().to_f64(), -delta_30 * h2.powi(3)) < 1e-13);
        let tiny = build_h0(1e-12, 9, &ModelParams::default()).unwrap();
        assert!((tiny.get(1).unwrap().to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sign_alternation_of_built_sequences() {
        for lambda in [0.0005, 0.001, 0.01, 0.03, 0.05, 0.075, 0.1] {
            let params = ModelParams::default();
            assert!(build_h_max(lambda, 25, params.d0).unwrap().is_sign_alternating());
            assert!(build_h_min(lambda, 25).unwrap().is_sign_alternating());
            let h0 = build_h0(lambda, 25, &params).unwrap();
            assert!(h0.is_sign_alternating(), "lambda = {lambda}");
            assert_eq!(h0.get(5).unwrap().sign(), Sign::Positive);
        }
    }

    #[test]
    fn h0_is_bracketed() {
        for lambda in [0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05] {
            let params = ModelParams::default();
            let hi = build_h_max(lambda, 25, params.d0).unwrap();
            let lo = build_h_min(lambda, 25).unwrap();
            let h0 = build_h0(lambda, 25, &params).unwrap();
            for n in (1..=25).step_by(2) {
                let v = h0.get(n).unwrap().ln_abs();
                assert!(lo.get(n).unwrap().ln_abs() <= v + 1e-12, "lambda={lambda} n={n}");
                assert!(v <= hi.get(n).unwrap().ln_abs() + 1e-12, "lambda={lambda} n={n}");
            }
        }
    }

    #[test]
    fn norm_weight_identities() {
        for lambda in [1e-9, 0.01, 0.1] {
            let w = norm_weights(lambda, 9, DEFAULT_D0).unwrap();
            let h = build_h_max(lambda, 9, DEFAULT_D0).unwrap();
            assert!(rel(w.get(1).unwrap(), h.get(1).unwrap().to_f64()) < 1e-14);
            assert!(rel(w.get(3).unwrap(), h.get(3).unwrap().to_f64().abs()) < 1e-14);
        }
        assert!((norm_weights(1e-12, 3, DEFAULT_D0).unwrap().get(1).unwrap() - 1.0).abs() < 1e-15);
        let w = norm_weights(0.1, 3, DEFAULT_D0).unwrap();
        assert!(rel(w.get(3).unwrap(), 0.851_111_467_353_6) < 1e-9);
        let lambda = 0.01;
        let w = norm_weights(lambda, 5, DEFAULT_D0).unwrap();
        let m1 = (1.0 + 6.0 * lambda * lambda).powi(2);
        let m3 = 6.0 * lambda * m1.powi(3);
        let m5 = 20.0 * delta_max(5, lambda, DEFAULT_D0).unwrap() * m3 * m1 * m1;
        assert!(rel(w.get(5).unwrap(), m5) < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let lambda = 0.1;
        let w = norm_weights(lambda, 3, DEFAULT_D0).unwrap();
        let h = build_h_max(lambda, 3, DEFAULT_D0).unwrap();
        assert!((seq_norm(&h, &w).unwrap() - 1.0).abs() < 1e-14);
        let zero = GreenSequence::new(lambda, vec![LogValue::ZERO; 2]).unwrap();
        assert_eq!(seq_norm(&zero, &w).unwrap(), 0.0);
        let scaled = h.scaled(-3.5);
        assert!((seq_norm(&scaled, &w).unwrap() - 3.5).abs() < 1e-13);
    }

    #[test]
    fn distance_examples() {
        let lambda = 0.01;
        let w = norm_weights(lambda, 11, DEFAULT_D0).unwrap();
        let hi = build_h_max(lambda, 11, DEFAULT_D0).unwrap();
        let lo = build_h_min(lambda, 11).unwrap();
        assert_eq!(seq_distance(&hi, &hi, &w).unwrap(), 0.0);
        let d1 = seq_distance(&hi, &lo, &w).unwrap();
        let d2 = seq_distance(&lo, &hi, &w).unwrap();
        assert!(d1 > 0.0);
        assert!((d1 - d2).abs() <= 1e-15 * d1);
    }

    #[test]
    fn grid_mismatch_is_usage_error() {
        let w = norm_weights(0.01, 7, DEFAULT_D0).unwrap();
        let h = build_h_min(0.01, 9).unwrap();
        assert!(matches!(seq_norm(&h, &w), Err(Error::Usage(_))));
        let other = build_h_min(0.02, 7).unwrap();
        assert!(matches!(seq_norm(&other, &w), Err(Error::Usage(_))));
    }
}
