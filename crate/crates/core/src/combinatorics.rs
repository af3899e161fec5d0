//! Odd-part partitions of `n` and the factorial weights of the B and C terms.
//!
//! Pairs `(j1, j2)` have `j1` odd and `j1 + j2 = n`; triples
//! `(i1, i2, i3)` are non-increasing odd parts summing to `n`. Weights are
//! computed as logarithms so they stay finite for `n` in the thousands; an
//! exact `u128` path covers `n <= EXACT_MAX_N` for cross-checking.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::logval::{LogValue, Sign};

/// Largest `n` for which [`pair_coefficient_exact`] and
/// [`triple_coefficient_exact`] are evaluated (`34!` still fits in a `u128`).
pub const EXACT_MAX_N: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairPartition {
    pub j1: usize,
    pub j2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePartition {
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
}

impl TriplePartition {
    pub fn parts(&self) -> [usize; 3] {
        [self.i1, self.i2, self.i3]
    }
}

/// Strictly positive multinomial weight held as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCoefficient {
    pub ln: f64,
}

impl LogCoefficient {
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn as_log_value(&self) -> LogValue {
        LogValue::new(Sign::Positive, self.ln)
    }
}

fn check_odd(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "partitions are defined for odd n >= 3, got n = {n}"
        )));
    }
    Ok(())
}

/// Pairs `(j1, j2)` with `j1` odd, `j1 + j2 = n`, sorted by `j1`.
/// `(n, 0)` is included only when `include_j2_zero` is set.
pub fn pair_partitions(n: usize, include_j2_zero: bool) -> Result<Vec<PairPartition>> {
    check_odd(n)?;
    let top = if include_j2_zero { n } else { n - 2 };
    Ok((1..=top)
        .step_by(2)
        .map(|j1| PairPartition { j1, j2: n - j1 })
        .collect())
}

/// Non-increasing odd triples summing to `n`, in descending lexicographic
/// order: `n = 9` gives `(7,1,1), (5,3,1), (3,3,3)`.
pub fn triple_partitions(n: usize) -> Result<Vec<TriplePartition>> {
    check_odd(n)?;
    let mut out = Vec::new();
    for_each_triple(n, |t| out.push(t));
    Ok(out)
}

/// Allocation-free walk over the same triples as [`triple_partitions`].
/// Does nothing for invalid `n`.
#[inline]
pub fn for_each_triple(n: usize, mut f: impl FnMut(TriplePartition)) {
    if n < 3 || n.is_multiple_of(2) {
        return;
    }
    let mut i1 = n - 2;
    loop {
        // i2 ranges over odd values with i3 = n - i1 - i2 in [1, i2] and i2 <= i1
        let rest = n - i1;
        let i2_hi = i1.min(rest - 1);
        let i2_lo = rest.div_ceil(2);
        let mut i2 = if i2_hi % 2 == 1 { i2_hi } else { i2_hi - 1 };
        while i2 >= i2_lo && i2 >= 1 {
            let i3 = rest - i2;
            if i3 % 2 == 1 && i3 <= i2 {
                f(TriplePartition { i1, i2, i3 });
            }
            if i2 < 2 {
                break;
            }
            i2 -= 2;
        }
        if i1 * 3 <= n || i1 < 3 {
            break;
        }
        i1 -= 2;
    }
}

/// 6 when all parts agree, 1 when all differ, 2 otherwise.
pub fn symmetry_factor(t: &TriplePartition) -> u32 {
    let [a, b, c] = t.parts();
    if a == b && b == c {
        6
    } else if a != b && b != c && a != c {
        1
    } else {
        2
    }
}

const LN_FACTORIAL_TABLE: usize = 8192;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE);
        table.push(0.0);
        // Kahan-compensated running sum of ln k
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..LN_FACTORIAL_TABLE {
            let y = (k as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            table.push(sum);
        }
        table
    })
}

/// `ln(n!)`. Tabulated below 8192, Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        return table[n];
    }
    let x = (n + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// The full `ln k!` table, `k < 8192`, for hot loops.
pub fn ln_factorials() -> &'static [f64] {
    ln_factorial_table()
}

fn check_sum(n: usize, parts: &[usize]) -> Result<()> {
    if parts.iter().sum::<usize>() != n {
        return Err(Error::Domain(format!(
            "parts {parts:?} do not sum to n = {n}"
        )));
    }
    Ok(())
}

/// `ln( n! / (j1! j2!) )`
pub fn pair_coefficient(n: usize, p: &PairPartition) -> Result<LogCoefficient> {
    check_sum(n, &[p.j1, p.j2])?;
    Ok(LogCoefficient {
        ln: ln_factorial(n) - ln_factorial(p.j1) - ln_factorial(p.j2),
    })
}

/// `ln( n! / (i1! i2! i3! sigma) )`
pub fn triple_coefficient(n: usize, t: &TriplePartition) -> Result<LogCoefficient> {
    check_sum(n, &t.parts())?;
    Ok(LogCoefficient {
        ln: ln_factorial(n)
            - ln_factorial(t.i1)
            - ln_factorial(t.i2)
            - ln_factorial(t.i3)
            - f64::from(symmetry_factor(t)).ln(),
    })
}

/// `n!` exactly, for `n <= EXACT_MAX_N`.
pub fn factorial_exact(n: usize) -> Option<u128> {
    if n > EXACT_MAX_N + 1 {
        return None;
    }
    Some((1..=n as u128).product())
}

pub fn pair_coefficient_exact(n: usize, p: &PairPartition) -> Option<u128> {
    if n > EXACT_MAX_N || p.j1 + p.j2 != n {
        return None;
    }
    Some(factorial_exact(n)? / (factorial_exact(p.j1)? * factorial_exact(p.j2)?))
}

pub fn triple_coefficient_exact(n: usize, t: &TriplePartition) -> Option<u128> {
    if n > EXACT_MAX_N || t.i1 + t.i2 + t.i3 != n {
        return None;
    }
    let denom = factorial_exact(t.i1)? * factorial_exact(t.i2)? * factorial_exact(t.i3)?;
    let multinomial = factorial_exact(n)? / denom;
    let sigma = u128::from(symmetry_factor(t));
    debug_assert_eq!(multinomial % sigma, 0);
    Some(multinomial / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(j1: usize, j2: usize) -> PairPartition {
        PairPartition { j1, j2 }
    }

    fn tp(i1: usize, i2: usize, i3: usize) -> TriplePartition {
        TriplePartition { i1, i2, i3 }
    }

    /// Every non-increasing odd triple by exhaustive search.
    fn brute_triples(n: usize) -> Vec<TriplePartition> {
        let mut out = Vec::new();
        for a in (1..=n).rev().filter(|a| a % 2 == 1) {
            for b in (1..=a).rev().filter(|b| b % 2 == 1) {
                for c in (1..=b).rev().filter(|c| c % 2 == 1) {
                    if a + b + c == n {
                        out.push(tp(a, b, c));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn pairs_small() {
        assert_eq!(pair_partitions(3, true).unwrap(), vec![pp(1, 2), pp(3, 0)]);
        assert_eq!(pair_partitions(3, false).unwrap(), vec![pp(1, 2)]);
        assert_eq!(
            pair_partitions(7, true).unwrap(),
            vec![pp(1, 6), pp(3, 4), pp(5, 2), pp(7, 0)]
        );
    }

    #[test]
    fn rejects_even_and_small() {
        for n in [0, 1, 2, 4, 10] {
            assert!(matches!(pair_partitions(n, true), Err(Error::Domain(_))));
            assert!(matches!(triple_partitions(n), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn triples_small() {
        assert_eq!(triple_partitions(3).unwrap(), vec![tp(1, 1, 1)]);
        assert_eq!(triple_partitions(5).unwrap(), vec![tp(3, 1, 1)]);
        assert_eq!(
            triple_partitions(9).unwrap(),
            vec![tp(7, 1, 1), tp(5, 3, 1), tp(3, 3, 3)]
        );
    }

    #[test]
    fn triples_match_brute_force_up_to_201() {
        for n in (3..=201).step_by(2) {
            assert_eq!(triple_partitions(n).unwrap(), brute_triples(n), "n = {n}");
        }
    }

    #[test]
    fn symmetry_factors() {
        assert_eq!(symmetry_factor(&tp(1, 1, 1)), 6);
        assert_eq!(symmetry_factor(&tp(5, 3, 1)), 1);
        assert_eq!(symmetry_factor(&tp(3, 1, 1)), 2);
        assert_eq!(symmetry_factor(&tp(3, 3, 1)), 2);
    }

    #[test]
    fn coefficient_examples() {
        let close = |c: LogCoefficient, v: f64| (c.value() - v).abs() <= 1e-12 * v;
        assert!(close(pair_coefficient(3, &pp(1, 2)).unwrap(), 3.0));
        assert!(close(pair_coefficient(3, &pp(3, 0)).unwrap(), 1.0));
        assert!(close(pair_coefficient(7, &pp(5, 2)).unwrap(), 21.0));
        assert!(close(triple_coefficient(3, &tp(1, 1, 1)).unwrap(), 1.0));
        assert!(close(triple_coefficient(5, &tp(3, 1, 1)).unwrap(), 10.0));
        assert!(close(triple_coefficient(9, &tp(3, 3, 3)).unwrap(), 280.0));
        assert_eq!(triple_coefficient_exact(9, &tp(3, 3, 3)), Some(280));
        assert_eq!(pair_coefficient_exact(7, &pp(5, 2)), Some(21));
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        assert!(pair_coefficient(7, &pp(3, 2)).is_err());
        assert!(triple_coefficient(9, &tp(5, 1, 1)).is_err());
    }

    #[test]
    fn log_matches_exact_up_to_25() {
        for n in (3..=25).step_by(2) {
            for p in pair_partitions(n, true).unwrap() {
                let exact = pair_coefficient_exact(n, &p).unwrap() as f64;
                let v = pair_coefficient(n, &p).unwrap().value();
                assert!((v - exact).abs() <= 1e-12 * exact, "n={n} {p:?}");
            }
            for t in triple_partitions(n).unwrap() {
                let exact = triple_coefficient_exact(n, &t).unwrap() as f64;
                let v = triple_coefficient(n, &t).unwrap().value();
                assert!((v - exact).abs() <= 1e-12 * exact, "n={n} {t:?}");
            }
        }
    }

    #[test]
    fn orbit_identity_up_to_31() {
        // canonical triples weighted by ordered-orbit size 6/sigma reproduce
        // the sum over all ordered odd triples
        for n in (3..=31).step_by(2) {
            let f = |k: usize| factorial_exact(k).unwrap();
            let mut ordered = 0u128;
            for a in (1..n).step_by(2) {
                for b in (1..n - a).step_by(2) {
                    let c = n - a - b;
                    if c >= 1 && c % 2 == 1 {
                        ordered += f(n) / (f(a) * f(b) * f(c));
                    }
                }
            }
            let canonical: u128 = triple_partitions(n)
                .unwrap()
                .iter()
                .map(|t| triple_coefficient_exact(n, t).unwrap() * 6)
                .sum();
            assert_eq!(canonical, ordered, "n = {n}");
        }
    }

    #[test]
    fn stirling_tail_is_continuous() {
        let n = LN_FACTORIAL_TABLE;
        let from_table = ln_factorial(n - 1) + (n as f64).ln();
        assert!((ln_factorial(n) - from_table).abs() < 1e-9);
    }
}
