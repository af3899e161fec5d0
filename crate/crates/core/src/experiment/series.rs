//! Exact weak-coupling expansion of the Green's functions.
//!
//! Every right-hand side of the equations of motion carries an explicit factor
//! of `lambda`, so order `k` of every `H^{n+1}` is fixed by orders `< k`. All
//! coefficients are integers and are kept as `BigInt`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::combinatorics::{for_each_triple, symmetry_factor};
use crate::error::{Error, Result};
use crate::sequences::check_odd_at_least;

/// Coefficients `c[n][k]` of `H^{n+1}(lambda) = sum_k c[n][k] lambda^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    n_max: usize,
    k_max: usize,
    include_j2_zero: bool,
    coeffs: Vec<Vec<BigInt>>,
}

impl SeriesTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn include_j2_zero(&self) -> bool {
        self.include_j2_zero
    }

    pub fn coefficient(&self, n: usize, k: usize) -> Option<&BigInt> {
        if n.is_multiple_of(2) || n > self.n_max {
            return None;
        }
        self.coeffs[(n - 1) / 2].get(k)
    }

    pub fn coefficients(&self, n: usize) -> Option<&[BigInt]> {
        if n.is_multiple_of(2) || n > self.n_max {
            return None;
        }
        Some(&self.coeffs[(n - 1) / 2])
    }

    /// Truncated sum at `lambda`, accumulated from the highest order down.
    pub fn eval(&self, n: usize, lambda: f64) -> Option<f64> {
        let c = self.coefficients(n)?;
        Some(
            c.iter()
                .rev()
                .fold(0.0, |acc, ck| acc * lambda + ck.to_f64().unwrap_or(f64::NAN)),
        )
    }
}

/// Lowest power of `lambda` present in `H^{n+1}`.
pub fn minimal_order(n: usize) -> usize {
    (n - 1) / 2
}

fn factorials(n: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = BigInt::one();
    out.push(acc.clone());
    for i in 1..=n {
        acc *= i;
        out.push(acc.clone());
    }
    out
}

/// Solves the untruncated hierarchy order by order through `k_max` and reports
/// the rows with `n <= n_max`.
///
/// Entries with minimal order above `k_max` vanish through that order, so the
/// hierarchy is carried up to `max(n_max, 2 k_max + 3)` and every reported
/// coefficient is exact.
pub fn perturbative_series(n_max: usize, k_max: usize, include_j2_zero: bool) -> Result<SeriesTable> {
    check_odd_at_least(n_max, 1)?;
    if k_max < 1 {
        return Err(Error::Domain("series order must be at least 1".into()));
    }
    let n_top = n_max.max(2 * k_max + 3);
    let rows = n_top.div_ceil(2);
    let fact = factorials(n_top);
    let mut c = vec![vec![BigInt::zero(); k_max + 1]; rows];
    c[0][0] = BigInt::one();

    for k in 1..=k_max {
        // H^2 = 1 - lambda H^4
        c[0][k] = -c[1][k - 1].clone();
        for row in 1..rows {
            let n = 2 * row + 1;
            if minimal_order(n) > k {
                break;
            }
            let mut acc = BigInt::zero();
            if row + 1 < rows {
                acc -= &c[row + 1][k - 1];
            }

            let mut b = BigInt::zero();
            let top = if include_j2_zero { n } else { n - 2 };
            for j1 in (1..=top).step_by(2) {
                let j2 = n - j1;
                let coef = &fact[n] / (&fact[j1] * &fact[j2]);
                let upper = &c[(j2 + 1 - 1) / 2];
                let lower = &c[(j1 - 1) / 2];
                let mut conv = BigInt::zero();
                for a in 0..k {
                    conv += &upper[a] * &lower[k - 1 - a];
                }
                b += coef * conv;
            }
            acc -= 3 * b;

            let mut t = BigInt::zero();
            for_each_triple(n, |tr| {
                let denom = &fact[tr.i1] * &fact[tr.i2] * &fact[tr.i3] * symmetry_factor(&tr);
                let coef = &fact[n] / denom;
                let (x, y, z) = (&c[(tr.i1 - 1) / 2], &c[(tr.i2 - 1) / 2], &c[(tr.i3 - 1) / 2]);
                let mut conv = BigInt::zero();
                for a in 0..k {
                    if x[a].is_zero() {
                        continue;
                    }
                    for b in 0..k - a {
                        conv += &x[a] * &y[b] * &z[k - 1 - a - b];
                    }
                }
                t += coef * conv;
            });
            acc -= 6 * t;
            c[row][k] = acc;
        }
    }
    c.truncate(n_max.div_ceil(2));
    Ok(SeriesTable {
        n_max,
        k_max,
        include_j2_zero,
        coeffs: c,
    })
}
