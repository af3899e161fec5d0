//! Signed values stored as `(sign, ln|x|)`.
//!
//! The Green's functions grow like `n!` so every magnitude in the hierarchy is
//! carried in the natural-log domain. Sums of signed terms go through
//! [`SignedLogSum`], a streaming log-sum-exp that keeps the positive and
//! negative parts apart until the end.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Mul, Neg};

/// Sign of a stored value. `Zero` carries no magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    /// `(-1)^k`
    pub fn alternating(k: usize) -> Sign {
        if k.is_multiple_of(2) {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        match (self, rhs) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// A real number as `sign * exp(ln_abs)`.
#[derive(Clone, Copy, PartialEq)]
pub struct LogValue {
    sign: Sign,
    ln_abs: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: Sign::Zero,
        ln_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        sign: Sign::Positive,
        ln_abs: 0.0,
    };

    /// Builds a value from its parts. A `Zero` sign or an `ln_abs` of `-inf`
    /// normalizes to [`LogValue::ZERO`].
    pub fn new(sign: Sign, ln_abs: f64) -> Self {
        if sign == Sign::Zero || ln_abs == f64::NEG_INFINITY {
            LogValue::ZERO
        } else {
            LogValue { sign, ln_abs }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() {
            return LogValue {
                sign: Sign::Positive,
                ln_abs: f64::NAN,
            };
        }
        LogValue::new(Sign::of(x), x.abs().ln())
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn ln_abs(&self) -> f64 {
        self.ln_abs
    }

    pub fn log10_abs(&self) -> f64 {
        self.ln_abs * std::f64::consts::LOG10_E
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    /// `false` for NaN magnitudes and for `+inf`.
    pub fn is_finite(&self) -> bool {
        self.is_zero() || self.ln_abs.is_finite()
    }

    /// Linear value; overflows to `±inf` above ~1e308.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            Sign::Positive => self.ln_abs.exp(),
            Sign::Negative => -self.ln_abs.exp(),
        }
    }

    pub fn abs(&self) -> LogValue {
        LogValue::new(
            if self.is_zero() {
                Sign::Zero
            } else {
                Sign::Positive
            },
            self.ln_abs,
        )
    }

    /// Multiplies by a positive factor given as its logarithm.
    pub fn scale_ln(&self, ln_factor: f64) -> LogValue {
        LogValue::new(self.sign, self.ln_abs + ln_factor)
    }

    /// Multiplies by an ordinary real.
    pub fn scale(&self, factor: f64) -> LogValue {
        *self * LogValue::from_f64(factor)
    }

    /// `self / other`; `None` when `other` is zero.
    pub fn checked_div(&self, other: &LogValue) -> Option<LogValue> {
        if other.is_zero() {
            return None;
        }
        Some(LogValue::new(
            self.sign * other.sign,
            self.ln_abs - other.ln_abs,
        ))
    }

    pub fn powi(&self, k: i32) -> LogValue {
        if k == 0 {
            return LogValue::ONE;
        }
        let sign = if k % 2 == 0 {
            if self.is_zero() {
                Sign::Zero
            } else {
                Sign::Positive
            }
        } else {
            self.sign
        };
        LogValue::new(sign, self.ln_abs * k as f64)
    }

    pub fn add(&self, other: &LogValue) -> LogValue {
        let mut acc = SignedLogSum::new();
        acc.push(*self);
        acc.push(*other);
        acc.total()
    }

    pub fn sub(&self, other: &LogValue) -> LogValue {
        self.add(&-*other)
    }

    /// Compares magnitudes.
    pub fn cmp_abs(&self, other: &LogValue) -> Ordering {
        self.ln_abs.total_cmp(&other.ln_abs)
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::new(self.sign * rhs.sign, self.ln_abs + rhs.ln_abs)
    }
}

impl Neg for LogValue {
    type Output = LogValue;

    fn neg(self) -> LogValue {
        LogValue::new(-self.sign, self.ln_abs)
    }
}

impl fmt::Debug for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "0"),
            Sign::Positive => write!(f, "+exp({})", self.ln_abs),
            Sign::Negative => write!(f, "-exp({})", self.ln_abs),
        }
    }
}

/// One-sided streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct HalfSum {
    max: f64,
    sum: f64,
}

impl HalfSum {
    const EMPTY: HalfSum = HalfSum {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    #[inline]
    fn push(&mut self, ln: f64) {
        if ln.is_nan() {
            self.max = f64::NAN;
            return;
        }
        if ln <= self.max {
            self.sum += (ln - self.max).exp();
        } else {
            if self.max > f64::NEG_INFINITY {
                self.sum *= (self.max - ln).exp();
            }
            self.sum += 1.0;
            self.max = ln;
        }
    }

    fn ln_total(&self) -> f64 {
        if self.max.is_nan() {
            f64::NAN
        } else if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Accumulates a signed sum of [`LogValue`]s without leaving the log domain.
#[derive(Debug, Clone, Copy)]
pub struct SignedLogSum {
    pos: HalfSum,
    neg: HalfSum,
}

impl Default for SignedLogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl SignedLogSum {
    pub fn new() -> Self {
        SignedLogSum {
            pos: HalfSum::EMPTY,
            neg: HalfSum::EMPTY,
        }
    }

    #[inline]
    pub fn push(&mut self, v: LogValue) {
        match v.sign {
            Sign::Zero => {}
            Sign::Positive => self.pos.push(v.ln_abs),
            Sign::Negative => self.neg.push(v.ln_abs),
        }
    }

    /// Pushes `sign * exp(ln_abs)` without building a [`LogValue`].
    #[inline]
    pub fn push_parts(&mut self, sign: Sign, ln_abs: f64) {
        match sign {
            Sign::Zero => {}
            Sign::Positive => self.pos.push(ln_abs),
            Sign::Negative => self.neg.push(ln_abs),
        }
    }

    pub fn total(&self) -> LogValue {
        let p = self.pos.ln_total();
        let n = self.neg.ln_total();
        if p.is_nan() || n.is_nan() {
            return LogValue {
                sign: Sign::Positive,
                ln_abs: f64::NAN,
            };
        }
        match (p == f64::NEG_INFINITY, n == f64::NEG_INFINITY) {
            (true, true) => LogValue::ZERO,
            (false, true) => LogValue::new(Sign::Positive, p),
            (true, false) => LogValue::new(Sign::Negative, n),
            (false, false) => {
                if p == n {
                    return LogValue::ZERO;
                }
                // ln(e^a - e^b) = a + ln(1 - e^(b-a)) for a > b
                let (hi, lo, sign) = if p > n {
                    (p, n, Sign::Positive)
                } else {
                    (n, p, Sign::Negative)
                };
                let rest = -(lo - hi).exp_m1();
                LogValue::new(sign, hi + rest.ln())
            }
        }
    }
}

impl FromIterator<LogValue> for SignedLogSum {
    fn from_iter<I: IntoIterator<Item = LogValue>>(iter: I) -> Self {
        let mut acc = SignedLogSum::new();
        for v in iter {
            acc.push(v);
        }
        acc
    }
}
