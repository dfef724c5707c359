//! Number types the correlator recurrence can run on.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMode {
    Rational,
    Float,
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericMode::Rational => "rational",
            NumericMode::Float => "float",
        })
    }
}

/// Arithmetic needed by the correlator recurrence and the bosonicity sums.
pub trait CorrelatorScalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const MODE: NumericMode;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_u64(k: u64) -> Self;
    /// `num / den` for `den > 0`.
    fn ratio(num: u64, den: u64) -> Self;
    /// Π num[i]! / Π den[i]!, with num and den paired index by index.
    fn factorial_ratio(num: &[u64], den: &[u64]) -> Self;
    /// Row of binomial coefficients C(n, 0..=n).
    fn binomial_row(n: u64) -> Vec<Self>;
    fn powu(&self, k: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn is_negative(&self) -> bool;
    /// Estimated relative error carried by the value (0 when exact).
    fn rel_error(&self) -> f64;
}

fn falling_product(hi: u64, lo: u64) -> BigInt {
    // (lo+1)(lo+2)…hi
    let mut p = BigInt::one();
    for k in lo + 1..=hi {
        p *= k;
    }
    p
}

impl CorrelatorScalar for BigRational {
    const MODE: NumericMode = NumericMode::Rational;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_u64(k: u64) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn factorial_ratio(num: &[u64], den: &[u64]) -> Self {
        let mut top = BigInt::one();
        let mut bottom = BigInt::one();
        for (i, &a) in num.iter().enumerate() {
            let b = den.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Greater => top *= falling_product(a, b),
                Ordering::Less => bottom *= falling_product(b, a),
                Ordering::Equal => {}
            }
        }
        for &b in den.iter().skip(num.len()) {
            bottom *= falling_product(b, 0);
        }
        BigRational::new(top, bottom)
    }
    fn binomial_row(n: u64) -> Vec<Self> {
        let mut row = Vec::with_capacity(n as usize + 1);
        let mut c = BigInt::one();
        row.push(BigRational::from_integer(c.clone()));
        for k in 0..n {
            c = c * (n - k) / (k + 1);
            row.push(BigRational::from_integer(c.clone()));
        }
        row
    }
    fn powu(&self, k: u64) -> Self {
        num_traits::pow::pow(self.clone(), k as usize)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_finite(&self) -> bool {
        true
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn rel_error(&self) -> f64 {
        0.0
    }
}

/// Signed number stored as sign and natural log of its magnitude, with a
/// running absolute error bound (also kept as a logarithm).
#[derive(Clone, Copy)]
pub struct LogFloat<T> {
    sign: i8,
    ln: T,
    ln_err: T,
}

impl<T: Real> LogFloat<T> {
    pub fn from_real(x: T) -> Self {
        if x == T::zero() {
            Self::zero_value()
        } else {
            let sign = if x < T::zero() { -1 } else { 1 };
            Self { sign, ln: x.abs().ln(), ln_err: T::neg_infinity() }
        }
    }

    /// Builds `sign · exp(ln)`.
    pub fn from_ln(sign: i8, ln: T) -> Self {
        if sign == 0 || ln == T::neg_infinity() {
            Self::zero_value()
        } else {
            Self { sign: sign.signum(), ln, ln_err: T::neg_infinity() }
        }
    }

    fn zero_value() -> Self {
        Self { sign: 0, ln: T::neg_infinity(), ln_err: T::neg_infinity() }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// ln|x| (−∞ for zero).
    pub fn ln_abs(&self) -> T {
        self.ln
    }

    pub fn to_real(&self) -> T {
        if self.sign == 0 {
            T::zero()
        } else {
            let m = self.ln.exp();
            if self.sign < 0 {
                -m
            } else {
                m
            }
        }
    }

    /// Absolute error bound.
    pub fn abs_error(&self) -> T {
        self.ln_err.exp()
    }

    fn rounding(ln: T) -> T {
        // ln of ε·(1+|ln|)·|x|: relative rounding of a log-domain result
        (T::epsilon() * (T::one() + T::lit(4.0) * ln.abs())).ln() + ln
    }
}

fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + s.ln()
}

impl<T: Real> fmt::Debug for LogFloat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogFloat({}·e^{:?} ±{:e})", self.sign, self.ln, self.abs_error().as_f64())
    }
}

impl<T: Real> PartialEq for LogFloat<T> {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.ln == other.ln)
    }
}

impl<T: Real> Neg for LogFloat<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.sign = -self.sign;
        self
    }
}

impl<T: Real> Add for LogFloat<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if rhs.sign == 0 {
            let mut out = self;
            out.ln_err = log_sum_exp(&[self.ln_err, rhs.ln_err]);
            return out;
        }
        if self.sign == 0 {
            let mut out = rhs;
            out.ln_err = log_sum_exp(&[self.ln_err, rhs.ln_err]);
            return out;
        }
        let (big, small) = if self.ln >= rhs.ln { (self, rhs) } else { (rhs, self) };
        let d = small.ln - big.ln;
        let (sign, ln) = if big.sign == small.sign {
            (big.sign, big.ln + d.exp().ln_1p())
        } else if d == T::zero() {
            (0, T::neg_infinity())
        } else {
            (big.sign, big.ln + (-d.exp_m1()).ln())
        };
        // rounding of the sum is bounded relative to the larger operand
        let ln_err = log_sum_exp(&[self.ln_err, rhs.ln_err, Self::rounding(big.ln)]);
        if sign == 0 {
            return Self { sign: 0, ln: T::neg_infinity(), ln_err };
        }
        Self { sign, ln, ln_err }
    }
}

impl<T: Real> Sub for LogFloat<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Mul for LogFloat<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let ln_err = log_sum_exp(&[self.ln + rhs.ln_err, rhs.ln + self.ln_err, self.ln_err + rhs.ln_err]);
        if self.sign == 0 || rhs.sign == 0 {
            return Self { sign: 0, ln: T::neg_infinity(), ln_err };
        }
        let ln = self.ln + rhs.ln;
        Self { sign: self.sign * rhs.sign, ln, ln_err: log_sum_exp(&[ln_err, Self::rounding(ln)]) }
    }
}

impl<T: Real> Div for LogFloat<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(rhs.sign != 0, "LogFloat division by zero");
        if self.sign == 0 {
            let ln_err = self.ln_err - rhs.ln;
            return Self { sign: 0, ln: T::neg_infinity(), ln_err };
        }
        let ln = self.ln - rhs.ln;
        // first-order: |a/b|·(ea/|a| + eb/|b|)
        let ln_err = log_sum_exp(&[self.ln_err - rhs.ln, ln + rhs.ln_err - rhs.ln, Self::rounding(ln)]);
        Self { sign: self.sign * rhs.sign, ln, ln_err }
    }
}

impl<T: Real> CorrelatorScalar for LogFloat<T> {
    const MODE: NumericMode = NumericMode::Float;

    fn zero() -> Self {
        Self::zero_value()
    }
    fn one() -> Self {
        Self { sign: 1, ln: T::zero(), ln_err: T::neg_infinity() }
    }
    fn is_zero(&self) -> bool {
        self.sign == 0
    }
    fn from_u64(k: u64) -> Self {
        Self::from_real(T::from_u64(k).expect("u64 fits"))
    }
    fn ratio(num: u64, den: u64) -> Self {
        if num == 0 {
            return Self::zero_value();
        }
        let ln = T::from_u64(num).unwrap().ln() - T::from_u64(den).unwrap().ln();
        Self { sign: 1, ln, ln_err: Self::rounding(ln) }
    }
    fn factorial_ratio(num: &[u64], den: &[u64]) -> Self {
        let mut ln = T::zero();
        let mut carry = T::zero();
        let mut add = |x: T| {
            // Neumaier
            let t = ln + x;
            if ln.abs() >= x.abs() {
                carry = carry + ((ln - t) + x);
            } else {
                carry = carry + ((x - t) + ln);
            }
            ln = t;
        };
        for (i, &a) in num.iter().enumerate() {
            let b = den.get(i).copied().unwrap_or(0);
            if a > b {
                for k in b + 1..=a {
                    add(T::from_u64(k).unwrap().ln());
                }
            } else {
                for k in a + 1..=b {
                    add(-T::from_u64(k).unwrap().ln());
                }
            }
        }
        for &b in den.iter().skip(num.len()) {
            for k in 2..=b {
                add(-T::from_u64(k).unwrap().ln());
            }
        }
        let ln = ln + carry;
        Self { sign: 1, ln, ln_err: Self::rounding(ln) }
    }
    fn binomial_row(n: u64) -> Vec<Self> {
        let mut row = Vec::with_capacity(n as usize + 1);
        let mut ln = T::zero();
        let mut carry = T::zero();
        row.push(Self::one());
        for k in 0..n {
            let x = T::from_u64(n - k).unwrap().ln() - T::from_u64(k + 1).unwrap().ln();
            let t = ln + x;
            if ln.abs() >= x.abs() {
                carry = carry + ((ln - t) + x);
            } else {
                carry = carry + ((x - t) + ln);
            }
            ln = t;
            let v = ln + carry;
            row.push(Self { sign: 1, ln: v, ln_err: Self::rounding(v) });
        }
        row
    }
    fn powu(&self, k: u64) -> Self {
        if k == 0 {
            return Self::one();
        }
        if self.sign == 0 {
            return Self::zero_value();
        }
        let kt = T::from_u64(k).unwrap();
        let ln = self.ln * kt;
        let sign = if self.sign < 0 && k % 2 == 1 { -1 } else { 1 };
        // relative error scales by k
        let ln_err = log_sum_exp(&[self.ln_err - self.ln + kt.ln() + ln, Self::rounding(ln)]);
        Self { sign, ln, ln_err }
    }
    fn to_f64(&self) -> f64 {
        self.to_real().as_f64()
    }
    fn is_finite(&self) -> bool {
        self.sign == 0 || (self.ln.is_finite())
    }
    fn is_negative(&self) -> bool {
        self.sign < 0
    }
    fn rel_error(&self) -> f64 {
        if self.sign == 0 {
            if self.ln_err == T::neg_infinity() {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.ln_err - self.ln).exp().as_f64()
        }
    }
}
