//! Brute-force normal ordering of composite-boson operator strings.
//!
//! Operators are `b_k`, `b_k†` and the deviation operator `D_{p,p'}`, with
//! momenta on the formal lattice spanned by `q` and `q'`. Rewriting uses
//!
//! ```text
//! b_p b_k†      → δ_{p,k} − D_{p,k} + b_k† b_p
//! D_{p,p'} b_k† → b_k† D_{p,p'} + (2/N) b_{k+p'−p}†
//! ```
//!
//! and, for vacuum expectation values, `b|F⟩ = D|F⟩ = 0`, `⟨F|b† = 0`.
//! Coefficients are integer polynomials in 1/N, so one symbolic pass
//! serves every electron number.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cbalg::CorrelatorKey;

/// Default maximum operator-string length.
pub const DEFAULT_MAX_LENGTH: usize = 20;
/// Default maximum number of live terms.
pub const DEFAULT_MAX_TERMS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("operator string of length {0} exceeds the bound of {1}")]
    TooLong(usize, usize),
    #[error("term count exceeded {0}")]
    TooManyTerms(usize),
    #[error("oracle needs non-negative indices, got {0}")]
    BadKey(CorrelatorKey),
}

/// Formal momentum `a·q + b·q'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Momentum(pub i64, pub i64);

impl Momentum {
    pub const Q: Momentum = Momentum(1, 0);
    pub const QP: Momentum = Momentum(0, 1);

    fn plus(self, o: Momentum) -> Momentum {
        Momentum(self.0 + o.0, self.1 + o.1)
    }

    fn minus(self, o: Momentum) -> Momentum {
        Momentum(self.0 - o.0, self.1 - o.1)
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = |c: i64, name: &str| match c {
            1 => name.to_string(),
            -1 => format!("-{name}"),
            c => format!("{c}{name}"),
        };
        match (self.0, self.1) {
            (0, 0) => f.write_str("0"),
            (a, 0) => f.write_str(&part(a, "q")),
            (0, b) => f.write_str(&part(b, "q'")),
            (a, b) => {
                let second = part(b, "q'");
                let sep = if second.starts_with('-') { "" } else { "+" };
                write!(f, "{}{sep}{second}", part(a, "q"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Create(Momentum),
    Annihilate(Momentum),
    Deviation(Momentum, Momentum),
}

impl Op {
    fn is_create(&self) -> bool {
        matches!(self, Op::Create(_))
    }

    /// Momentum added to a ket by this operator.
    pub fn momentum(&self) -> Momentum {
        match *self {
            Op::Create(k) => k,
            Op::Annihilate(p) => Momentum::default().minus(p),
            Op::Deviation(p, pp) => pp.minus(p),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Create(k) => write!(f, "b†({k})"),
            Op::Annihilate(p) => write!(f, "b({p})"),
            Op::Deviation(p, pp) => write!(f, "D({p},{pp})"),
        }
    }
}

/// An ordered product of operators (leftmost acts last on a ket).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OperatorString(pub Vec<Op>);

impl OperatorString {
    pub fn new(ops: Vec<Op>) -> Self {
        Self(ops)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every annihilation and deviation stands right of all creations.
    pub fn is_normal_ordered(&self) -> bool {
        self.0.windows(2).all(|w| !(w[1].is_create() && !w[0].is_create()))
    }

    pub fn net_momentum(&self) -> Momentum {
        self.0.iter().fold(Momentum::default(), |acc, op| acc.plus(op.momentum()))
    }

    /// Concatenation `self · other`.
    pub fn then(&self, other: &OperatorString) -> OperatorString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        OperatorString(v)
    }

    /// Sorts each maximal run of adjacent creations (creations commute).
    fn canonical(mut self) -> Self {
        let mut i = 0;
        while i < self.0.len() {
            if self.0[i].is_create() {
                let start = i;
                while i < self.0.len() && self.0[i].is_create() {
                    i += 1;
                }
                self.0[start..i].sort();
            } else {
                i += 1;
            }
        }
        self
    }
}

impl fmt::Display for OperatorString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.0.iter().map(|o| o.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Integer polynomial in 1/N: `coeffs[k]` multiplies `N^{-k}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InversePoly {
    coeffs: Vec<BigInt>,
}

impl InversePoly {
    pub fn constant(c: i64) -> Self {
        let mut p = Self { coeffs: vec![BigInt::from(c)] };
        p.trim();
        p
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    fn add_assign(&mut self, o: &InversePoly) {
        if self.coeffs.len() < o.coeffs.len() {
            self.coeffs.resize(o.coeffs.len(), BigInt::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&o.coeffs) {
            *a += b;
        }
        self.trim();
    }

    fn scaled(&self, c: i64) -> InversePoly {
        let mut p = InversePoly { coeffs: self.coeffs.iter().map(|x| x * c).collect() };
        p.trim();
        p
    }

    /// Multiplies by `c/N`.
    fn scaled_over_n(&self, c: i64) -> InversePoly {
        let mut coeffs = vec![BigInt::zero()];
        coeffs.extend(self.coeffs.iter().map(|x| x * c));
        let mut p = InversePoly { coeffs };
        p.trim();
        p
    }

    pub fn eval(&self, n_electrons: u64) -> BigRational {
        let n = BigInt::from(n_electrons);
        let mut acc = BigRational::zero();
        // Horner in 1/N
        for c in self.coeffs.iter().rev() {
            acc = acc / BigRational::from_integer(n.clone()) + BigRational::from_integer(c.clone());
        }
        acc
    }
}

impl fmt::Display for InversePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c < &BigInt::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            if !first {
                f.write_str(if neg { " - " } else { " + " })?;
            } else if neg {
                f.write_str("-")?;
            }
            first = false;
            match k {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}/N")?,
                _ => write!(f, "{mag}/N^{k}")?,
            }
        }
        Ok(())
    }
}

/// Linear combination of operator strings with 1/N-polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolicSum {
    terms: BTreeMap<OperatorString, InversePoly>,
}

impl SymbolicSum {
    pub fn single(s: OperatorString) -> Self {
        let mut out = Self::default();
        out.add(s, InversePoly::constant(1));
        out
    }

    pub fn add(&mut self, s: OperatorString, c: InversePoly) {
        let s = s.canonical();
        let entry = self.terms.entry(s.clone()).or_default();
        entry.add_assign(&c);
        if entry.is_zero() {
            self.terms.remove(&s);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OperatorString, &InversePoly)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the identity (empty string).
    pub fn scalar(&self) -> InversePoly {
        self.terms.get(&OperatorString::default()).cloned().unwrap_or_default()
    }
}

impl fmt::Display for SymbolicSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(s, c)| format!("({c})·{s}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Which redex the rewriter contracts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteOrder {
    Leftmost,
    Rightmost,
}

#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub max_length: usize,
    pub max_terms: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { max_length: DEFAULT_MAX_LENGTH, max_terms: DEFAULT_MAX_TERMS }
    }
}

fn find_redex(ops: &[Op], order: RewriteOrder) -> Option<usize> {
    let is_redex = |i: &usize| !ops[*i].is_create() && ops[*i + 1].is_create();
    let n = ops.len().saturating_sub(1);
    match order {
        RewriteOrder::Leftmost => (0..n).find(is_redex),
        RewriteOrder::Rightmost => (0..n).rev().find(is_redex),
    }
}

/// One rewrite of the pair at `i, i+1`; returns the replacement terms.
fn rewrite(ops: &[Op], i: usize, coeff: &InversePoly) -> Vec<(OperatorString, InversePoly)> {
    let splice = |mid: &[Op]| {
        let mut v = Vec::with_capacity(ops.len());
        v.extend_from_slice(&ops[..i]);
        v.extend_from_slice(mid);
        v.extend_from_slice(&ops[i + 2..]);
        OperatorString(v)
    };
    let k = match ops[i + 1] {
        Op::Create(k) => k,
        _ => unreachable!("redex ends with a creation"),
    };
    match ops[i] {
        Op::Annihilate(p) => {
            let mut out = Vec::with_capacity(3);
            if p == k {
                out.push((splice(&[]), coeff.clone()));
            }
            out.push((splice(&[Op::Deviation(p, k)]), coeff.scaled(-1)));
            out.push((splice(&[Op::Create(k), Op::Annihilate(p)]), coeff.clone()));
            out
        }
        Op::Deviation(p, pp) => vec![
            (splice(&[Op::Create(k), Op::Deviation(p, pp)]), coeff.clone()),
            (splice(&[Op::Create(k.plus(pp).minus(p))]), coeff.scaled_over_n(2)),
        ],
        Op::Create(_) => unreachable!("redex starts with b or D"),
    }
}

/// A term is annihilated by the vacuum on either side.
fn vanishes_on_vacuum(ops: &[Op]) -> bool {
    ops.first().is_some_and(|o| o.is_create()) || ops.last().is_some_and(|o| !o.is_create())
}

impl Oracle {
    fn run(&self, s: &OperatorString, order: RewriteOrder, vacuum: bool) -> Result<SymbolicSum, OracleError> {
        if s.len() > self.max_length {
            return Err(OracleError::TooLong(s.len(), self.max_length));
        }
        let mut pending = SymbolicSum::single(s.clone());
        let mut done = SymbolicSum::default();
        while let Some((ops, coeff)) = pending.terms.pop_first() {
            if vacuum && vanishes_on_vacuum(&ops.0) {
                continue;
            }
            match find_redex(&ops.0, order) {
                None => done.add(ops, coeff),
                Some(i) => {
                    for (t, c) in rewrite(&ops.0, i, &coeff) {
                        pending.add(t, c);
                    }
                }
            }
            if pending.len() + done.len() > self.max_terms {
                return Err(OracleError::TooManyTerms(self.max_terms));
            }
        }
        Ok(done)
    }

    /// Normal-ordered form of `s`.
    pub fn normal_order(&self, s: &OperatorString) -> Result<SymbolicSum, OracleError> {
        self.run(s, RewriteOrder::Leftmost, false)
    }

    pub fn normal_order_with(&self, s: &OperatorString, order: RewriteOrder) -> Result<SymbolicSum, OracleError> {
        self.run(s, order, false)
    }

    /// ⟨F| s |F⟩ as a polynomial in 1/N.
    pub fn vev_poly(&self, s: &OperatorString) -> Result<InversePoly, OracleError> {
        Ok(self.run(s, RewriteOrder::Rightmost, true)?.scalar())
    }

    pub fn vev(&self, s: &OperatorString, n_electrons: u64) -> Result<BigRational, OracleError> {
        Ok(self.vev_poly(s)?.eval(n_electrons))
    }

    /// The string `b_q^n b_{q'}^m b_q†^s b_{q'}†^r b_Q†`.
    pub fn correlator_string(key: CorrelatorKey) -> Result<OperatorString, OracleError> {
        let CorrelatorKey { n, m, s, r } = key;
        if n < 0 || m < 0 || s < 0 || r < 0 {
            return Err(OracleError::BadKey(key));
        }
        let big_q = Momentum(n - s, m - r);
        let mut ops = Vec::new();
        ops.extend(std::iter::repeat_n(Op::Annihilate(Momentum::Q), n as usize));
        ops.extend(std::iter::repeat_n(Op::Annihilate(Momentum::QP), m as usize));
        ops.extend(std::iter::repeat_n(Op::Create(Momentum::Q), s as usize));
        ops.extend(std::iter::repeat_n(Op::Create(Momentum::QP), r as usize));
        ops.push(Op::Create(big_q));
        Ok(OperatorString(ops))
    }

    /// n! m! K(n,m,s,r) as a polynomial in 1/N.
    pub fn k_poly(&self, key: CorrelatorKey) -> Result<InversePoly, OracleError> {
        self.vev_poly(&Self::correlator_string(key)?)
    }

    /// K(n,m,s,r) from brute-force normal ordering.
    pub fn k(&self, key: CorrelatorKey, n_electrons: u64) -> Result<BigRational, OracleError> {
        let v = self.k_poly(key)?.eval(n_electrons);
        let fact = |x: i64| (1..=x).fold(BigInt::one(), |a, k| a * k);
        Ok(v / BigRational::from_integer(fact(key.n) * fact(key.m)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(p: Momentum) -> Op {
        Op::Annihilate(p)
    }
    fn bd(p: Momentum) -> Op {
        Op::Create(p)
    }
    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }
    const Q: Momentum = Momentum::Q;
    const QP: Momentum = Momentum::QP;

    #[test]
    fn commutator_rule() {
        let o = Oracle::default();
        let sum = o.normal_order(&OperatorString(vec![b(Q), bd(Q)])).unwrap();
        let mut want = SymbolicSum::default();
        want.add(OperatorString::default(), InversePoly::constant(1));
        want.add(OperatorString(vec![Op::Deviation(Q, Q)]), InversePoly::constant(-1));
        want.add(OperatorString(vec![bd(Q), b(Q)]), InversePoly::constant(1));
        assert_eq!(sum, want);
    }

    #[test]
    fn deviation_rule() {
        let o = Oracle::default();
        let q2 = Momentum(2, -1);
        let sum = o.normal_order(&OperatorString(vec![Op::Deviation(Q, QP), bd(q2)])).unwrap();
        assert_eq!(sum.len(), 2);
        let exch: Vec<_> = sum.terms().filter(|(s, _)| s.len() == 1).collect();
        // q'' + q' − q = (2q − q') + q' − q = q
        assert_eq!(exch[0].0, &OperatorString(vec![bd(Q)]));
        assert_eq!(exch[0].1.coefficients(), &[0.into(), 2.into()]);
        assert_eq!(exch[0].1.to_string(), "2/N");
    }

    #[test]
    fn normal_ordered_string_is_fixed_point() {
        let o = Oracle::default();
        let s = OperatorString(vec![bd(Q), bd(QP), b(Q), Op::Deviation(Q, QP)]);
        assert!(s.is_normal_ordered());
        let sum = o.normal_order(&s).unwrap();
        assert_eq!(sum, SymbolicSum::single(s));
    }

    #[test]
    fn vacuum_values() {
        let o = Oracle::default();
        for n in [2u64, 5, 10, 100] {
            assert_eq!(o.vev(&OperatorString(vec![b(Q), bd(Q)]), n).unwrap(), q(1, 1));
            assert_eq!(o.vev(&OperatorString(vec![b(Q), b(QP), bd(Q), bd(QP)]), n).unwrap(), q(n as i64 - 2, n as i64));
            assert_eq!(
                o.vev(&OperatorString(vec![b(Q), b(Q), bd(Q), bd(Q)]), n).unwrap(),
                q(2 * n as i64 - 2, n as i64)
            );
        }
    }

    #[test]
    fn oracle_correlators() {
        let o = Oracle::default();
        for n in [2u64, 7, 100] {
            let ni = n as i64;
            assert_eq!(o.k(CorrelatorKey::new(1, 0, 0, 0), n).unwrap(), q(1, 1));
            assert_eq!(o.k(CorrelatorKey::new(1, 1, 1, 0), n).unwrap(), q(ni - 2, ni));
            assert_eq!(o.k(CorrelatorKey::new(2, 0, 1, 0), n).unwrap(), q(ni - 1, ni));
        }
        assert!(o.k(CorrelatorKey::new(1, 0, 0, -1), 3).is_err());
    }

    #[test]
    fn regression_k2120_at_n5() {
        let o = Oracle::default();
        let poly = o.k_poly(CorrelatorKey::new(2, 1, 2, 0)).unwrap();
        assert_eq!(poly.to_string(), "2 - 10/N + 12/N^2");
        assert_eq!(o.k(CorrelatorKey::new(2, 1, 2, 0), 5).unwrap(), q(6, 25));
    }

    #[test]
    fn agrees_with_recurrence() {
        let o = Oracle::default();
        for n_el in [2u64, 5, 10, 100] {
            let rec = crate::ExactCorrelators::new(n_el);
            for key in (1..=6).flat_map(crate::cbalg::valid_keys) {
                if key.s < 0 || key.r < 0 {
                    continue;
                }
                assert_eq!(o.k(key, n_el).unwrap(), rec.k_key(key).unwrap(), "{key} N={n_el}");
            }
        }
    }

    #[test]
    fn length_guard() {
        let o = Oracle { max_length: 4, ..Oracle::default() };
        let s = OperatorString(vec![b(Q); 5]);
        assert_eq!(o.normal_order(&s), Err(OracleError::TooLong(5, 4)));
        let o = Oracle { max_terms: 3, ..Oracle::default() };
        let s = OperatorString(vec![b(Q), b(Q), bd(Q), bd(Q)]);
        assert_eq!(o.normal_order(&s), Err(OracleError::TooManyTerms(3)));
    }

    #[test]
    fn momentum_display() {
        assert_eq!(Momentum(2, -1).to_string(), "2q-q'");
        assert_eq!(Momentum(-1, 3).to_string(), "-q+3q'");
        assert_eq!(Momentum(0, 0).to_string(), "0");
    }
}
