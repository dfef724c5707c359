//! Composite-boson correlators K(n, m, s, r).
//!
//! `n! m! K(n,m,s,r) = ⟨F| b_q^n b_{q'}^m b_q†^s b_{q'}†^r b_Q† |F⟩` with
//! `Q = q(n−s) + q'(m−r)`, evaluated through the closed recurrence
//!
//! ```text
//! K(n,m,s,r) = δ_{m,r} δ_{n,s+1} K(n−1,m,n−1,m−1) + δ_{m,r+1} δ_{n,s} K(n,m−1,n−1,m−1)
//!            − s! r! / (n! m! N) · [ n(n−1) K(s,r,n−2,m) + m(m−1) K(s,r,n,m−2)
//!                                  + 2nm K(s,r,n−1,m−1) ]
//! ```
//!
//! K vanishes unless `n + m = s + r + 1`. Keys with a creation index of −1
//! are closed with `K(j,0,j,−1) = K(j,0,j−1,0)`, its mirror
//! `K(0,j,−1,j) = K(0,j,0,j−1)`, and `K(0,0,0,−1) = K(0,0,−1,0) = 1`.

mod scalar;

use std::fmt;

use dashmap::DashMap;
use serde::Serialize;
use thiserror::Error;

pub use scalar::{CorrelatorScalar, LogFloat, NumericMode};

/// Default cap on the number of memoized keys.
pub const DEFAULT_BUDGET: usize = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbError {
    #[error("non-finite correlator at {0} in float mode; use rational mode")]
    Overflow(CorrelatorKey),
    #[error("memo budget of {0} entries exceeded")]
    BudgetExceeded(usize),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CorrelatorKey {
    pub n: i64,
    pub m: i64,
    pub s: i64,
    pub r: i64,
}

impl CorrelatorKey {
    pub const fn new(n: i64, m: i64, s: i64, r: i64) -> Self {
        Self { n, m, s, r }
    }

    pub fn obeys_selection_rule(&self) -> bool {
        self.n + self.m == self.s + self.r + 1
    }
}

impl fmt::Display for CorrelatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K({},{},{},{})", self.n, self.m, self.s, self.r)
    }
}

/// A correlator value tagged with its numeric mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorValue<S> {
    pub value: S,
    pub mode: NumericMode,
    pub rel_error: f64,
}

impl<S: CorrelatorScalar> CorrelatorValue<S> {
    pub fn new(value: S) -> Self {
        let rel_error = value.rel_error();
        Self { value, mode: S::MODE, rel_error }
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolved {
    Zero,
    One,
    Key(CorrelatorKey),
}

fn resolve(k: CorrelatorKey) -> Resolved {
    let CorrelatorKey { n, m, s, r } = k;
    if n < 0 || m < 0 || s < -1 || r < -1 || !k.obeys_selection_rule() {
        return Resolved::Zero;
    }
    if r == -1 {
        return match (m, n == s, n) {
            (0, true, 0) => Resolved::One,
            (0, true, j) => Resolved::Key(CorrelatorKey::new(j, 0, j - 1, 0)),
            _ => Resolved::Zero,
        };
    }
    if s == -1 {
        return match (n, m == r, m) {
            (0, true, 0) => Resolved::One,
            (0, true, j) => Resolved::Key(CorrelatorKey::new(0, j, 0, j - 1)),
            _ => Resolved::Zero,
        };
    }
    Resolved::Key(k)
}

/// Terms of the recurrence for a resolved key: (weight, dependency).
struct Expansion {
    direct: Vec<Resolved>,
    prefactor_num: [u64; 2],
    prefactor_den: [u64; 2],
    exchange: Vec<(u64, Resolved)>,
}

fn expand(k: CorrelatorKey) -> Expansion {
    let CorrelatorKey { n, m, s, r } = k;
    let mut direct = Vec::new();
    if m == r && n == s + 1 {
        direct.push(resolve(CorrelatorKey::new(n - 1, m, n - 1, m - 1)));
    }
    if m == r + 1 && n == s {
        direct.push(resolve(CorrelatorKey::new(n, m - 1, n - 1, m - 1)));
    }
    let mut exchange = Vec::new();
    if n >= 2 {
        exchange.push(((n * (n - 1)) as u64, resolve(CorrelatorKey::new(s, r, n - 2, m))));
    }
    if m >= 2 {
        exchange.push(((m * (m - 1)) as u64, resolve(CorrelatorKey::new(s, r, n, m - 2))));
    }
    if n >= 1 && m >= 1 {
        exchange.push(((2 * n * m) as u64, resolve(CorrelatorKey::new(s, r, n - 1, m - 1))));
    }
    Expansion { direct, prefactor_num: [s as u64, r as u64], prefactor_den: [n as u64, m as u64], exchange }
}

/// Memoized evaluator of K for a fixed electron number `N`.
///
/// The cache is shared between threads; every key is computed with a fixed
/// summation order, so concurrent inserts of the same key store identical
/// values.
pub struct Correlators<S> {
    n_electrons: u64,
    cache: DashMap<CorrelatorKey, S>,
    budget: usize,
}

impl<S: CorrelatorScalar> Correlators<S> {
    pub fn new(n_electrons: u64) -> Self {
        Self::with_budget(n_electrons, DEFAULT_BUDGET)
    }

    pub fn with_budget(n_electrons: u64, budget: usize) -> Self {
        assert!(n_electrons >= 1, "N must be positive");
        Self { n_electrons, cache: DashMap::new(), budget }
    }

    pub fn n_electrons(&self) -> u64 {
        self.n_electrons
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    fn lookup(&self, r: Resolved) -> Option<S> {
        match r {
            Resolved::Zero => Some(S::zero()),
            Resolved::One => Some(S::one()),
            Resolved::Key(k) => self.cache.get(&k).map(|v| v.value().clone()),
        }
    }

    fn combine(&self, e: &Expansion) -> S {
        let mut v = S::zero();
        for d in &e.direct {
            v = v + self.lookup(*d).expect("dependency evaluated");
        }
        if !e.exchange.is_empty() {
            let mut bracket = S::zero();
            for (c, d) in &e.exchange {
                bracket = bracket + S::from_u64(*c) * self.lookup(*d).expect("dependency evaluated");
            }
            let pre = S::factorial_ratio(&e.prefactor_num, &e.prefactor_den) / S::from_u64(self.n_electrons);
            v = v - pre * bracket;
        }
        v
    }

    fn evaluate(&self, root: CorrelatorKey) -> Result<S, CbError> {
        let mut stack = vec![root];
        while let Some(&top) = stack.last() {
            if self.cache.contains_key(&top) {
                stack.pop();
                continue;
            }
            let e = expand(top);
            let before = stack.len();
            for d in e.direct.iter().chain(e.exchange.iter().map(|(_, d)| d)) {
                if let Resolved::Key(k) = d {
                    if !self.cache.contains_key(k) {
                        stack.push(*k);
                    }
                }
            }
            if stack.len() > before {
                continue;
            }
            let v = self.combine(&e);
            if !v.is_finite() {
                return Err(CbError::Overflow(top));
            }
            if self.cache.len() >= self.budget {
                return Err(CbError::BudgetExceeded(self.budget));
            }
            self.cache.insert(top, v);
            stack.pop();
        }
        Ok(self.cache.get(&root).expect("root evaluated").value().clone())
    }

    fn get(&self, r: Resolved) -> Result<S, CbError> {
        match r {
            Resolved::Zero => Ok(S::zero()),
            Resolved::One => Ok(S::one()),
            Resolved::Key(k) => self.evaluate(k),
        }
    }

    /// K(n, m, s, r). Keys violating the selection rule are exactly zero.
    pub fn k(&self, n: i64, m: i64, s: i64, r: i64) -> Result<S, CbError> {
        self.get(resolve(CorrelatorKey::new(n, m, s, r)))
    }

    pub fn k_key(&self, key: CorrelatorKey) -> Result<S, CbError> {
        self.get(resolve(key))
    }

    pub fn value(&self, key: CorrelatorKey) -> Result<CorrelatorValue<S>, CbError> {
        self.k_key(key).map(CorrelatorValue::new)
    }

    /// f_m^n = (n/m) K(m−1, n+1, m, n−1) + K(m−1, n+1, m−1, n), with `sub = m ≥ 1`, `sup = n ≥ 0`.
    pub fn f(&self, sub: u64, sup: u64) -> Result<S, CbError> {
        if sub == 0 {
            return Err(CbError::InvalidIndex("f_m^n needs m >= 1".into()));
        }
        let (m, n) = (sub as i64, sup as i64);
        let mut v = self.k(m - 1, n + 1, m - 1, n)?;
        if sup > 0 {
            v = S::ratio(sup, sub) * self.k(m - 1, n + 1, m, n - 1)? + v;
        }
        Ok(v)
    }

    /// K(n, m, n, m−1), the matter factor of the polariton normalizations.
    pub fn norm(&self, n: u64, m: u64) -> Result<S, CbError> {
        let (n, m) = (n as i64, m as i64);
        self.k(n, m, n, m - 1)
    }
}

impl<S: CorrelatorScalar> fmt::Debug for Correlators<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Correlators")
            .field("n_electrons", &self.n_electrons)
            .field("mode", &S::MODE)
            .field("cached", &self.cache.len())
            .finish()
    }
}

/// Every key with `n + m = total` obeying the selection rule (s, r ≥ 0).
pub fn valid_keys(total: i64) -> impl Iterator<Item = CorrelatorKey> {
    (0..=total).flat_map(move |n| (0..total).map(move |s| CorrelatorKey::new(n, total - n, s, total - 1 - s)))
}
