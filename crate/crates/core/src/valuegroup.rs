//! Exact values in a finitely generated ordered subgroup of the reals.
//!
//! A [`BasisSpec`] fixes real algebraic numbers `a_1, ..., a_n`, assumed linearly
//! independent over the rationals. A [`Value`] is a rational coordinate vector
//! over that basis, or the symbol infinity. Equality is structural; order is
//! decided by isolating intervals refined on demand, never by floating point.

use std::cmp::Ordering;
use std::fmt;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rationals used throughout the crate.
pub type Q = BigRational;

/// Bits of precision of the first cached dyadic enclosure.
const BASE_BITS: u32 = 128;
/// Comparisons give up after this many bits of refinement.
const DEFAULT_BUDGET_BITS: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("comparison undecided after {0} bits of refinement")]
    RefinementBudgetExceeded(u32),
    #[error("invalid algebraic real: {0}")]
    InvalidAlgebraic(String),
    #[error("coordinate vector of length {got} does not match basis of dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a basis needs at least one element")]
    EmptyBasis,
}

/// Builds the rational `n/d`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn poly_eval(coeffs: &[BigInt], x: &Q) -> Q {
    let mut acc = Q::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + Q::from_integer(c.clone());
    }
    acc
}

fn qpoly_trim(p: &mut Vec<Q>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn qpoly_rem(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = &b[db];
    while r.len() > db {
        let k = r.len() - 1;
        let f = &r[k] / lead;
        for (i, bc) in b.iter().enumerate() {
            let idx = k - db + i;
            r[idx] = &r[idx] - &f * bc;
        }
        r.pop();
        qpoly_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    qpoly_trim(&mut r);
    r
}

fn qpoly_eval(p: &[Q], x: &Q) -> Q {
    let mut acc = Q::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Number of distinct real roots in the half-open interval `(lo, hi]`, by Sturm's theorem.
fn sturm_count(coeffs: &[BigInt], lo: &Q, hi: &Q) -> usize {
    let mut p0: Vec<Q> = coeffs.iter().map(|c| Q::from_integer(c.clone())).collect();
    qpoly_trim(&mut p0);
    if p0.len() < 2 {
        return 0;
    }
    let p1: Vec<Q> = p0
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * qi(i as i64))
        .collect();
    let mut seq = vec![p0, p1];
    loop {
        let n = seq.len();
        if seq[n - 1].len() < 2 {
            break;
        }
        let r = qpoly_rem(&seq[n - 2], &seq[n - 1]);
        if r.is_empty() {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
    }
    let variations = |x: &Q| {
        let signs: Vec<i32> = seq
            .iter()
            .map(|p| {
                let v = qpoly_eval(p, x);
                if v.is_positive() {
                    1
                } else if v.is_negative() {
                    -1
                } else {
                    0
                }
            })
            .filter(|s| *s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    variations(lo).saturating_sub(variations(hi))
}

/// A real algebraic number given by an integer polynomial and an isolating interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraicReal {
    minpoly: Vec<BigInt>,
    lo: Q,
    hi: Q,
}

impl AlgebraicReal {
    /// `minpoly` lists coefficients from the constant term upward. The interval
    /// `[lo, hi]` must contain exactly one root of it.
    pub fn new(minpoly: Vec<BigInt>, lo: Q, hi: Q) -> Result<Self, ValueError> {
        if minpoly.len() < 2 || minpoly.last().is_some_and(|c| c.is_zero()) {
            return Err(ValueError::InvalidAlgebraic(
                "polynomial must have positive degree and nonzero leading coefficient".into(),
            ));
        }
        if lo > hi {
            return Err(ValueError::InvalidAlgebraic("empty interval".into()));
        }
        if lo == hi {
            if !poly_eval(&minpoly, &lo).is_zero() {
                return Err(ValueError::InvalidAlgebraic(
                    "degenerate interval is not a root".into(),
                ));
            }
            return Ok(Self { minpoly, lo, hi });
        }
        let at_lo = poly_eval(&minpoly, &lo).is_zero();
        let inner = sturm_count(&minpoly, &lo, &hi) + usize::from(at_lo);
        if inner != 1 {
            return Err(ValueError::InvalidAlgebraic(format!(
                "interval contains {inner} roots, expected exactly one"
            )));
        }
        if at_lo {
            return Ok(Self {
                minpoly,
                hi: lo.clone(),
                lo,
            });
        }
        Ok(Self { minpoly, lo, hi })
    }

    /// The rational number `r` as a degree one algebraic number.
    pub fn rational(r: Q) -> Self {
        Self {
            minpoly: vec![-r.numer().clone(), r.denom().clone()],
            lo: r.clone(),
            hi: r,
        }
    }

    /// The positive square root of the non-square integer `n`.
    pub fn sqrt(n: u64) -> Result<Self, ValueError> {
        let r = num_integer::Roots::sqrt(&n);
        if r * r == n {
            return Ok(Self::rational(qi(r as i64)));
        }
        Self::new(
            vec![-BigInt::from(n), BigInt::zero(), BigInt::one()],
            qi(r as i64),
            qi(r as i64 + 1),
        )
    }

    pub fn minpoly(&self) -> &[BigInt] {
        &self.minpoly
    }

    pub fn interval(&self) -> (&Q, &Q) {
        (&self.lo, &self.hi)
    }

    pub fn as_rational(&self) -> Option<&Q> {
        (self.lo == self.hi).then_some(&self.lo)
    }

    /// Halves the isolating interval.
    pub fn refine(&mut self) {
        if self.lo == self.hi {
            return;
        }
        let mid = (&self.lo + &self.hi) / qi(2);
        let pm = poly_eval(&self.minpoly, &mid);
        if pm.is_zero() {
            self.lo = mid.clone();
            self.hi = mid;
            return;
        }
        let plo = poly_eval(&self.minpoly, &self.lo);
        if plo.is_zero() {
            self.hi = self.lo.clone();
            return;
        }
        if plo.signum() == pm.signum() {
            self.lo = mid;
        } else {
            self.hi = mid;
        }
    }

    /// Integers `(a, b)` with `a / 2^bits <= self <= b / 2^bits`.
    pub fn dyadic_bounds(&self, bits: u32) -> (BigInt, BigInt) {
        let scale = Q::from_integer(BigInt::one() << bits);
        if let Some(r) = self.as_rational() {
            let s = r * &scale;
            return (s.floor().to_integer(), s.ceil().to_integer());
        }
        let mut me = self.clone();
        let target = Q::new(BigInt::one(), BigInt::one() << bits);
        while &me.hi - &me.lo > target {
            me.refine();
        }
        (
            (&me.lo * &scale).floor().to_integer(),
            (&me.hi * &scale).ceil().to_integer(),
        )
    }

    pub fn to_f64(&self) -> f64 {
        let (a, b) = self.dyadic_bounds(64);
        let s = Q::new(a + b, BigInt::one() << 65);
        s.to_f64().unwrap_or(f64::NAN)
    }
}

/// Cached dyadic enclosures of all basis elements at a fixed number of bits.
#[derive(Debug, Clone)]
struct Enclosure {
    bits: u32,
    bounds: Vec<(BigInt, BigInt)>,
}

/// The fixed reference basis of the value group.
#[derive(Debug)]
pub struct BasisSpec {
    elements: Vec<AlgebraicReal>,
    rational: Option<Vec<Q>>,
    budget_bits: u32,
    cache: RwLock<Vec<Enclosure>>,
}

impl Clone for BasisSpec {
    fn clone(&self) -> Self {
        Self {
            elements: self.elements.clone(),
            rational: self.rational.clone(),
            budget_bits: self.budget_bits,
            cache: RwLock::new(self.cache.read().map(|c| c.clone()).unwrap_or_default()),
        }
    }
}

impl PartialEq for BasisSpec {
    fn eq(&self, other: &Self) -> bool {
        self.elements == other.elements
    }
}

impl BasisSpec {
    /// Linear independence over the rationals is a precondition the caller declares.
    pub fn new(elements: Vec<AlgebraicReal>) -> Result<Self, ValueError> {
        if elements.is_empty() {
            return Err(ValueError::EmptyBasis);
        }
        let rational = elements
            .iter()
            .map(|e| e.as_rational().cloned())
            .collect::<Option<Vec<_>>>();
        let first = Enclosure {
            bits: BASE_BITS,
            bounds: elements.iter().map(|e| e.dyadic_bounds(BASE_BITS)).collect(),
        };
        Ok(Self {
            elements,
            rational,
            budget_bits: DEFAULT_BUDGET_BITS,
            cache: RwLock::new(vec![first]),
        })
    }

    /// A basis made of rational numbers, so every comparison is exact arithmetic.
    pub fn rational(values: Vec<Q>) -> Result<Self, ValueError> {
        Self::new(values.into_iter().map(AlgebraicReal::rational).collect())
    }

    /// The basis `(1)`: values are plain rationals.
    pub fn unit() -> Self {
        Self::rational(vec![Q::one()]).expect("non-empty")
    }

    pub fn with_budget(mut self, bits: u32) -> Self {
        self.budget_bits = bits.max(BASE_BITS);
        self
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[AlgebraicReal] {
        &self.elements
    }

    pub fn is_rational(&self) -> bool {
        self.rational.is_some()
    }

    fn enclosure(&self, bits: u32) -> Enclosure {
        if let Ok(cache) = self.cache.read() {
            if let Some(e) = cache.iter().find(|e| e.bits == bits) {
                return e.clone();
            }
        }
        let e = Enclosure {
            bits,
            bounds: self.elements.iter().map(|a| a.dyadic_bounds(bits)).collect(),
        };
        if let Ok(mut cache) = self.cache.write() {
            cache.push(e.clone());
        }
        e
    }

    fn check_dim(&self, v: &[Q]) -> Result<(), ValueError> {
        if v.len() != self.dim() {
            return Err(ValueError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Sign of `sum c_i a_i + offset` where `offset` is rational.
    fn sign_of(&self, c: &[Q], offset: &Q) -> Result<Ordering, ValueError> {
        self.check_dim(c)?;
        if let Some(rat) = &self.rational {
            let s = c.iter().zip(rat).fold(offset.clone(), |acc, (x, a)| acc + x * a);
            return Ok(s.cmp(&Q::zero()));
        }
        if offset.is_zero() && c.iter().all(|x| x.is_zero()) {
            return Ok(Ordering::Equal);
        }
        // Clear denominators so the enclosure is integer arithmetic.
        let l = c
            .iter()
            .fold(offset.denom().clone(), |acc, x| acc.lcm(x.denom()));
        let n: Vec<BigInt> = c
            .iter()
            .map(|x| x.numer() * (&l / x.denom()))
            .collect();
        let off = offset.numer() * (&l / offset.denom());
        let mut bits = BASE_BITS;
        loop {
            let enc = self.enclosure(bits);
            let mut low = &off << bits;
            let mut high = low.clone();
            for (ni, (a, b)) in n.iter().zip(&enc.bounds) {
                if ni.is_positive() {
                    low += ni * a;
                    high += ni * b;
                } else if ni.is_negative() {
                    low += ni * b;
                    high += ni * a;
                }
            }
            if low.is_positive() {
                return Ok(Ordering::Greater);
            }
            if high.is_negative() {
                return Ok(Ordering::Less);
            }
            if low.is_zero() && high.is_zero() {
                return Ok(Ordering::Equal);
            }
            if bits >= self.budget_bits {
                return Err(ValueError::RefinementBudgetExceeded(bits));
            }
            bits = (bits * 2).min(self.budget_bits);
        }
    }

    /// Total order on values; infinity is the maximum.
    pub fn cmp(&self, v: &Value, w: &Value) -> Result<Ordering, ValueError> {
        match (v, w) {
            (Value::Infinity, Value::Infinity) => Ok(Ordering::Equal),
            (Value::Infinity, _) => Ok(Ordering::Greater),
            (_, Value::Infinity) => Ok(Ordering::Less),
            (Value::Finite(a), Value::Finite(b)) => {
                self.check_dim(a)?;
                self.check_dim(b)?;
                if a == b {
                    return Ok(Ordering::Equal);
                }
                let d: Vec<Q> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
                self.sign_of(&d, &Q::zero())
            }
        }
    }

    pub fn lt(&self, v: &Value, w: &Value) -> Result<bool, ValueError> {
        Ok(self.cmp(v, w)? == Ordering::Less)
    }

    pub fn le(&self, v: &Value, w: &Value) -> Result<bool, ValueError> {
        Ok(self.cmp(v, w)? != Ordering::Greater)
    }

    pub fn min(&self, v: &Value, w: &Value) -> Result<Value, ValueError> {
        Ok(if self.le(v, w)? { v.clone() } else { w.clone() })
    }

    pub fn max(&self, v: &Value, w: &Value) -> Result<Value, ValueError> {
        Ok(if self.le(v, w)? { w.clone() } else { v.clone() })
    }

    /// Compares a finite value with the rational number `r`.
    pub fn cmp_rational(&self, v: &Value, r: &Q) -> Result<Ordering, ValueError> {
        match v {
            Value::Infinity => Ok(Ordering::Greater),
            Value::Finite(c) => self.sign_of(c, &-r),
        }
    }

    /// The sign of a value: compares it with zero.
    pub fn signum(&self, v: &Value) -> Result<Ordering, ValueError> {
        self.cmp_rational(v, &Q::zero())
    }

    /// A rational enclosure `[lo, hi]` of a finite value, at `bits` of precision.
    pub fn enclose(&self, v: &Value, bits: u32) -> Option<(Q, Q)> {
        let c = v.coords()?;
        if let Some(rat) = &self.rational {
            let s = c.iter().zip(rat).fold(Q::zero(), |acc, (x, a)| acc + x * a);
            return Some((s.clone(), s));
        }
        let enc = self.enclosure(bits);
        let den = Q::from_integer(BigInt::one() << enc.bits);
        let mut lo = Q::zero();
        let mut hi = Q::zero();
        for (x, (a, b)) in c.iter().zip(&enc.bounds) {
            let qa = Q::from_integer(a.clone()) / &den;
            let qb = Q::from_integer(b.clone()) / &den;
            if x.is_positive() {
                lo += x * qa;
                hi += x * qb;
            } else {
                lo += x * qb;
                hi += x * qa;
            }
        }
        Some((lo, hi))
    }

    /// The real number represented, for display and plotting only.
    pub fn to_f64(&self, v: &Value) -> f64 {
        match self.enclose(v, BASE_BITS) {
            None => f64::INFINITY,
            Some((lo, hi)) => ((lo + hi) / qi(2)).to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Smallest integer `n >= 0` with `n * step > v`, for finite `v` and positive `step`.
    pub fn steps_above(&self, v: &Value, step: &Value) -> Result<u64, ValueError> {
        let (vlo, _) = self.enclose(v, BASE_BITS).unwrap_or((Q::zero(), Q::zero()));
        let (_, shi) = self.enclose(step, BASE_BITS).unwrap_or((Q::one(), Q::one()));
        let guess = if shi.is_positive() && vlo.is_positive() {
            (vlo / shi).floor().to_integer().to_u64().unwrap_or(0)
        } else {
            0
        };
        let mut n = guess.saturating_sub(1);
        loop {
            let nv = step.scale(&qi(n as i64));
            if self.cmp(&nv, v)? == Ordering::Greater {
                return Ok(n);
            }
            n += 1;
        }
    }

    /// Smallest integer `n` with `n >= x`, where `x` is the real number `v * factor`.
    pub fn ceil_scaled(&self, v: &Value, factor: &Q) -> Result<BigInt, ValueError> {
        let w = v.scale(factor);
        let (lo, hi) = self
            .enclose(&w, BASE_BITS)
            .ok_or(ValueError::RefinementBudgetExceeded(0))?;
        let mut n = lo.ceil().to_integer() - BigInt::one();
        let limit = hi.ceil().to_integer() + BigInt::one();
        while n <= limit {
            if self.cmp_rational(&w, &Q::from_integer(n.clone()))? != Ordering::Greater {
                return Ok(n);
            }
            n += 1;
        }
        Ok(limit)
    }
}

/// An element of the value group, or infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Finite(Vec<Q>),
    Infinity,
}

impl Value {
    pub fn zero(dim: usize) -> Self {
        Value::Finite(vec![Q::zero(); dim])
    }

    /// The `i`-th basis element.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut c = vec![Q::zero(); dim];
        c[i] = Q::one();
        Value::Finite(c)
    }

    pub fn from_coords(c: Vec<Q>) -> Self {
        Value::Finite(c)
    }

    /// Shorthand for one dimensional bases.
    pub fn rat(r: Q) -> Self {
        Value::Finite(vec![r])
    }

    pub fn int(n: i64) -> Self {
        Value::rat(qi(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Value::Infinity)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Value::Finite(c) if c.iter().all(|x| x.is_zero()))
    }

    pub fn coords(&self) -> Option<&[Q]> {
        match self {
            Value::Finite(c) => Some(c),
            Value::Infinity => None,
        }
    }

    pub fn add(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Finite(a), Value::Finite(b)) => {
                Value::Finite(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => Value::Infinity,
        }
    }

    /// `self - other`; infinity minus a finite value stays infinite.
    /// Subtracting infinity is not defined and yields `None`.
    pub fn sub(&self, other: &Value) -> Option<Value> {
        match (self, other) {
            (Value::Finite(a), Value::Finite(b)) => {
                Some(Value::Finite(a.iter().zip(b).map(|(x, y)| x - y).collect()))
            }
            (Value::Infinity, Value::Finite(_)) => Some(Value::Infinity),
            _ => None,
        }
    }

    pub fn neg(&self) -> Value {
        match self {
            Value::Finite(a) => Value::Finite(a.iter().map(|x| -x).collect()),
            Value::Infinity => Value::Infinity,
        }
    }

    /// Scalar multiple. Infinity times a positive scalar is infinity and
    /// infinity times zero is treated as infinity as well.
    pub fn scale(&self, r: &Q) -> Value {
        match self {
            Value::Finite(a) => Value::Finite(a.iter().map(|x| x * r).collect()),
            Value::Infinity => {
                assert!(!r.is_negative(), "negative multiple of infinity");
                Value::Infinity
            }
        }
    }

    pub fn scale_int(&self, n: i64) -> Value {
        self.scale(&qi(n))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Infinity => write!(f, "inf"),
            Value::Finite(c) => {
                write!(f, "(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_basis() -> BasisSpec {
        BasisSpec::new(vec![
            AlgebraicReal::rational(qi(1)),
            AlgebraicReal::sqrt(2).unwrap(),
            AlgebraicReal::sqrt(3).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn isolating_interval_must_hold_one_root() {
        let p = vec![BigInt::from(-2), BigInt::zero(), BigInt::one()];
        assert!(AlgebraicReal::new(p.clone(), qi(-2), qi(2)).is_err());
        assert!(AlgebraicReal::new(p.clone(), qi(1), qi(2)).is_ok());
        assert!(AlgebraicReal::new(p, qi(2), qi(3)).is_err());
    }

    #[test]
    fn sqrt_two_enclosure_is_tight() {
        let a = AlgebraicReal::sqrt(2).unwrap();
        let (lo, hi) = a.dyadic_bounds(64);
        let l2 = &lo * &lo;
        let h2 = &hi * &hi;
        let two = BigInt::from(2) << 128;
        assert!(l2 <= two && two <= h2);
        assert!(&hi - &lo <= BigInt::from(2));
    }

    #[test]
    fn irrational_comparison() {
        let b = sqrt_basis();
        // sqrt2 - 1 < 1/2 since sqrt2 < 3/2
        let v = Value::Finite(vec![qi(-1), qi(1), qi(0)]);
        let w = Value::Finite(vec![q(1, 2), qi(0), qi(0)]);
        assert_eq!(b.cmp(&v, &w).unwrap(), Ordering::Less);
        // sqrt3 > sqrt2
        assert_eq!(
            b.cmp(&Value::unit(3, 2), &Value::unit(3, 1)).unwrap(),
            Ordering::Greater
        );
        // 140/99 < sqrt2 < 577/408 distinguishes tight rational neighbours
        assert_eq!(
            b.cmp(&Value::Finite(vec![q(140, 99), qi(0), qi(0)]), &Value::unit(3, 1))
                .unwrap(),
            Ordering::Less
        );
        assert_eq!(
            b.cmp(&Value::Finite(vec![q(577, 408), qi(0), qi(0)]), &Value::unit(3, 1))
                .unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn infinity_is_maximal() {
        let b = BasisSpec::unit();
        assert_eq!(b.cmp(&Value::Infinity, &Value::int(7)).unwrap(), Ordering::Greater);
        assert_eq!(b.cmp(&Value::Infinity, &Value::Infinity).unwrap(), Ordering::Equal);
    }

    #[test]
    fn dependent_basis_exhausts_budget() {
        let b = BasisSpec::new(vec![
            AlgebraicReal::sqrt(2).unwrap(),
            AlgebraicReal::sqrt(8).unwrap(),
        ])
        .unwrap()
        .with_budget(256);
        let v = Value::Finite(vec![qi(2), qi(0)]);
        let w = Value::Finite(vec![qi(0), qi(1)]);
        assert!(matches!(
            b.cmp(&v, &w),
            Err(ValueError::RefinementBudgetExceeded(_))
        ));
    }

    #[test]
    fn steps_and_ceil() {
        let b = BasisSpec::unit();
        assert_eq!(b.steps_above(&Value::int(3), &Value::int(1)).unwrap(), 4);
        assert_eq!(b.steps_above(&Value::rat(q(5, 2)), &Value::int(1)).unwrap(), 3);
        assert_eq!(
            b.ceil_scaled(&Value::rat(q(5, 2)), &qi(1)).unwrap(),
            BigInt::from(3)
        );
        let s = sqrt_basis();
        // ceil(10 * sqrt2) = 15
        assert_eq!(
            s.ceil_scaled(&Value::unit(3, 1), &qi(10)).unwrap(),
            BigInt::from(15)
        );
    }
}
