//! Truncated power series in independent parameters `x_1..x_r` and dependent
//! parameters `y_1..y_m`.
//!
//! Precision is a single bound `B` on the monomial weight
//! `w(x^I y^J) = nu(x^I) + sum_j J_j w_j`, where `w_j` is a positive lower
//! bound for the value of `y_j`. Every monomial of weight at most `B` has its
//! coefficient stored exactly (absent means zero); nothing is claimed above `B`.
//! Since a monomial's weight never exceeds its value at the center, the
//! unknown remainder always has value greater than `B`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::valuegroup::{qi, BasisSpec, Value, ValueError, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("operands live in different parameter rings")]
    RingMismatch,
    #[error("series is not a unit: its constant term vanishes")]
    NotAUnit,
    #[error("operation needs a finite precision bound")]
    Unbounded,
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("malformed ring: {0}")]
    MalformedRing(String),
}

/// Values of the independent parameters and weights of the dependent ones.
#[derive(Debug, Clone)]
pub struct Ring {
    basis: Arc<BasisSpec>,
    x_values: Vec<Value>,
    y_weights: Vec<Value>,
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        self.x_values == other.x_values
            && self.y_weights == other.y_weights
            && (Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis)
    }
}

pub type RingRef = Arc<Ring>;

impl Ring {
    /// Every value must be finite and strictly positive.
    pub fn new(
        basis: Arc<BasisSpec>,
        x_values: Vec<Value>,
        y_weights: Vec<Value>,
    ) -> Result<RingRef, SeriesError> {
        for v in x_values.iter().chain(&y_weights) {
            match v.coords() {
                None => return Err(SeriesError::MalformedRing("infinite value".into())),
                Some(c) if c.len() != basis.dim() => {
                    return Err(SeriesError::MalformedRing("dimension mismatch".into()))
                }
                _ => {}
            }
            if basis.signum(v)? != Ordering::Greater {
                return Err(SeriesError::MalformedRing("values must be positive".into()));
            }
        }
        Ok(Arc::new(Self {
            basis,
            x_values,
            y_weights,
        }))
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn r(&self) -> usize {
        self.x_values.len()
    }

    pub fn m(&self) -> usize {
        self.y_weights.len()
    }

    pub fn x_values(&self) -> &[Value] {
        &self.x_values
    }

    pub fn y_weights(&self) -> &[Value] {
        &self.y_weights
    }

    pub fn zero_value(&self) -> Value {
        Value::zero(self.basis.dim())
    }

    /// `nu(x^I)`.
    pub fn x_value(&self, x: &[u32]) -> Value {
        let mut acc = vec![Q::zero(); self.basis.dim()];
        for (e, v) in x.iter().zip(&self.x_values) {
            if *e == 0 {
                continue;
            }
            let c = v.coords().expect("finite x value");
            let e = qi(*e as i64);
            for (a, b) in acc.iter_mut().zip(c) {
                *a += &e * b;
            }
        }
        Value::Finite(acc)
    }

    /// Weight of a monomial: its x-value plus the weighted y-degree.
    pub fn weight(&self, m: &Mono) -> Value {
        let mut acc = self.x_value(&m.x);
        if let Value::Finite(acc) = &mut acc {
            for (e, v) in m.y.iter().zip(&self.y_weights) {
                if *e == 0 {
                    continue;
                }
                let c = v.coords().expect("finite y weight");
                let e = qi(*e as i64);
                for (a, b) in acc.iter_mut().zip(c) {
                    *a += &e * b;
                }
            }
        }
        acc
    }

    pub fn same(a: &RingRef, b: &RingRef) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Exponent pair `(I, J)` of a monomial `x^I y^J`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
}

impl Mono {
    pub fn one(r: usize, m: usize) -> Self {
        Self {
            x: vec![0; r],
            y: vec![0; m],
        }
    }

    pub fn new(x: Vec<u32>, y: Vec<u32>) -> Self {
        Self { x, y }
    }

    pub fn x_var(r: usize, m: usize, i: usize) -> Self {
        let mut s = Self::one(r, m);
        s.x[i] = 1;
        s
    }

    pub fn y_var(r: usize, m: usize, j: usize) -> Self {
        let mut s = Self::one(r, m);
        s.y[j] = 1;
        s
    }

    pub fn is_one(&self) -> bool {
        self.x.iter().chain(&self.y).all(|e| *e == 0)
    }

    pub fn y_degree(&self) -> u32 {
        self.y.iter().sum()
    }

    pub fn is_y_free(&self) -> bool {
        self.y.iter().all(|e| *e == 0)
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        Mono {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Mono) -> Option<Mono> {
        let x = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()?;
        let y = self
            .y
            .iter()
            .zip(&other.y)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()?;
        Some(Mono { x, y })
    }
}

/// Outcome of the finality test at a threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Finality {
    /// Dominant: the initial part at this explicit value is nonzero.
    DominantAt(Value),
    /// Explicit value above the threshold.
    Recessive,
    NotFinal,
}

impl Finality {
    pub fn is_final(&self) -> bool {
        !matches!(self, Finality::NotFinal)
    }
}

/// A power series known below a weight bound.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    ring: RingRef,
    terms: BTreeMap<Mono, Q>,
    bound: Value,
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        Ring::same(&self.ring, &other.ring) && self.terms == other.terms && self.bound == other.bound
    }
}

/// Minimum of two values under the ring's basis.
pub(crate) fn vmin(b: &BasisSpec, x: &Value, y: &Value) -> Result<Value, SeriesError> {
    Ok(b.min(x, y)?)
}

impl TruncatedSeries {
    /// Builds a series and drops every term above `bound`.
    pub fn new(
        ring: RingRef,
        terms: impl IntoIterator<Item = (Mono, Q)>,
        bound: Value,
    ) -> Result<Self, SeriesError> {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.x.len() != ring.r() || m.y.len() != ring.m() {
                return Err(SeriesError::MalformedRing("monomial arity".into()));
            }
            if c.is_zero() {
                continue;
            }
            let e = map.entry(m).or_insert_with(Q::zero);
            *e += c;
        }
        map.retain(|_, c| !c.is_zero());
        let mut s = Self {
            ring,
            terms: map,
            bound,
        };
        s.drop_above_bound()?;
        Ok(s)
    }

    pub fn exact(ring: RingRef, terms: impl IntoIterator<Item = (Mono, Q)>) -> Result<Self, SeriesError> {
        Self::new(ring, terms, Value::Infinity)
    }

    pub fn zero(ring: RingRef) -> Self {
        Self {
            ring,
            terms: BTreeMap::new(),
            bound: Value::Infinity,
        }
    }

    pub fn constant(ring: RingRef, c: Q) -> Self {
        let m = Mono::one(ring.r(), ring.m());
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self {
            ring,
            terms,
            bound: Value::Infinity,
        }
    }

    pub fn one(ring: RingRef) -> Self {
        Self::constant(ring, Q::one())
    }

    pub fn monomial(ring: RingRef, m: Mono, c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self {
            ring,
            terms,
            bound: Value::Infinity,
        }
    }

    pub fn x_var(ring: RingRef, i: usize) -> Self {
        let m = Mono::x_var(ring.r(), ring.m(), i);
        Self::monomial(ring, m, Q::one())
    }

    pub fn y_var(ring: RingRef, j: usize) -> Self {
        let m = Mono::y_var(ring.r(), ring.m(), j);
        Self::monomial(ring, m, Q::one())
    }

    /// Same terms and bound, reinterpreted in another ring of the same arity.
    /// Callers guarantee the weight claim still holds in `ring`.
    pub fn rebase(self, ring: RingRef) -> Self {
        Self {
            ring,
            terms: self.terms,
            bound: self.bound,
        }
    }

    fn drop_above_bound(&mut self) -> Result<(), SeriesError> {
        if self.bound.is_infinite() {
            return Ok(());
        }
        let ring = self.ring.clone();
        let b = ring.basis();
        let mut err = None;
        self.terms.retain(|m, _| {
            if err.is_some() {
                return true;
            }
            match b.le(&ring.weight(m), &self.bound) {
                Ok(keep) => keep,
                Err(e) => {
                    err = Some(e);
                    true
                }
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    pub fn ring(&self) -> &RingRef {
        &self.ring
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        self.ring.basis()
    }

    pub fn terms(&self) -> &BTreeMap<Mono, Q> {
        &self.terms
    }

    pub fn bound(&self) -> &Value {
        &self.bound
    }

    pub fn is_exact(&self) -> bool {
        self.bound.is_infinite()
    }

    /// No known nonzero term.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Mono) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn constant_term(&self) -> Q {
        self.coeff(&Mono::one(self.ring.r(), self.ring.m()))
    }

    fn check_ring(&self, other: &Self) -> Result<(), SeriesError> {
        if Ring::same(&self.ring, &other.ring) {
            Ok(())
        } else {
            Err(SeriesError::RingMismatch)
        }
    }

    /// Lowers the bound to `min(bound, b)` and drops the terms above it.
    pub fn truncate(&self, b: &Value) -> Result<Self, SeriesError> {
        let bound = vmin(self.basis(), &self.bound, b)?;
        let mut s = Self {
            ring: self.ring.clone(),
            terms: self.terms.clone(),
            bound,
        };
        s.drop_above_bound()?;
        Ok(s)
    }

    pub fn with_bound_at_most(mut self, b: &Value) -> Result<Self, SeriesError> {
        self.bound = vmin(self.basis(), &self.bound, b)?;
        self.drop_above_bound()?;
        Ok(self)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_ring(other)?;
        let bound = vmin(self.basis(), &self.bound, &other.bound)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let e = terms.entry(m.clone()).or_insert_with(Q::zero);
            *e += c;
        }
        terms.retain(|_, c| !c.is_zero());
        let mut s = Self {
            ring: self.ring.clone(),
            terms,
            bound,
        };
        s.drop_above_bound()?;
        Ok(s)
    }

    pub fn neg(&self) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            bound: self.bound.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.ring.clone());
        }
        Self {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
            bound: self.bound.clone(),
        }
    }

    /// Smallest weight that any term of the true series can have.
    pub fn weight_floor(&self) -> Result<Value, SeriesError> {
        let b = self.basis();
        let mut best = self.bound.clone();
        for m in self.terms.keys() {
            let w = self.ring.weight(m);
            if b.lt(&w, &best)? {
                best = w;
            }
        }
        Ok(best)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_ring(other)?;
        let b = self.basis().clone();
        let floor_f = self.weight_floor()?;
        let floor_g = other.weight_floor()?;
        let bound = vmin(
            &b,
            &self.bound.add(&floor_g),
            &other.bound.add(&floor_f),
        )?;
        let wf: Vec<(&Mono, &Q, Value)> = self
            .terms
            .iter()
            .map(|(m, c)| (m, c, self.ring.weight(m)))
            .collect();
        let wg: Vec<(&Mono, &Q, Value)> = other
            .terms
            .iter()
            .map(|(m, c)| (m, c, self.ring.weight(m)))
            .collect();
        let mut terms: BTreeMap<Mono, Q> = BTreeMap::new();
        for (mf, cf, vf) in &wf {
            if !bound.is_infinite() && b.cmp(vf, &bound)? == Ordering::Greater {
                continue;
            }
            for (mg, cg, vg) in &wg {
                if !bound.is_infinite() && b.cmp(&vf.add(vg), &bound)? == Ordering::Greater {
                    continue;
                }
                let e = terms.entry(mf.mul(mg)).or_insert_with(Q::zero);
                *e += *cf * *cg;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Self {
            ring: self.ring.clone(),
            terms,
            bound,
        })
    }

    pub fn mul_monomial(&self, m: &Mono, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.ring.clone());
        }
        let w = self.ring.weight(m);
        Self {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, a)| (k.mul(m), a * c))
                .collect(),
            bound: self.bound.add(&w),
        }
    }

    pub fn pow(&self, n: u32) -> Result<Self, SeriesError> {
        let mut acc = Self::one(self.ring.clone());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Multiplicative inverse of a unit, known up to `min(bound, cap)`.
    pub fn invert_unit(&self, cap: &Value) -> Result<Self, SeriesError> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(SeriesError::NotAUnit);
        }
        let inv0 = Q::one() / &c0;
        // self = c0 (1 + u); 1/self = inv0 * sum (-u)^k.
        let mut u = self.scale(&inv0);
        u.terms.remove(&Mono::one(self.ring.r(), self.ring.m()));
        let bound = vmin(self.basis(), &self.bound, cap)?;
        if u.terms.is_empty() {
            return Self::constant(self.ring.clone(), inv0).with_bound_at_most(&bound);
        }
        if bound.is_infinite() {
            return Err(SeriesError::Unbounded);
        }
        let u = u.with_bound_at_most(&bound)?;
        let neg_u = u.neg();
        let mut acc = Self::one(self.ring.clone()).with_bound_at_most(&bound)?;
        let mut power = acc.clone();
        loop {
            power = power.mul(&neg_u)?.with_bound_at_most(&bound)?;
            if power.terms.is_empty() {
                break;
            }
            acc = acc.add(&power)?;
        }
        Ok(acc.scale(&inv0).with_bound_at_most(&bound)?)
    }

    /// `x_i d/dx_i`: weights unchanged.
    pub fn log_deriv_x(&self, i: usize) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.x[i] > 0)
                .map(|(m, c)| (m.clone(), c * qi(m.x[i] as i64)))
                .collect(),
            bound: self.bound.clone(),
        }
    }

    /// `d/dy_j`. The bound drops by the weight of `y_j`.
    pub fn deriv_y(&self, j: usize) -> Self {
        let w = &self.ring.y_weights()[j];
        let bound = self.bound.sub(w).unwrap_or(Value::Infinity);
        Self {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.y[j] > 0)
                .map(|(m, c)| {
                    let mut k = m.clone();
                    k.y[j] -= 1;
                    (k, c * qi(m.y[j] as i64))
                })
                .collect(),
            bound,
        }
    }

    /// Terms whose x-part is exactly `x`, as a series.
    pub fn x_block(&self, x: &[u32]) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.x == x)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            bound: self.bound.clone(),
        }
    }

    /// Distinct x-parts of the known terms.
    pub fn x_support(&self) -> Vec<Vec<u32>> {
        let mut v: Vec<Vec<u32>> = self.terms.keys().map(|m| m.x.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Highest index `j + 1` of a dependent parameter that occurs, 0 if none.
    pub fn y_index(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|m| m.y.iter().rposition(|e| *e > 0))
            .max()
            .map_or(0, |j| j + 1)
    }

    /// Explicit value: the least x-value over the known terms, infinity if none.
    pub fn explicit_value(&self) -> Result<Value, SeriesError> {
        let b = self.basis();
        let mut best = Value::Infinity;
        for x in self.x_support() {
            let v = self.ring.x_value(&x);
            if b.lt(&v, &best)? {
                best = v;
            }
        }
        Ok(best)
    }

    /// The x-part of least value and that value, if any term is known.
    pub fn minimal_x_part(&self) -> Result<Option<(Vec<u32>, Value)>, SeriesError> {
        let b = self.basis();
        let mut best: Option<(Vec<u32>, Value)> = None;
        for x in self.x_support() {
            let v = self.ring.x_value(&x);
            let better = match &best {
                None => true,
                Some((_, bv)) => b.lt(&v, bv)?,
            };
            if better {
                best = Some((x, v));
            }
        }
        Ok(best)
    }

    /// Dominant, recessive or neither, relative to `gamma`.
    ///
    /// The decision reads only the known window, so the bound must reach `gamma`.
    pub fn finality(&self, gamma: &Value) -> Result<Finality, SeriesError> {
        let b = self.basis();
        if b.lt(&self.bound, gamma)? {
            return Err(SeriesError::InsufficientPrecision(format!(
                "series known to weight {} but finality asked at {}",
                self.bound, gamma
            )));
        }
        match self.minimal_x_part()? {
            None => Ok(Finality::Recessive),
            Some((x, v)) => {
                if b.lt(gamma, &v)? {
                    return Ok(Finality::Recessive);
                }
                let m = Mono::new(x, vec![0; self.ring.m()]);
                if self.terms.contains_key(&m) {
                    Ok(Finality::DominantAt(v))
                } else {
                    Ok(Finality::NotFinal)
                }
            }
        }
    }

    /// Terms with x-value at least `v` removed from the rest: `(low, high)`.
    pub fn split_at_x_value(&self, v: &Value) -> Result<(Self, Self), SeriesError> {
        let b = self.basis();
        let mut low = BTreeMap::new();
        let mut high = BTreeMap::new();
        for (m, c) in &self.terms {
            if b.lt(&self.ring.x_value(&m.x), v)? {
                low.insert(m.clone(), c.clone());
            } else {
                high.insert(m.clone(), c.clone());
            }
        }
        Ok((
            Self {
                ring: self.ring.clone(),
                terms: low,
                bound: self.bound.clone(),
            },
            Self {
                ring: self.ring.clone(),
                terms: high,
                bound: self.bound.clone(),
            },
        ))
    }

    /// Keeps only the terms selected by `keep`; the bound is unchanged.
    pub fn filter(&self, mut keep: impl FnMut(&Mono) -> bool) -> Self {
        Self {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            bound: self.bound.clone(),
        }
    }

    /// Applies `f` to every monomial, summing coincident images.
    pub fn map_monomials(&self, ring: RingRef, mut f: impl FnMut(&Mono) -> Mono, bound: Value) -> Result<Self, SeriesError> {
        Self::new(
            ring,
            self.terms.iter().map(|(m, c)| (f(m), c.clone())),
            bound,
        )
    }

    /// Divides every term by `x^I`, which must divide all of them.
    pub fn div_x_monomial(&self, x: &[u32]) -> Option<Self> {
        let m = Mono::new(x.to_vec(), vec![0; self.ring.m()]);
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            terms.insert(k.div(&m)?, c.clone());
        }
        let w = self.ring.x_value(x);
        Some(Self {
            ring: self.ring.clone(),
            terms,
            bound: self.bound.sub(&w).unwrap_or(Value::Infinity),
        })
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, e) in m.x.iter().enumerate() {
                if *e > 0 {
                    write!(f, "*x{}^{}", i + 1, e)?;
                }
            }
            for (j, e) in m.y.iter().enumerate() {
                if *e > 0 {
                    write!(f, "*y{}^{}", j + 1, e)?;
                }
            }
        }
        if !self.bound.is_infinite() {
            write!(f, " + O(w>{})", self.bound)?;
        }
        Ok(())
    }
}
