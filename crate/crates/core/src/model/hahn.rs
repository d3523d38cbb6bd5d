//! Generalized power series in one variable `t` with exponents in the value group.
//!
//! Terms are kept in increasing exponent order. Precision says which exponents
//! are known: with `inclusive` set, every exponent up to and including `at` is
//! known; otherwise only exponents strictly below `at`.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::series::SeriesError;
use crate::valuegroup::{BasisSpec, Value, ValueError, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HahnPrec {
    pub at: Value,
    pub inclusive: bool,
}

impl HahnPrec {
    pub fn exact() -> Self {
        Self {
            at: Value::Infinity,
            inclusive: true,
        }
    }

    pub fn through(at: Value) -> Self {
        Self { at, inclusive: true }
    }

    pub fn below(at: Value) -> Self {
        Self {
            at,
            inclusive: false,
        }
    }

    /// Whether the exponent `e` lies in the known region.
    pub fn covers(&self, b: &BasisSpec, e: &Value) -> Result<bool, ValueError> {
        let o = b.cmp(e, &self.at)?;
        Ok(o == Ordering::Less || (self.inclusive && o == Ordering::Equal))
    }

    /// The stricter of two precisions.
    pub fn meet(&self, other: &Self, b: &BasisSpec) -> Result<Self, ValueError> {
        match b.cmp(&self.at, &other.at)? {
            Ordering::Less => Ok(self.clone()),
            Ordering::Greater => Ok(other.clone()),
            Ordering::Equal => Ok(Self {
                at: self.at.clone(),
                inclusive: self.inclusive && other.inclusive,
            }),
        }
    }

    /// Shift by a finite value. Known-through (`inclusive`) means the
    /// remainder has order strictly above `at`; `strict` adds strictness.
    fn shifted(&self, v: &Value, strict: bool) -> Self {
        Self {
            at: self.at.add(v),
            inclusive: self.inclusive || strict,
        }
    }
}

/// Lower bound on the order of a series; `strict` means the order exceeds `at`.
#[derive(Clone, Debug)]
struct OrderBound {
    at: Value,
    strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HahnSeries {
    terms: Vec<(Value, Q)>,
    prec: HahnPrec,
}

fn sort_terms(b: &BasisSpec, terms: &mut [(Value, Q)]) -> Result<(), ValueError> {
    let mut err = None;
    terms.sort_by(|x, y| match b.cmp(&x.0, &y.0) {
        Ok(o) => o,
        Err(e) => {
            err = Some(e);
            Ordering::Equal
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

impl HahnSeries {
    /// Collects terms, merges equal exponents and drops what precision does not cover.
    pub fn new(
        b: &BasisSpec,
        terms: impl IntoIterator<Item = (Value, Q)>,
        prec: HahnPrec,
    ) -> Result<Self, ValueError> {
        let mut acc: HashMap<Value, Q> = HashMap::new();
        for (e, c) in terms {
            if c.is_zero() {
                continue;
            }
            *acc.entry(e).or_insert_with(Q::zero) += c;
        }
        let mut v: Vec<(Value, Q)> = Vec::with_capacity(acc.len());
        for (e, c) in acc {
            if !c.is_zero() && prec.covers(b, &e)? {
                v.push((e, c));
            }
        }
        sort_terms(b, &mut v)?;
        Ok(Self { terms: v, prec })
    }

    pub fn exact(b: &BasisSpec, terms: impl IntoIterator<Item = (Value, Q)>) -> Result<Self, ValueError> {
        Self::new(b, terms, HahnPrec::exact())
    }

    /// `c t^e`, exact.
    pub fn monomial(e: Value, c: Q) -> Self {
        Self {
            terms: if c.is_zero() { vec![] } else { vec![(e, c)] },
            prec: HahnPrec::exact(),
        }
    }

    pub fn constant(dim: usize, c: Q) -> Self {
        Self::monomial(Value::zero(dim), c)
    }

    pub fn terms(&self) -> &[(Value, Q)] {
        &self.terms
    }

    pub fn prec(&self) -> &HahnPrec {
        &self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec.at.is_infinite()
    }

    /// Leading exponent and coefficient. Fails when no term is known.
    pub fn leading(&self) -> Result<(&Value, &Q), SeriesError> {
        self.terms.first().map(|(e, c)| (e, c)).ok_or_else(|| {
            SeriesError::InsufficientPrecision(format!(
                "center has no known term below {}",
                self.prec.at
            ))
        })
    }

    /// The order if a term is known, otherwise `None`.
    pub fn order(&self) -> Option<&Value> {
        self.terms.first().map(|(e, _)| e)
    }

    /// A lower bound for the order valid in all cases.
    fn order_bound(&self) -> OrderBound {
        match self.terms.first() {
            Some((e, _)) => OrderBound {
                at: e.clone(),
                strict: false,
            },
            None => OrderBound {
                at: self.prec.at.clone(),
                strict: self.prec.inclusive,
            },
        }
    }

    /// Positive lower bound for the order usable as a weight.
    pub fn order_lower_bound(&self) -> &Value {
        match self.terms.first() {
            Some((e, _)) => e,
            None => &self.prec.at,
        }
    }

    /// Coefficient of `t^e`, if that exponent is known.
    pub fn coeff(&self, b: &BasisSpec, e: &Value) -> Result<Option<Q>, ValueError> {
        if !self.prec.covers(b, e)? {
            return Ok(None);
        }
        Ok(Some(
            self.terms
                .iter()
                .find(|(f, _)| f == e)
                .map(|(_, c)| c.clone())
                .unwrap_or_else(Q::zero),
        ))
    }

    pub fn add(&self, other: &Self, b: &BasisSpec) -> Result<Self, ValueError> {
        let prec = self.prec.meet(&other.prec, b)?;
        Self::new(
            b,
            self.terms.iter().chain(&other.terms).cloned(),
            prec,
        )
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
            prec: self.prec.clone(),
        }
    }

    pub fn sub(&self, other: &Self, b: &BasisSpec) -> Result<Self, ValueError> {
        self.add(&other.neg(), b)
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self {
                terms: vec![],
                prec: HahnPrec::exact(),
            };
        }
        Self {
            terms: self.terms.iter().map(|(e, a)| (e.clone(), a * c)).collect(),
            prec: self.prec.clone(),
        }
    }

    /// Drops terms at or beyond `cap` (exclusive) and records that as precision.
    pub fn truncate_below(&self, cap: &Value, b: &BasisSpec) -> Result<Self, ValueError> {
        let prec = self.prec.meet(&HahnPrec::below(cap.clone()), b)?;
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            if prec.covers(b, e)? {
                terms.push((e.clone(), c.clone()));
            }
        }
        Ok(Self { terms, prec })
    }

    pub fn mul(&self, other: &Self, b: &BasisSpec) -> Result<Self, ValueError> {
        let mut prec = HahnPrec::exact();
        // (a + ea)(c + ec) - a c = ea * (c + ec) + a * ec.
        if !self.prec.at.is_infinite() {
            let ob = other.order_bound();
            prec = prec.meet(&self.prec.shifted(&ob.at, ob.strict), b)?;
        }
        if !other.prec.at.is_infinite() {
            if let Some((e, _)) = self.terms.first() {
                prec = prec.meet(&other.prec.shifted(e, false), b)?;
            }
        }
        let mut acc: HashMap<Value, Q> = HashMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = e1.add(e2);
                *acc.entry(e).or_insert_with(Q::zero) += c1 * c2;
            }
        }
        Self::new(b, acc, prec)
    }

    /// Inverse of a series with a known leading term.
    ///
    /// If the leading exponent is `e` and the input is known below `P`, the
    /// inverse is known below `P - 2e`; `cap` bounds the expansion of exact inputs.
    pub fn inverse(&self, b: &BasisSpec, cap: &Value) -> Result<Self, SeriesError> {
        let (e, c) = self.leading()?;
        let e = e.clone();
        let inv_c = Q::one() / c;
        if self.is_exact() && self.terms.len() == 1 {
            return Ok(Self::monomial(e.neg(), inv_c));
        }
        if self.prec.at.is_infinite() && cap.is_infinite() && self.terms.len() > 1 {
            return Err(SeriesError::Unbounded);
        }
        let mut prec = if self.prec.at.is_infinite() {
            HahnPrec::below(cap.clone())
        } else {
            let at = self
                .prec
                .at
                .sub(&e.scale_int(2))
                .expect("finite leading exponent");
            HahnPrec {
                at,
                inclusive: self.prec.inclusive,
            }
        };
        prec = prec.meet(&HahnPrec::below(cap.clone()), b)?;
        // self = c t^e (1 + u), with u of positive order.
        let neg_e = e.neg();
        let u_terms: Vec<(Value, Q)> = self
            .terms
            .iter()
            .skip(1)
            .map(|(f, a)| (f.add(&neg_e), a * &inv_c))
            .collect();
        let u_prec = HahnPrec {
            at: self.prec.at.sub(&e).unwrap_or(Value::Infinity),
            inclusive: self.prec.inclusive,
        };
        let u = HahnSeries::new(b, u_terms, u_prec)?;
        // Shifted target precision for the unit part.
        let unit_prec = HahnPrec {
            at: prec.at.add(&e),
            inclusive: prec.inclusive,
        };
        let neg_u = u.neg();
        let mut acc = HahnSeries::constant(b.dim(), Q::one());
        let mut power = acc.clone();
        loop {
            power = power.mul(&neg_u, b)?;
            let kept = power
                .terms
                .iter()
                .filter(|(f, _)| unit_prec.covers(b, f).unwrap_or(false))
                .cloned()
                .collect::<Vec<_>>();
            if kept.is_empty() {
                break;
            }
            power = HahnSeries {
                terms: kept,
                prec: power.prec.meet(&unit_prec, b)?,
            };
            acc = acc.add(&power, b)?;
        }
        let acc = HahnSeries::new(b, acc.terms, unit_prec)?;
        let shifted: Vec<(Value, Q)> = acc
            .terms
            .iter()
            .map(|(f, a)| (f.add(&neg_e), a * &inv_c))
            .collect();
        Ok(HahnSeries::new(b, shifted, prec)?)
    }

    /// Integer power; negative exponents go through [`HahnSeries::inverse`].
    pub fn powi(&self, n: i64, b: &BasisSpec, cap: &Value) -> Result<Self, SeriesError> {
        let base = if n < 0 { self.inverse(b, cap)? } else { self.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = HahnSeries::constant(b.dim(), Q::one());
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&sq, b)?.truncate_below(cap, b)?;
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul(&sq, b)?.truncate_below(cap, b)?;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuegroup::{q, qi};

    fn b() -> BasisSpec {
        BasisSpec::unit()
    }

    #[test]
    fn product_precision_tracks_leading_terms() {
        let b = b();
        // (t + t^2 + O(t^3)) * t^2 exact = t^3 + t^4 + O(t^5).
        let f = HahnSeries::new(
            &b,
            [(Value::int(1), qi(1)), (Value::int(2), qi(1))],
            HahnPrec::below(Value::int(3)),
        )
        .unwrap();
        let g = HahnSeries::monomial(Value::int(2), qi(1));
        let h = f.mul(&g, &b).unwrap();
        assert_eq!(h.prec().at, Value::int(5));
        assert_eq!(h.terms().len(), 2);
    }

    #[test]
    fn inverse_of_geometric_series() {
        let b = b();
        // 1/(t - t^2) = t^-1 (1 + t + t^2 + ...), exact input, cap 3.
        let f = HahnSeries::exact(&b, [(Value::int(1), qi(1)), (Value::int(2), qi(-1))]).unwrap();
        let inv = f.inverse(&b, &Value::int(3)).unwrap();
        let exps: Vec<Value> = inv.terms().iter().map(|(e, _)| e.clone()).collect();
        assert_eq!(
            exps,
            vec![Value::int(-1), Value::int(0), Value::int(1), Value::int(2)]
        );
        assert!(inv.terms().iter().all(|(_, c)| *c == qi(1)));
        let one = inv.mul(&f, &b).unwrap();
        assert_eq!(one.leading().unwrap().1, &qi(1));
        assert_eq!(one.terms().len(), 1);
    }

    #[test]
    fn inexact_inverse_loses_twice_the_order() {
        let b = b();
        let f = HahnSeries::new(
            &b,
            [(Value::int(1), qi(2)), (Value::int(2), q(1, 2))],
            HahnPrec::through(Value::int(3)),
        )
        .unwrap();
        let inv = f.inverse(&b, &Value::int(100)).unwrap();
        assert_eq!(inv.prec().at, Value::int(1));
        assert!(inv.prec().inclusive);
    }

    #[test]
    fn negative_power() {
        let b = b();
        let f = HahnSeries::monomial(Value::int(2), qi(3));
        let g = f.powi(-2, &b, &Value::int(10)).unwrap();
        assert_eq!(g.terms(), &[(Value::int(-4), q(1, 9))]);
    }
}
