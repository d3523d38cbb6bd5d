//! Logarithmic differential forms over truncated series.
//!
//! The basis one-forms are `dx_i/x_i` (symbol `i < r`) and `dy_j` (symbol
//! `r + j`). A `k`-form is a map from increasing symbol tuples to series.
//! Precision is a bound on the total weight of a term `f e_K`, which is the
//! weight of the monomial plus `w(y_j)` for every `dy_j` in `K`; `d` and
//! wedge products never lower total weight.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::series::{vmin, Finality, Mono, Ring, RingRef, SeriesError, TruncatedSeries};
use crate::valuegroup::{Value, Q};

pub type Symbol = u16;

#[derive(Clone, Debug)]
pub struct LogForm {
    ring: RingRef,
    degree: usize,
    coeffs: BTreeMap<Vec<Symbol>, TruncatedSeries>,
    bound: Value,
}

impl PartialEq for LogForm {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.coeffs == other.coeffs && self.bound == other.bound
    }
}

/// Sorts a symbol tuple, returning the sign of the permutation, or `None`
/// when a symbol repeats.
fn normalize(mut k: Vec<Symbol>) -> Option<(Vec<Symbol>, bool)> {
    let mut negative = false;
    for i in 1..k.len() {
        let mut j = i;
        while j > 0 && k[j - 1] > k[j] {
            k.swap(j - 1, j);
            negative = !negative;
            j -= 1;
        }
    }
    if k.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((k, negative))
}

impl LogForm {
    /// Builds a form; repeated symbols vanish and tuples are sorted with sign.
    /// The bound is lowered to what the coefficients support.
    pub fn new(
        ring: RingRef,
        degree: usize,
        entries: impl IntoIterator<Item = (Vec<Symbol>, TruncatedSeries)>,
        bound: Value,
    ) -> Result<Self, SeriesError> {
        let n = (ring.r() + ring.m()) as Symbol;
        let b = ring.basis().clone();
        let mut bound = bound;
        let mut coeffs: BTreeMap<Vec<Symbol>, TruncatedSeries> = BTreeMap::new();
        for (k, f) in entries {
            if k.len() != degree || k.iter().any(|s| *s >= n) {
                return Err(SeriesError::MalformedRing("form index out of range".into()));
            }
            if !Ring::same(f.ring(), &ring) {
                return Err(SeriesError::RingMismatch);
            }
            let Some((k, neg)) = normalize(k) else { continue };
            let wt = symbol_weight(&ring, &k);
            bound = vmin(&b, &bound, &f.bound().add(&wt))?;
            let f = if neg { f.neg() } else { f };
            match coeffs.get_mut(&k) {
                Some(g) => *g = g.add(&f)?,
                None => {
                    coeffs.insert(k, f);
                }
            }
        }
        let mut out = Self {
            ring,
            degree,
            coeffs,
            bound,
        };
        out.settle()?;
        Ok(out)
    }

    /// Truncates every coefficient to the form bound and drops zeros.
    fn settle(&mut self) -> Result<(), SeriesError> {
        let ring = self.ring.clone();
        let mut out = BTreeMap::new();
        for (k, f) in std::mem::take(&mut self.coeffs) {
            let cb = self
                .bound
                .sub(&symbol_weight(&ring, &k))
                .unwrap_or(Value::Infinity);
            let f = f.with_bound_at_most(&cb)?;
            if !f.is_zero() {
                out.insert(k, f);
            }
        }
        self.coeffs = out;
        Ok(())
    }

    pub fn zero(ring: RingRef, degree: usize) -> Self {
        Self {
            ring,
            degree,
            coeffs: BTreeMap::new(),
            bound: Value::Infinity,
        }
    }

    /// A function viewed as a 0-form.
    pub fn function(f: TruncatedSeries) -> Self {
        let ring = f.ring().clone();
        let bound = f.bound().clone();
        let mut coeffs = BTreeMap::new();
        if !f.is_zero() {
            coeffs.insert(vec![], f);
        }
        Self {
            ring,
            degree: 0,
            coeffs,
            bound,
        }
    }

    /// The one-form `sum c_i dx_i/x_i` with constant coefficients.
    pub fn log_combination(ring: RingRef, c: &[Q]) -> Self {
        let entries: Vec<_> = c
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (vec![i as Symbol], TruncatedSeries::constant(ring.clone(), v.clone())))
            .collect();
        Self::new(ring, 1, entries, Value::Infinity).expect("constant form")
    }

    /// `dx_i/x_i`.
    pub fn dlog_x(ring: RingRef, i: usize) -> Self {
        let one = TruncatedSeries::one(ring.clone());
        Self::new(ring, 1, [(vec![i as Symbol], one)], Value::Infinity).expect("basis form")
    }

    /// `dy_j`.
    pub fn dy(ring: RingRef, j: usize) -> Self {
        let s = (ring.r() + j) as Symbol;
        let one = TruncatedSeries::one(ring.clone());
        Self::new(ring, 1, [(vec![s], one)], Value::Infinity).expect("basis form")
    }

    pub fn ring(&self) -> &RingRef {
        &self.ring
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bound(&self) -> &Value {
        &self.bound
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<Symbol>, TruncatedSeries> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `e_K` for a sorted tuple `K`, with its own bound.
    pub fn coeff(&self, k: &[Symbol]) -> TruncatedSeries {
        match self.coeffs.get(k) {
            Some(f) => f.clone(),
            None => {
                let cb = self
                    .bound
                    .sub(&symbol_weight(&self.ring, k))
                    .unwrap_or(Value::Infinity);
                TruncatedSeries::zero(self.ring.clone())
                    .with_bound_at_most(&cb)
                    .expect("zero truncation")
            }
        }
    }

    /// Coefficient of `dx_i/x_i` in a one-form.
    pub fn log_coeff(&self, i: usize) -> TruncatedSeries {
        self.coeff(&[i as Symbol])
    }

    /// Coefficient of `dy_j` in a one-form.
    pub fn dy_coeff(&self, j: usize) -> TruncatedSeries {
        self.coeff(&[(self.ring.r() + j) as Symbol])
    }

    /// The function of a 0-form.
    pub fn as_function(&self) -> TruncatedSeries {
        self.coeff(&[])
    }

    fn check(&self, other: &Self) -> Result<(), SeriesError> {
        if !Ring::same(&self.ring, &other.ring) {
            return Err(SeriesError::RingMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        if self.degree != other.degree {
            return Err(SeriesError::MalformedRing("degree mismatch in sum".into()));
        }
        let bound = vmin(self.ring.basis(), &self.bound, &other.bound)?;
        let entries = self
            .coeffs
            .iter()
            .chain(&other.coeffs)
            .map(|(k, f)| (k.clone(), f.clone()));
        Self::new(self.ring.clone(), self.degree, entries, bound)
    }

    pub fn neg(&self) -> Self {
        Self {
            ring: self.ring.clone(),
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|(k, f)| (k.clone(), f.neg())).collect(),
            bound: self.bound.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.ring.clone(), self.degree);
        }
        Self {
            ring: self.ring.clone(),
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|(k, f)| (k.clone(), f.scale(c))).collect(),
            bound: self.bound.clone(),
        }
    }

    /// Least total weight any term of the true form can have.
    pub fn weight_floor(&self) -> Result<Value, SeriesError> {
        let b = self.ring.basis();
        let mut best = self.bound.clone();
        for (k, f) in &self.coeffs {
            let w = f.weight_floor()?.add(&symbol_weight(&self.ring, k));
            best = vmin(b, &best, &w)?;
        }
        Ok(best)
    }

    /// `f * self`.
    pub fn mul_function(&self, f: &TruncatedSeries) -> Result<Self, SeriesError> {
        self.wedge(&Self::function(f.clone()))
    }

    pub fn wedge(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        let b = self.ring.basis();
        let bound = vmin(
            b,
            &self.bound.add(&other.weight_floor()?),
            &other.bound.add(&self.weight_floor()?),
        )?;
        let mut entries = Vec::new();
        for (k, f) in &self.coeffs {
            for (l, g) in &other.coeffs {
                let mut kl = k.clone();
                kl.extend_from_slice(l);
                if normalize(kl.clone()).is_none() {
                    continue;
                }
                let fg = f.mul(g)?;
                entries.push((kl, fg));
            }
        }
        // The products carry bounds at least as good as the form bound.
        let mut out = Self {
            ring: self.ring.clone(),
            degree: self.degree + other.degree,
            coeffs: BTreeMap::new(),
            bound: bound.clone(),
        };
        for (kl, fg) in entries {
            let (k, neg) = normalize(kl).expect("checked");
            let fg = if neg { fg.neg() } else { fg };
            let cb = bound.sub(&symbol_weight(&self.ring, &k)).unwrap_or(Value::Infinity);
            let fg = fg.with_bound_at_most(&cb)?;
            match out.coeffs.get_mut(&k) {
                Some(h) => *h = h.add(&fg)?.with_bound_at_most(&cb)?,
                None => {
                    out.coeffs.insert(k, fg);
                }
            }
        }
        out.coeffs.retain(|_, f| !f.is_zero());
        out.degree = self.degree + other.degree;
        Ok(out)
    }

    /// Differential of a function.
    pub fn d_function(f: &TruncatedSeries) -> Self {
        let ring = f.ring().clone();
        let r = ring.r();
        let mut coeffs = BTreeMap::new();
        for i in 0..r {
            let g = f.log_deriv_x(i);
            if !g.is_zero() {
                coeffs.insert(vec![i as Symbol], g);
            }
        }
        for j in 0..ring.m() {
            let g = f.deriv_y(j);
            if !g.is_zero() {
                coeffs.insert(vec![(r + j) as Symbol], g);
            }
        }
        Self {
            ring,
            degree: 1,
            coeffs,
            bound: f.bound().clone(),
        }
    }

    /// Exterior derivative; the basis forms are closed.
    pub fn d(&self) -> Result<Self, SeriesError> {
        let mut acc = Self::zero(self.ring.clone(), self.degree + 1);
        acc.bound = self.bound.clone();
        for (k, f) in &self.coeffs {
            let df = Self::d_function(f);
            let ek = Self::basis_monomial(self.ring.clone(), k.clone());
            acc = acc.add(&df.wedge(&ek)?)?;
        }
        Ok(acc)
    }

    /// The constant form `e_K`.
    pub fn basis_monomial(ring: RingRef, k: Vec<Symbol>) -> Self {
        let deg = k.len();
        let one = TruncatedSeries::one(ring.clone());
        Self::new(ring, deg, [(k, one)], Value::Infinity).expect("basis form")
    }

    /// `d_mu(eta) = (dx^mu/x^mu) wedge eta + d eta`.
    pub fn d_mu(&self, mu: &[Q]) -> Result<Self, SeriesError> {
        let m = Self::log_combination(self.ring.clone(), mu);
        m.wedge(self)?.add(&self.d()?)
    }

    /// `d_alpha(eta) = alpha wedge eta + d eta`.
    pub fn d_alpha(&self, alpha: &Self) -> Result<Self, SeriesError> {
        alpha.wedge(self)?.add(&self.d()?)
    }

    /// Lowers the bound and drops terms above it.
    pub fn truncate(&self, b: &Value) -> Result<Self, SeriesError> {
        let mut out = self.clone();
        out.bound = vmin(self.ring.basis(), &self.bound, b)?;
        out.settle()?;
        Ok(out)
    }

    /// Minimal x-part over all known terms and its value.
    pub fn minimal_x_part(&self) -> Result<Option<(Vec<u32>, Value)>, SeriesError> {
        let b = self.ring.basis();
        let mut best: Option<(Vec<u32>, Value)> = None;
        for f in self.coeffs.values() {
            if let Some((x, v)) = f.minimal_x_part()? {
                let better = match &best {
                    None => true,
                    Some((_, bv)) => b.lt(&v, bv)?,
                };
                if better {
                    best = Some((x, v));
                }
            }
        }
        Ok(best)
    }

    /// Explicit value: least x-value over all coefficients.
    pub fn explicit_value(&self) -> Result<Value, SeriesError> {
        Ok(self.minimal_x_part()?.map_or(Value::Infinity, |(_, v)| v))
    }

    /// Whether a symbol tuple involves only logarithmic `x` symbols.
    pub fn is_log_tuple(&self, k: &[Symbol]) -> bool {
        k.iter().all(|s| (*s as usize) < self.ring.r())
    }

    /// Finality read from the logarithmic coefficients of the minimal block.
    pub fn finality(&self, gamma: &Value) -> Result<Finality, SeriesError> {
        let b = self.ring.basis();
        if b.lt(&self.bound, gamma)? {
            return Err(SeriesError::InsufficientPrecision(format!(
                "form known to weight {} but finality asked at {}",
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
                let dominant = self
                    .coeffs
                    .iter()
                    .any(|(k, f)| self.is_log_tuple(k) && !f.coeff(&m).is_zero());
                Ok(if dominant {
                    Finality::DominantAt(v)
                } else {
                    Finality::NotFinal
                })
            }
        }
    }

    /// Constant vector of the logarithmic coefficients of a one-form at `x^I y^0`.
    pub fn log_vector_at(&self, x: &[u32]) -> Vec<Q> {
        let m = Mono::new(x.to_vec(), vec![0; self.ring.m()]);
        (0..self.ring.r())
            .map(|i| self.log_coeff(i).coeff(&m))
            .collect()
    }

    /// Highest dependent index occurring in coefficients or in `dy` symbols.
    pub fn y_index(&self) -> usize {
        let r = self.ring.r();
        let mut best = 0;
        for (k, f) in &self.coeffs {
            best = best.max(f.y_index());
            for s in k {
                if *s as usize >= r {
                    best = best.max(*s as usize - r + 1);
                }
            }
        }
        best
    }

    /// `omega wedge d omega` for a one-form.
    pub fn integrability_defect(&self) -> Result<Self, SeriesError> {
        self.wedge(&self.d()?)
    }

    /// Whether `nu_A(omega wedge d omega) >= 2 gamma` on the known window.
    pub fn is_truncated_integrable(&self, gamma: &Value) -> Result<bool, SeriesError> {
        let b = self.ring.basis();
        let twice = gamma.scale_int(2);
        let defect = self.integrability_defect()?;
        Ok(b.le(&twice, &defect.explicit_value()?)?)
    }

    /// Terms with x-part exactly `x` in every coefficient.
    pub fn x_block(&self, x: &[u32]) -> Self {
        Self {
            ring: self.ring.clone(),
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, f)| (k.clone(), f.x_block(x)))
                .filter(|(_, f)| !f.is_zero())
                .collect(),
            bound: self.bound.clone(),
        }
    }

    /// All x-parts occurring in some coefficient.
    pub fn x_support(&self) -> Vec<Vec<u32>> {
        let mut v: Vec<Vec<u32>> = self.coeffs.values().flat_map(|f| f.x_support()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Applies a map to every coefficient, keeping symbols.
    pub fn map_coeffs(
        &self,
        mut f: impl FnMut(&TruncatedSeries) -> Result<TruncatedSeries, SeriesError>,
    ) -> Result<Self, SeriesError> {
        let entries = self
            .coeffs
            .iter()
            .map(|(k, g)| Ok((k.clone(), f(g)?)))
            .collect::<Result<Vec<_>, SeriesError>>()?;
        Self::new(self.ring.clone(), self.degree, entries, self.bound.clone())
    }

    /// Reinterprets the form in another ring of the same arity.
    pub fn rebase(self, ring: RingRef) -> Self {
        Self {
            coeffs: self
                .coeffs
                .into_iter()
                .map(|(k, f)| (k, f.rebase(ring.clone())))
                .collect(),
            ring,
            degree: self.degree,
            bound: self.bound,
        }
    }

    /// Sets the bound directly; coefficients are truncated to it.
    pub fn with_bound_at_most(&self, b: &Value) -> Result<Self, SeriesError> {
        self.truncate(b)
    }
}

/// Total weight of a symbol tuple: the sum of `w(y_j)` over its `dy_j`.
pub fn symbol_weight(ring: &Ring, k: &[Symbol]) -> Value {
    let mut w = ring.zero_value();
    for s in k {
        let s = *s as usize;
        if s >= ring.r() {
            w = w.add(&ring.y_weights()[s - ring.r()]);
        }
    }
    w
}

impl fmt::Display for LogForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let r = self.ring.r();
        for (n, (k, c)) in self.coeffs.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for s in k {
                let s = *s as usize;
                if s < r {
                    write!(f, " dx{}/x{}", s + 1, s + 1)?;
                } else {
                    write!(f, " dy{}", s - r + 1)?;
                }
            }
        }
        Ok(())
    }
}
