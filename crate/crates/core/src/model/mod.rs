//! Parametrized regular local models and their normalized transformations.
//!
//! A model fixes parameters `x_1..x_r, y_1..y_m` and a center: every parameter
//! is given as a series in `t` with value-group exponents. The valuation of a
//! function is the order of its evaluation at the center. Transformations are
//! independent blow-ups, coordinate changes and Puiseux packages; each one is
//! recorded together with the rings before and after, so series and forms can
//! be pulled back and the history replayed.

pub mod hahn;
pub mod puiseux;
mod pullback;

use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::series::{Mono, Ring, RingRef, SeriesError, TruncatedSeries};
use crate::valuegroup::{BasisSpec, Value, ValueError, Q};

pub use hahn::{HahnPrec, HahnSeries};
pub use puiseux::{PackagePlan, PlanError};

/// Node budget for the package search.
pub const PACKAGE_NODE_CAP: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("center of y{0} vanishes identically")]
    DegenerateCenter(usize),
    #[error("coordinate change on y{index}: the shift has explicit value below nu(y{index})")]
    ValueTooSmall { index: usize },
    #[error("shift for y{index} involves parameters not below it")]
    NotNested { index: usize },
    #[error("parameter index out of range")]
    IndexOutOfRange,
    #[error("blow-up needs nu(x{by}) < nu(x{target})")]
    BlowupOrder { target: usize, by: usize },
    #[error("inconsistent package: {0}")]
    InconsistentPackage(String),
}

impl ModelError {
    pub fn is_insufficient_precision(&self) -> bool {
        matches!(
            self,
            ModelError::Series(SeriesError::InsufficientPrecision(_))
        )
    }
}

fn insufficient(msg: impl Into<String>) -> ModelError {
    ModelError::Series(SeriesError::InsufficientPrecision(msg.into()))
}

/// Data of an applied package, enough to replay it.
#[derive(Clone, Debug, PartialEq)]
pub struct PackageData {
    pub index: usize,
    pub plan: PackagePlan,
    pub lambda: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    /// `y_index = y' - shift`, the shift free of `y_index` and later parameters.
    CoordinateChange { index: usize, shift: TruncatedSeries },
    /// `x_target = x_by * x'_target`.
    IndependentBlowup { target: usize, by: usize },
    PuiseuxPackage(PackageData),
}

impl Transform {
    pub fn kind(&self) -> &'static str {
        match self {
            Transform::CoordinateChange { .. } => "coordinate_change",
            Transform::IndependentBlowup { .. } => "independent_blowup",
            Transform::PuiseuxPackage(_) => "puiseux_package",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransformRecord {
    pub transform: Transform,
    pub ring_before: RingRef,
    pub ring_after: RingRef,
}

#[derive(Clone, Debug)]
pub struct ParamModel {
    basis: Arc<BasisSpec>,
    ring: RingRef,
    x_centers: Vec<HahnSeries>,
    y_centers: Vec<HahnSeries>,
    history: Vec<Arc<TransformRecord>>,
    eval_cap: Value,
}

impl PartialEq for ParamModel {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring
            && self.x_centers == other.x_centers
            && self.y_centers == other.y_centers
    }
}

/// Weight for a dependent parameter: its order if known, else the known bound.
fn weight_of(b: &BasisSpec, c: &HahnSeries, j: usize) -> Result<Value, ModelError> {
    if c.terms().is_empty() && c.is_exact() {
        return Err(ModelError::DegenerateCenter(j));
    }
    let w = c.order_lower_bound().clone();
    if b.signum(&w)? != std::cmp::Ordering::Greater {
        return Err(insufficient(format!(
            "center of y{} is not known to have positive order; it is known only below t^{w}, extend its validity past {w}",
            j + 1
        )));
    }
    Ok(w)
}

impl ParamModel {
    /// Independent parameters sit at `t^{nu(x_i)}` exactly.
    pub fn new(
        basis: Arc<BasisSpec>,
        x_values: Vec<Value>,
        y_centers: Vec<HahnSeries>,
        eval_cap: Value,
    ) -> Result<Self, ModelError> {
        let x_centers = x_values
            .iter()
            .map(|v| HahnSeries::monomial(v.clone(), Q::one()))
            .collect();
        let y_weights = y_centers
            .iter()
            .enumerate()
            .map(|(j, c)| weight_of(&basis, c, j))
            .collect::<Result<Vec<_>, _>>()?;
        let ring = Ring::new(basis.clone(), x_values, y_weights)?;
        Ok(Self {
            basis,
            ring,
            x_centers,
            y_centers,
            history: Vec::new(),
            eval_cap,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn ring(&self) -> &RingRef {
        &self.ring
    }

    pub fn r(&self) -> usize {
        self.ring.r()
    }

    pub fn m(&self) -> usize {
        self.ring.m()
    }

    pub fn x_centers(&self) -> &[HahnSeries] {
        &self.x_centers
    }

    pub fn y_centers(&self) -> &[HahnSeries] {
        &self.y_centers
    }

    pub fn history(&self) -> &[Arc<TransformRecord>] {
        &self.history
    }

    pub fn eval_cap(&self) -> &Value {
        &self.eval_cap
    }

    pub fn set_eval_cap(&mut self, cap: Value) {
        self.eval_cap = cap;
    }

    pub fn x_value(&self, i: usize) -> &Value {
        &self.ring.x_values()[i]
    }

    /// `nu(y_j)`; fails when the center has no known term.
    pub fn y_value(&self, j: usize) -> Result<Value, ModelError> {
        Ok(self.y_centers[j].leading()?.0.clone())
    }

    fn center_of(&self, var: Var) -> &HahnSeries {
        match var {
            Var::X(i) => &self.x_centers[i],
            Var::Y(j) => &self.y_centers[j],
        }
    }

    /// Evaluates a series at the center, keeping exponents below the cap.
    pub fn evaluate(&self, f: &TruncatedSeries) -> Result<HahnSeries, ModelError> {
        let b = &*self.basis;
        let cap = &self.eval_cap;
        let mut prec = HahnPrec::below(cap.clone());
        if !f.bound().is_infinite() {
            prec = prec.meet(&HahnPrec::through(f.bound().clone()), b)?;
        }
        let r = self.r();
        let m = self.m();
        let mut powers: Vec<Vec<HahnSeries>> = vec![vec![HahnSeries::constant(b.dim(), Q::one())]; r + m];
        let mut acc = HahnSeries::new(b, std::iter::empty(), prec.clone())?;
        for (mono, c) in f.terms() {
            let mut term = HahnSeries::constant(b.dim(), c.clone());
            let exps = mono.x.iter().chain(mono.y.iter()).enumerate();
            for (k, e) in exps {
                let e = *e as usize;
                if e == 0 {
                    continue;
                }
                let var = if k < r { Var::X(k) } else { Var::Y(k - r) };
                while powers[k].len() <= e {
                    let last = powers[k].last().expect("nonempty").clone();
                    let next = last.mul(self.center_of(var), b)?.truncate_below(cap, b)?;
                    powers[k].push(next);
                }
                term = term.mul(&powers[k][e], b)?.truncate_below(cap, b)?;
            }
            acc = acc.add(&term, b)?;
        }
        Ok(HahnSeries::new(b, acc.terms().to_vec(), acc.prec().meet(&prec, b)?)?)
    }

    /// The valuation of `f`: order of its evaluation at the center.
    pub fn nu(&self, f: &TruncatedSeries) -> Result<Value, ModelError> {
        if f.is_zero() && f.is_exact() {
            return Ok(Value::Infinity);
        }
        let h = self.evaluate(f)?;
        match h.order() {
            Some(v) => Ok(v.clone()),
            None => Err(insufficient(format!(
                "no nonzero term of the evaluation below {}",
                h.prec().at
            ))),
        }
    }

    fn push(&mut self, transform: Transform, ring_before: RingRef) {
        self.history.push(Arc::new(TransformRecord {
            transform,
            ring_before,
            ring_after: self.ring.clone(),
        }));
    }

    /// `x_target = x_by * x'_target`; needs `nu(x_by) < nu(x_target)`.
    pub fn independent_blowup(&mut self, target: usize, by: usize) -> Result<Arc<TransformRecord>, ModelError> {
        let r = self.r();
        if target >= r || by >= r || target == by {
            return Err(ModelError::IndexOutOfRange);
        }
        let b = self.basis.clone();
        let vt = self.x_value(target).clone();
        let vb = self.x_value(by).clone();
        if !b.lt(&vb, &vt)? {
            return Err(ModelError::BlowupOrder { target, by });
        }
        let inv = self.x_centers[by].inverse(&b, &self.eval_cap)?;
        let new_center = self.x_centers[target].mul(&inv, &b)?;
        let before = self.ring.clone();
        let mut xv = self.ring.x_values().to_vec();
        xv[target] = vt.sub(&vb).expect("finite");
        self.ring = Ring::new(b, xv, self.ring.y_weights().to_vec())?;
        self.x_centers[target] = new_center;
        self.push(Transform::IndependentBlowup { target, by }, before);
        Ok(self.history.last().expect("pushed").clone())
    }

    /// `y_index = y' - shift`. The shift must live in the earlier dependent
    /// parameters and have value at least `nu(y_index)`.
    pub fn coordinate_change(&mut self, index: usize, shift: TruncatedSeries) -> Result<Arc<TransformRecord>, ModelError> {
        if index >= self.m() {
            return Err(ModelError::IndexOutOfRange);
        }
        if shift.terms().keys().any(|m| m.y[index..].iter().any(|e| *e > 0)) {
            return Err(ModelError::NotNested { index });
        }
        let b = self.basis.clone();
        let vy = self.y_value(index)?;
        let fval = self.evaluate(&shift)?;
        if b.lt(fval.order_lower_bound(), &vy)? {
            return Err(ModelError::ValueTooSmall { index });
        }
        let center = self.y_centers[index].add(&fval, &b)?;
        let before = self.ring.clone();
        let mut w = weight_of(&b, &center, index)?;
        w = b.max(&w, &before.y_weights()[index])?;
        let mut yw = before.y_weights().to_vec();
        yw[index] = w;
        self.ring = Ring::new(b, before.x_values().to_vec(), yw)?;
        self.y_centers[index] = center;
        let shift = shift.rebase(self.ring.clone());
        self.push(Transform::CoordinateChange { index, shift }, before);
        Ok(self.history.last().expect("pushed").clone())
    }

    /// Plans a package on `y_index` without applying it.
    pub fn plan_package(&self, index: usize) -> Result<PackagePlan, ModelError> {
        let vy = self.y_value(index)?;
        Ok(puiseux::plan_package(
            &self.basis,
            self.ring.x_values(),
            &vy,
            PACKAGE_NODE_CAP,
        )?)
    }

    /// Normalized Puiseux package on `y_index`.
    pub fn puiseux_package(&mut self, index: usize) -> Result<Arc<TransformRecord>, ModelError> {
        if index >= self.m() {
            return Err(ModelError::IndexOutOfRange);
        }
        let plan = self.plan_package(index)?;
        self.apply_package(index, plan, None)
    }

    fn apply_package(
        &mut self,
        index: usize,
        plan: PackagePlan,
        expected_lambda: Option<&Q>,
    ) -> Result<Arc<TransformRecord>, ModelError> {
        let b = self.basis.clone();
        let r = self.r();
        let cap = self.eval_cap.clone();
        // Old variables u = (x_1..x_r, y_index); new ones are monomials in them.
        let mut old: Vec<HahnSeries> = self.x_centers.clone();
        old.push(self.y_centers[index].clone());
        let monomial_center = |row: &[i64]| -> Result<HahnSeries, ModelError> {
            let mut acc = HahnSeries::constant(b.dim(), Q::one());
            for (s, e) in row.iter().enumerate() {
                if *e != 0 {
                    acc = acc.mul(&old[s].powi(*e, &b, &cap)?, &b)?;
                }
            }
            Ok(acc)
        };
        let mut new_x = Vec::with_capacity(r);
        for k in 0..r {
            new_x.push(monomial_center(&plan.c_inv[k])?);
        }
        let phi = monomial_center(&plan.c_inv[r])?;
        let zero = Value::zero(b.dim());
        let lambda = phi
            .coeff(&b, &zero)?
            .ok_or_else(|| insufficient("center too short to read the package constant"))?;
        if lambda.is_zero() {
            return Err(ModelError::InconsistentPackage(
                "monomial relation has no unit part".into(),
            ));
        }
        if let Some(l) = expected_lambda {
            if *l != lambda {
                return Err(ModelError::InconsistentPackage("replayed constant differs".into()));
            }
        }
        if let Some((e, _)) = phi.terms().first() {
            if *e != zero {
                return Err(ModelError::InconsistentPackage(
                    "monomial relation is not a unit at the center".into(),
                ));
            }
        }
        let y_new = phi.sub(&HahnSeries::constant(b.dim(), lambda.clone()), &b)?;
        let vy = self.y_value(index)?;
        let xv = puiseux::transformed_values(&plan, self.ring.x_values(), &vy);
        for (k, c) in new_x.iter().enumerate() {
            let lead = c.leading()?.0;
            if *lead != xv[k] || b.signum(lead)? != std::cmp::Ordering::Greater {
                return Err(ModelError::InconsistentPackage(format!(
                    "new x{} has order {} but {} was planned",
                    k + 1,
                    lead,
                    xv[k]
                )));
            }
        }
        let before = self.ring.clone();
        let mut yw = before.y_weights().to_vec();
        yw[index] = weight_of(&b, &y_new, index)?;
        self.ring = Ring::new(b.clone(), xv, yw)?;
        self.x_centers = new_x;
        self.y_centers[index] = y_new;
        self.push(
            Transform::PuiseuxPackage(PackageData {
                index,
                plan,
                lambda,
            }),
            before,
        );
        Ok(self.history.last().expect("pushed").clone())
    }

    /// Re-applies a recorded transformation.
    pub fn replay(&mut self, t: &Transform) -> Result<Arc<TransformRecord>, ModelError> {
        match t {
            Transform::CoordinateChange { index, shift } => {
                let shift = shift.clone().rebase(self.ring.clone());
                self.coordinate_change(*index, shift)
            }
            Transform::IndependentBlowup { target, by } => self.independent_blowup(*target, *by),
            Transform::PuiseuxPackage(p) => {
                self.apply_package(p.index, p.plan.clone(), Some(&p.lambda))
            }
        }
    }

    /// Blow-ups that make the given x-monomials totally ordered by divisibility.
    pub fn principalize(&mut self, monomials: &[Vec<u32>]) -> Result<Vec<Arc<TransformRecord>>, ModelError> {
        let mut records = Vec::new();
        let mut monos: Vec<Vec<u32>> = monomials.to_vec();
        monos.sort();
        monos.dedup();
        for _ in 0..10_000 {
            let Some((a, bm)) = first_incomparable(&monos) else {
                return Ok(records);
            };
            // Blow up along a pair (i, j) with a_i > b_i and a_j < b_j.
            let r = self.r();
            let mut pair = None;
            'outer: for i in 0..r {
                for j in 0..r {
                    if monos[a][i] > monos[bm][i] && monos[a][j] < monos[bm][j] {
                        pair = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let (i, j) = pair.expect("incomparable monomials differ in both directions");
            let b = self.basis.clone();
            let (target, by) = if b.lt(self.x_value(i), self.x_value(j))? {
                (j, i)
            } else {
                (i, j)
            };
            let rec = self.independent_blowup(target, by)?;
            // x_target = x_by x'_target: exponent of x_by absorbs that of x_target.
            for m in monos.iter_mut() {
                m[by] += m[target];
            }
            monos.sort();
            monos.dedup();
            records.push(rec);
        }
        Err(ModelError::InconsistentPackage("principalization did not terminate".into()))
    }
}

fn divides(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn first_incomparable(monos: &[Vec<u32>]) -> Option<(usize, usize)> {
    for a in 0..monos.len() {
        for b in a + 1..monos.len() {
            if !divides(&monos[a], &monos[b]) && !divides(&monos[b], &monos[a]) {
                return Some((a, b));
            }
        }
    }
    None
}

#[derive(Clone, Copy)]
enum Var {
    X(usize),
    Y(usize),
}

/// Monomial helper for tests and builders.
pub fn mono(x: &[u32], y: &[u32]) -> Mono {
    Mono::new(x.to_vec(), y.to_vec())
}

/// A model with rational x-values and y-centers given by rational exponents.
pub fn rational_model(
    x_values: &[Q],
    y_centers: &[(&[(Q, Q)], Option<Q>)],
    eval_cap: Q,
) -> Result<ParamModel, ModelError> {
    let basis = Arc::new(BasisSpec::unit());
    let ys = y_centers
        .iter()
        .map(|(terms, validity)| {
            let prec = match validity {
                Some(v) => HahnPrec::through(Value::rat(v.clone())),
                None => HahnPrec::exact(),
            };
            HahnSeries::new(
                &basis,
                terms.iter().map(|(e, c)| (Value::rat(e.clone()), c.clone())),
                prec,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    ParamModel::new(
        basis,
        x_values.iter().map(|v| Value::rat(v.clone())).collect(),
        ys,
        Value::rat(eval_cap),
    )
}

impl TransformRecord {
    pub fn pull_back_series(&self, f: &TruncatedSeries, cap: &Value) -> Result<TruncatedSeries, ModelError> {
        pullback::series(self, f, cap)
    }

    pub fn pull_back_form(
        &self,
        w: &crate::logforms::LogForm,
        cap: &Value,
    ) -> Result<crate::logforms::LogForm, ModelError> {
        pullback::form(self, w, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuegroup::{q, qi};

    fn example_a() -> ParamModel {
        // x at t, y at t^2 + t^3 known through 3.
        rational_model(
            &[qi(1)],
            &[(&[(qi(2), qi(1)), (qi(3), qi(1))], Some(qi(3)))],
            qi(20),
        )
        .unwrap()
    }

    #[test]
    fn valuation_of_y_minus_x_squared() {
        let m = example_a();
        let f = TruncatedSeries::exact(
            m.ring().clone(),
            [(mono(&[0], &[1]), qi(1)), (mono(&[2], &[0]), qi(-1))],
        )
        .unwrap();
        assert_eq!(m.nu(&f).unwrap(), Value::int(3));
        let g = TruncatedSeries::exact(m.ring().clone(), [(mono(&[0], &[1]), qi(1))]).unwrap();
        assert_eq!(m.nu(&g).unwrap(), Value::int(2));
    }

    #[test]
    fn package_on_example_a() {
        let mut m = example_a();
        let rec = m.puiseux_package(0).unwrap();
        let Transform::PuiseuxPackage(p) = &rec.transform else {
            panic!("expected a package")
        };
        assert_eq!(p.lambda, qi(1));
        assert_eq!(p.plan.c, vec![vec![1, 0], vec![2, 1]]);
        // y' = t known through 1.
        assert_eq!(m.y_value(0).unwrap(), Value::int(1));
        assert_eq!(m.y_centers()[0].prec().at, Value::int(1));
    }

    #[test]
    fn ramified_package_values() {
        let mut m = rational_model(
            &[qi(1)],
            &[(&[(q(3, 2), qi(1)), (qi(2), qi(1))], None)],
            qi(20),
        )
        .unwrap();
        m.puiseux_package(0).unwrap();
        assert_eq!(m.x_value(0), &Value::rat(q(1, 2)));
        // y^2 / x^3 = 1 + 2 t^(1/2) + t.
        assert_eq!(m.y_value(0).unwrap(), Value::rat(q(1, 2)));
        assert_eq!(m.y_centers()[0].terms()[0].1, qi(2));
    }

    #[test]
    fn coordinate_change_rejects_small_shift() {
        let mut m = rational_model(
            &[qi(1)],
            &[(&[(qi(2), qi(1))], None), (&[(qi(3), qi(1)), (qi(4), qi(1))], None)],
            qi(20),
        )
        .unwrap();
        let ring = m.ring().clone();
        let small = TruncatedSeries::exact(ring.clone(), [(mono(&[1], &[0, 0]), qi(1))]).unwrap();
        assert!(matches!(
            m.coordinate_change(1, small),
            Err(ModelError::ValueTooSmall { .. })
        ));
        let nested = TruncatedSeries::exact(ring.clone(), [(mono(&[0], &[0, 1]), qi(1))]).unwrap();
        assert!(matches!(
            m.coordinate_change(1, nested),
            Err(ModelError::NotNested { .. })
        ));
        let ok = TruncatedSeries::exact(ring, [(mono(&[1], &[1, 0]), qi(-1))]).unwrap();
        m.coordinate_change(1, ok).unwrap();
        // y2 - x y1 sits at t^4.
        assert_eq!(m.y_value(1).unwrap(), Value::int(4));
    }

    #[test]
    fn replay_reproduces_model() {
        let mut m = example_a();
        let start = m.clone();
        m.puiseux_package(0).unwrap();
        let mut again = start.clone();
        for rec in m.history().to_vec() {
            again.replay(&rec.transform).unwrap();
        }
        assert_eq!(again, m);
    }
}
