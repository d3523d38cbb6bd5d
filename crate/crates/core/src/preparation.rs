//! Level decomposition with respect to a distinguished dependent parameter
//! `z`, the integrability residues of the levels, the level cloud and the
//! strict preparation loop.
//!
//! For a one-form `omega = sum_s z^s (eta_s + h_s dz/z)`; for a function
//! `f = sum_s z^s f_s`. Level `s` is known to weight `B - s w(z)`.

use serde::Serialize;

use crate::logforms::LogForm;
use crate::polygon::{CriticalData, Point, Polygon, PolygonError};
use crate::series::{vmin, Finality, Mono, SeriesError, TruncatedSeries};
use crate::valuegroup::{Value, Q};
use crate::workspace::{DriverError, Handle, Tracked, Workspace};

use num_traits::Zero;

/// Rounds of the preparation loop before it is declared stuck.
pub const PREPARATION_ROUNDS: usize = 64;

/// Levels of a one-form.
#[derive(Clone, Debug)]
pub struct Levels {
    /// 0-based index of `z` among the dependent parameters.
    pub index: usize,
    pub eta: Vec<LogForm>,
    pub h: Vec<TruncatedSeries>,
}

/// Levels of a function.
#[derive(Clone, Debug)]
pub struct FunctionLevels {
    pub index: usize,
    pub f: Vec<TruncatedSeries>,
}

fn level_bound(bound: &Value, wz: &Value, s: u32) -> Value {
    bound
        .sub(&wz.scale_int(s as i64))
        .unwrap_or(Value::Infinity)
}

fn strip_z(m: &Mono, index: usize) -> (u32, Mono) {
    let mut k = m.clone();
    let s = k.y[index];
    k.y[index] = 0;
    (s, k)
}

fn grow<T>(v: &mut Vec<Vec<T>>, s: usize) {
    while v.len() <= s {
        v.push(Vec::new());
    }
}

fn check_dependents(found: usize, index: usize) -> Result<(), DriverError> {
    if found > index + 1 {
        return Err(DriverError::TooManyDependents {
            found,
            allowed: index + 1,
        });
    }
    Ok(())
}

/// Regroups a one-form by powers of `z = y_index`.
pub fn decompose_levels(omega: &LogForm, index: usize) -> Result<Levels, DriverError> {
    let ring = omega.ring().clone();
    let r = ring.r();
    if index >= ring.m() || omega.degree() != 1 {
        return Err(SeriesError::MalformedRing("levels need a one-form and a valid index".into()).into());
    }
    check_dependents(omega.y_index(), index)?;
    let wz = ring.y_weights()[index].clone();
    let dz = (r + index) as u16;
    // (level, symbol) -> terms; symbol None is the dz/z slot.
    let mut eta_terms: Vec<Vec<(u16, Mono, Q)>> = Vec::new();
    let mut h_terms: Vec<Vec<(Mono, Q)>> = Vec::new();
    for (k, f) in omega.coeffs() {
        let sym = k[0];
        for (m, c) in f.terms() {
            let (e, base) = strip_z(m, index);
            if sym == dz {
                let s = e as usize + 1;
                grow(&mut h_terms, s);
                h_terms[s].push((base, c.clone()));
            } else {
                let s = e as usize;
                grow(&mut eta_terms, s);
                eta_terms[s].push((sym, base, c.clone()));
            }
        }
    }
    let n = eta_terms.len().max(h_terms.len()).max(1);
    let mut eta = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    for s in 0..n {
        let bs = level_bound(omega.bound(), &wz, s as u32);
        let mut by_symbol: std::collections::BTreeMap<u16, Vec<(Mono, Q)>> = Default::default();
        for (sym, m, c) in eta_terms.get(s).into_iter().flatten() {
            by_symbol.entry(*sym).or_default().push((m.clone(), c.clone()));
        }
        let entries = by_symbol
            .into_iter()
            .map(|(sym, t)| Ok((vec![sym], TruncatedSeries::new(ring.clone(), t, Value::Infinity)?)))
            .collect::<Result<Vec<_>, SeriesError>>()?;
        eta.push(LogForm::new(ring.clone(), 1, entries, bs.clone())?);
        let ht = h_terms.get(s).cloned().unwrap_or_default();
        h.push(TruncatedSeries::new(ring.clone(), ht, bs)?);
    }
    Ok(Levels { index, eta, h })
}

impl Levels {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.iter().all(|e| e.is_zero()) && self.h.iter().all(|h| h.is_zero())
    }

    /// `sum_s z^s (eta_s + h_s dz/z)`.
    pub fn reconstruct(&self) -> Result<LogForm, DriverError> {
        let ring = self.eta[0].ring().clone();
        let mut acc = LogForm::zero(ring.clone(), 1);
        let mut bound = Value::Infinity;
        let wz = ring.y_weights()[self.index].clone();
        let b = ring.basis().clone();
        for s in 0..self.len() {
            let mut zs = Mono::one(ring.r(), ring.m());
            zs.y[self.index] = s as u32;
            let zpow = TruncatedSeries::monomial(ring.clone(), zs, Q::from_integer(1.into()));
            acc = acc.add(&self.eta[s].mul_function(&zpow)?)?;
            if s > 0 {
                let mut zs1 = Mono::one(ring.r(), ring.m());
                zs1.y[self.index] = s as u32 - 1;
                let g = self.h[s].mul_monomial(&zs1, &Q::from_integer(1.into()));
                acc = acc.add(&LogForm::dy(ring.clone(), self.index).mul_function(&g)?)?;
            }
            let lb = self.eta[s].bound().add(&wz.scale_int(s as i64));
            bound = vmin(&b, &bound, &lb)?;
        }
        Ok(acc.with_bound_at_most(&bound)?)
    }

    fn parts(&self, s: usize) -> Vec<Tracked> {
        vec![Tracked::Form(self.eta[s].clone()), Tracked::Series(self.h[s].clone())]
    }
}

/// Regroups a function by powers of `z = y_index`.
pub fn decompose_function(f: &TruncatedSeries, index: usize) -> Result<FunctionLevels, DriverError> {
    let ring = f.ring().clone();
    if index >= ring.m() {
        return Err(SeriesError::MalformedRing("level index out of range".into()).into());
    }
    check_dependents(f.y_index(), index)?;
    let wz = ring.y_weights()[index].clone();
    let mut terms: Vec<Vec<(Mono, Q)>> = Vec::new();
    for (m, c) in f.terms() {
        let (s, base) = strip_z(m, index);
        while terms.len() <= s as usize {
            terms.push(Vec::new());
        }
        terms[s as usize].push((base, c.clone()));
    }
    if terms.is_empty() {
        terms.push(Vec::new());
    }
    let levels = terms
        .into_iter()
        .enumerate()
        .map(|(s, t)| TruncatedSeries::new(ring.clone(), t, level_bound(f.bound(), &wz, s as u32)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionLevels { index, f: levels })
}

impl FunctionLevels {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.iter().all(|g| g.is_zero())
    }

    fn parts(&self, s: usize) -> Vec<Tracked> {
        vec![Tracked::Series(self.f[s].clone())]
    }
}

/// Level data common to forms and functions.
pub trait LevelSet {
    fn index(&self) -> usize;
    fn count(&self) -> usize;
    fn components(&self, s: usize) -> Vec<Tracked>;
}

impl LevelSet for Levels {
    fn index(&self) -> usize {
        self.index
    }
    fn count(&self) -> usize {
        self.len()
    }
    fn components(&self, s: usize) -> Vec<Tracked> {
        self.parts(s)
    }
}

impl LevelSet for FunctionLevels {
    fn index(&self) -> usize {
        self.index
    }
    fn count(&self) -> usize {
        self.len()
    }
    fn components(&self, s: usize) -> Vec<Tracked> {
        self.parts(s)
    }
}

fn part_minimal(p: &Tracked) -> Result<Option<(Vec<u32>, Value)>, SeriesError> {
    match p {
        Tracked::Series(f) => f.minimal_x_part(),
        Tracked::Form(w) => w.minimal_x_part(),
    }
}

fn part_bound(p: &Tracked) -> &Value {
    match p {
        Tracked::Series(f) => f.bound(),
        Tracked::Form(w) => w.bound(),
    }
}

/// Whether a component has a unit coefficient at `x^I`: a constant term for
/// a function, a constant logarithmic coefficient for a form.
fn part_has_unit_at(p: &Tracked, x: &[u32]) -> bool {
    match p {
        Tracked::Series(f) => !f.coeff(&Mono::new(x.to_vec(), vec![0; f.ring().m()])).is_zero(),
        Tracked::Form(w) => w.log_vector_at(x).iter().any(|c| !c.is_zero()),
    }
}

/// Minimal block and value over the components of a level.
pub fn level_minimal<L: LevelSet + ?Sized>(levels: &L, s: usize) -> Result<Option<(Vec<u32>, Value)>, DriverError> {
    let mut best: Option<(Vec<u32>, Value)> = None;
    for p in levels.components(s) {
        if let Some((x, v)) = part_minimal(&p)? {
            let b = match &p {
                Tracked::Series(f) => f.basis().clone(),
                Tracked::Form(w) => w.ring().basis().clone(),
            };
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

/// Finality of level `s` at `delta`: its minimal block must carry a unit in
/// some component, or the level must lie beyond `delta`.
pub fn level_finality<L: LevelSet + ?Sized>(levels: &L, s: usize, delta: &Value) -> Result<Finality, DriverError> {
    let parts = levels.components(s);
    let b = match &parts[0] {
        Tracked::Series(f) => f.basis().clone(),
        Tracked::Form(w) => w.ring().basis().clone(),
    };
    for p in &parts {
        if b.lt(part_bound(p), delta)? {
            return Err(SeriesError::InsufficientPrecision(format!(
                "level {s} known to weight {} but finality asked at {delta}",
                part_bound(p)
            ))
            .into());
        }
    }
    match level_minimal(levels, s)? {
        None => Ok(Finality::Recessive),
        Some((x, v)) => {
            if b.lt(delta, &v)? {
                Ok(Finality::Recessive)
            } else if parts.iter().any(|p| part_has_unit_at(p, &x)) {
                Ok(Finality::DominantAt(v))
            } else {
                Ok(Finality::NotFinal)
            }
        }
    }
}

/// Cloud points `(nu_A(level s), s)` of the nonzero levels.
pub fn cloud<L: LevelSet + ?Sized>(levels: &L) -> Result<Vec<Point>, DriverError> {
    let mut pts = Vec::new();
    for s in 0..levels.count() {
        if let Some((_, v)) = level_minimal(levels, s)? {
            pts.push(Point::new(v, s as u32));
        }
    }
    Ok(pts)
}

/// The level polygon and, if nonempty, its critical data at `delta = nu(z)`.
#[derive(Clone, Debug)]
pub struct NewtonData {
    pub cloud: Vec<Point>,
    pub polygon: Polygon,
    pub delta: Value,
    pub critical: Option<CriticalData>,
}

impl NewtonData {
    /// `varsigma`, infinite for the empty polygon.
    pub fn critical_value(&self) -> Value {
        self.critical.as_ref().map_or(Value::Infinity, |c| c.value.clone())
    }

    /// `chi`, zero for the empty polygon.
    pub fn critical_height(&self) -> u32 {
        self.critical.as_ref().map_or(0, |c| c.height)
    }

    /// Whether the vertex of least abscissa is the critical vertex.
    pub fn main_is_critical(&self) -> bool {
        match (&self.critical, self.polygon.top_vertex()) {
            (Some(c), Some(t)) => c.height == t.ordinate,
            _ => false,
        }
    }
}

pub fn newton_polygon<L: LevelSet + ?Sized>(levels: &L, delta: &Value) -> Result<NewtonData, DriverError> {
    let pts = cloud(levels)?;
    let basis = delta_basis(levels)?;
    let polygon = Polygon::from_cloud(basis, &pts)?;
    let critical = match polygon.critical_data(delta) {
        Ok(c) => Some(c),
        Err(PolygonError::EmptyPolygon) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(NewtonData {
        cloud: pts,
        polygon,
        delta: delta.clone(),
        critical,
    })
}

fn delta_basis<L: LevelSet + ?Sized>(levels: &L) -> Result<std::sync::Arc<crate::valuegroup::BasisSpec>, DriverError> {
    Ok(match &levels.components(0)[0] {
        Tracked::Series(f) => f.basis().clone(),
        Tracked::Form(w) => w.ring().basis().clone(),
    })
}

/// Explicit values of the integrability residues of one level index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelResidue {
    pub s: usize,
    pub theta_value: String,
    pub delta_value: String,
    pub passes: bool,
}

/// `Theta_s = sum eta_i ^ d eta_j` and
/// `Delta_s = sum (j eta_j ^ eta_i + h_i d eta_j + eta_i ^ d h_j)` over `i + j = s`.
pub fn level_residues(levels: &Levels, gamma: &Value) -> Result<Vec<LevelResidue>, DriverError> {
    let ring = levels.eta[0].ring().clone();
    let b = ring.basis().clone();
    let twice = gamma.scale_int(2);
    let n = levels.len();
    let d_eta = levels.eta.iter().map(|e| e.d()).collect::<Result<Vec<_>, _>>()?;
    let d_h: Vec<LogForm> = levels.h.iter().map(LogForm::d_function).collect();
    let mut out = Vec::new();
    for s in 0..(2 * n).saturating_sub(1) {
        let mut theta = LogForm::zero(ring.clone(), 3);
        let mut delta = LogForm::zero(ring.clone(), 2);
        for i in 0..n {
            if s < i || s - i >= n {
                continue;
            }
            let j = s - i;
            theta = theta.add(&levels.eta[i].wedge(&d_eta[j])?)?;
            let jterm = levels.eta[j].wedge(&levels.eta[i])?.scale(&Q::from_integer((j as i64).into()));
            delta = delta
                .add(&jterm)?
                .add(&d_eta[j].mul_function(&levels.h[i])?)?
                .add(&levels.eta[i].wedge(&d_h[j])?)?;
        }
        let tv = theta.explicit_value()?;
        let dv = delta.explicit_value()?;
        for (w, v) in [(&theta, &tv), (&delta, &dv)] {
            if b.lt(w.bound(), &twice)? && b.le(w.bound(), v)? {
                return Err(SeriesError::InsufficientPrecision(format!(
                    "residue of level {s} known to weight {} below {twice}",
                    w.bound()
                ))
                .into());
            }
        }
        let passes = b.le(&twice, &tv)? && b.le(&twice, &dv)?;
        out.push(LevelResidue {
            s,
            theta_value: tv.to_string(),
            delta_value: dv.to_string(),
            passes,
        });
    }
    Ok(out)
}

/// `min { s : nu(level s) + s delta = rho and the reduced part of level s is nonzero }`.
pub fn dominant_main_height<L: LevelSet + ?Sized>(
    levels: &L,
    newton: &NewtonData,
    rho: &Value,
) -> Result<Option<u32>, DriverError> {
    let b = newton.polygon.basis().clone();
    for p in &newton.cloud {
        let v = p.abscissa.add(&newton.delta.scale_int(p.ordinate as i64));
        if b.cmp(&v, rho)? != std::cmp::Ordering::Equal {
            continue;
        }
        if crate::uniformizer::reduced_part(levels, newton, p.ordinate as usize)?.is_some() {
            return Ok(Some(p.ordinate));
        }
    }
    Ok(None)
}

/// Makes a tracked object `delta`-final through transformations that touch
/// only parameters below the distinguished one.
pub trait LowerFinalizer {
    fn finalize(&mut self, ws: &mut Workspace, target: Handle, delta: &Value) -> Result<(), DriverError>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub s: usize,
    pub abscissa: String,
    pub status: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PreparationReport {
    pub rounds: usize,
    pub critical_value: String,
    pub critical_height: u32,
    pub levels: Vec<LevelReport>,
    /// Levels handed to the recursion, in order, with their thresholds.
    pub recursions: Vec<(usize, String)>,
    pub planning_moves: usize,
    pub epsilon: Option<String>,
}

/// The levels of a tracked form or function.
pub enum AnyLevels {
    Form(Levels),
    Function(FunctionLevels),
}

impl AnyLevels {
    pub fn of(ws: &Workspace, target: Handle, index: usize) -> Result<Self, DriverError> {
        Ok(match ws.get(target) {
            Tracked::Form(w) => AnyLevels::Form(decompose_levels(w, index)?),
            Tracked::Series(f) => AnyLevels::Function(decompose_function(f, index)?),
        })
    }

    pub fn as_set(&self) -> &dyn LevelSet {
        match self {
            AnyLevels::Form(l) => l,
            AnyLevels::Function(l) => l,
        }
    }
}

/// Half the least gap between distinct values `lambda + s delta` below `gamma`.
fn preparation_epsilon(newton: &NewtonData, gamma: &Value) -> Result<Option<Value>, DriverError> {
    let b = newton.polygon.basis().clone();
    let mut vals: Vec<Value> = Vec::new();
    for p in &newton.cloud {
        let v = p.abscissa.add(&newton.delta.scale_int(p.ordinate as i64));
        if b.lt(&v, gamma)? {
            vals.push(v);
        }
    }
    vals.push(gamma.clone());
    let mut best: Option<Value> = None;
    for i in 0..vals.len() {
        for j in 0..vals.len() {
            if b.lt(&vals[i], &vals[j])? {
                let g = vals[j].sub(&vals[i]).expect("finite");
                best = Some(match best {
                    None => g,
                    Some(c) => b.min(&c, &g)?,
                });
            }
        }
    }
    Ok(best.map(|g| g.scale(&crate::valuegroup::q(1, 2))))
}

/// Strict preparation: every level with `s nu(z) <= gamma~` becomes
/// `(gamma~ - s nu(z))`-final, where `gamma~ = min(gamma, varsigma)`.
pub fn strict_prepare(
    ws: &mut Workspace,
    target: Handle,
    gamma: &Value,
    index: usize,
    lower: &mut dyn LowerFinalizer,
) -> Result<PreparationReport, DriverError> {
    let b = ws.model().basis().clone();
    let delta = ws.model().y_value(index)?;
    let mut report = PreparationReport::default();
    for round in 0..PREPARATION_ROUNDS {
        let levels = AnyLevels::of(ws, target, index)?;
        let set = levels.as_set();
        let newton = newton_polygon(set, &delta)?;
        let sigma = newton.critical_value();
        let gt = b.min(gamma, &sigma)?;
        let mut pending = Vec::new();
        let mut verdicts = Vec::new();
        for s in 0..set.count() {
            let sd = delta.scale_int(s as i64);
            if b.lt(&gt, &sd)? {
                break;
            }
            let th = gt.sub(&sd).expect("finite");
            let fin = level_finality(set, s, &th)?;
            verdicts.push(LevelReport {
                s,
                abscissa: level_minimal(set, s)?.map_or("inf".into(), |(_, v)| v.to_string()),
                status: match &fin {
                    Finality::DominantAt(_) => "dominant",
                    Finality::Recessive => "recessive",
                    Finality::NotFinal => "not_final",
                }
                .into(),
            });
            if !fin.is_final() {
                pending.push((s, th));
            }
        }
        if pending.is_empty() {
            report.rounds = round;
            report.critical_value = sigma.to_string();
            report.critical_height = newton.critical_height();
            report.levels = verdicts;
            return Ok(report);
        }
        // Planning picks the sharpest vertex below the target line first.
        let mut chosen = pending[0].clone();
        if !gamma.is_infinite() {
            if let Some(eps) = preparation_epsilon(&newton, gamma)? {
                report.epsilon = Some(eps.to_string());
                if let Ok(choice) = newton.polygon.planning(&delta, gamma, &eps) {
                    if let Some(p) = pending.iter().find(|(s, _)| *s as u32 == choice.ordinate) {
                        chosen = p.clone();
                        report.planning_moves += 1;
                    }
                }
            }
        }
        let (s, th) = chosen;
        report.recursions.push((s, th.to_string()));
        finalize_level(ws, target, index, s, &th, lower)?;
    }
    Err(DriverError::IterationLimit {
        what: "strict preparation".into(),
        cap: PREPARATION_ROUNDS,
    })
}

/// Finalizes the components of level `s`: the coefficient of `dz/z` (or the
/// function level) first, then the form part.
fn finalize_level(
    ws: &mut Workspace,
    target: Handle,
    index: usize,
    s: usize,
    th: &Value,
    lower: &mut dyn LowerFinalizer,
) -> Result<(), DriverError> {
    let n_parts = AnyLevels::of(ws, target, index)?.as_set().components(s).len();
    for k in (0..n_parts).rev() {
        let levels = AnyLevels::of(ws, target, index)?;
        let part = levels.as_set().components(s)[k].clone();
        let fin = match &part {
            Tracked::Series(f) => f.finality(th)?,
            Tracked::Form(w) => w.finality(th)?,
        };
        if fin.is_final() {
            continue;
        }
        let h = match part {
            Tracked::Series(f) => ws.track_series(f),
            Tracked::Form(w) => ws.track_form(w),
        };
        let res = lower.finalize(ws, h, th);
        ws.release(h);
        res?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mono, rational_model};
    use crate::series::Ring;
    use crate::valuegroup::{qi, BasisSpec};
    use std::sync::Arc;

    fn ring(ys: &[i64]) -> crate::series::RingRef {
        Ring::new(
            Arc::new(BasisSpec::unit()),
            vec![Value::int(1)],
            ys.iter().map(|v| Value::int(*v)).collect(),
        )
        .unwrap()
    }

    fn s(rg: &crate::series::RingRef, t: &[(&[u32], &[u32], i64)]) -> TruncatedSeries {
        TruncatedSeries::exact(rg.clone(), t.iter().map(|(x, y, c)| (mono(x, y), qi(*c)))).unwrap()
    }

    #[test]
    fn decompose_regroups_dz() {
        let rg = ring(&[2]);
        let z = s(&rg, &[(&[0], &[1], 1)]);
        let x = s(&rg, &[(&[1], &[0], 1)]);
        let omega = LogForm::dlog_x(rg.clone(), 0)
            .mul_function(&z)
            .unwrap()
            .add(&LogForm::dy(rg.clone(), 0).mul_function(&x).unwrap())
            .unwrap();
        let lv = decompose_levels(&omega, 0).unwrap();
        assert!(lv.h[0].is_zero());
        assert!(lv.eta[0].is_zero());
        assert!(lv.eta[1].sub(&LogForm::dlog_x(rg.clone(), 0)).unwrap().is_zero());
        assert_eq!(lv.h[1], x);
        assert!(lv.reconstruct().unwrap().sub(&omega).unwrap().is_zero());
        // Cloud {(0,1)}: level 1 has min(0, 1) = 0.
        let nd = newton_polygon(&lv, &Value::int(2)).unwrap();
        assert_eq!(nd.polygon.abscissa(1), Value::int(0));
    }

    #[test]
    fn decompose_trivial_cases() {
        let rg = ring(&[1]);
        let w = LogForm::dlog_x(rg.clone(), 0);
        let lv = decompose_levels(&w, 0).unwrap();
        assert_eq!(lv.len(), 1);
        assert!(lv.eta[0].sub(&w).unwrap().is_zero());
        let dz = LogForm::dy(rg.clone(), 0);
        let lv = decompose_levels(&dz, 0).unwrap();
        assert!(lv.eta.iter().all(|e| e.is_zero()));
        assert_eq!(lv.h[1], TruncatedSeries::one(rg.clone()));
    }

    #[test]
    fn decompose_rejects_higher_dependents() {
        let rg = ring(&[1, 1]);
        let w = LogForm::dy(rg, 1);
        assert!(matches!(
            decompose_levels(&w, 0),
            Err(DriverError::TooManyDependents { .. })
        ));
    }

    #[test]
    fn residues_of_exact_form_vanish() {
        let rg = ring(&[1]);
        let f = s(&rg, &[(&[2], &[1], 1), (&[1], &[3], -2), (&[3], &[0], 5)]);
        let lv = decompose_levels(&LogForm::d_function(&f), 0).unwrap();
        for res in level_residues(&lv, &Value::int(3)).unwrap() {
            assert!(res.passes);
            assert_eq!(res.theta_value, "inf");
            assert_eq!(res.delta_value, "inf");
        }
    }

    #[test]
    fn euler_residues_pass() {
        let rg = ring(&[1]);
        let f = s(&rg, &[(&[1], &[1], -1), (&[2], &[0], 1)]);
        let g = s(&rg, &[(&[2], &[0], 1)]);
        let w = LogForm::dlog_x(rg.clone(), 0)
            .mul_function(&f)
            .unwrap()
            .add(&LogForm::dy(rg.clone(), 0).mul_function(&g).unwrap())
            .unwrap();
        let lv = decompose_levels(&w, 0).unwrap();
        assert!(level_residues(&lv, &Value::int(3)).unwrap().iter().all(|r| r.passes));
    }

    struct NoRecursion;
    impl LowerFinalizer for NoRecursion {
        fn finalize(&mut self, _: &mut Workspace, _: Handle, _: &Value) -> Result<(), DriverError> {
            panic!("no recursion expected")
        }
    }

    #[test]
    fn prepare_without_lower_parameters_is_identity() {
        let m = rational_model(&[qi(1)], &[(&[(qi(1), qi(1)), (qi(2), qi(1))], Some(qi(10)))], qi(20)).unwrap();
        let rg = m.ring().clone();
        let zx = s(&rg, &[(&[1], &[1], 1)]);
        let unit = s(&rg, &[(&[0], &[0], 1), (&[1], &[0], 1)]);
        // z x dx/x + z x (1 + x) dz/z.
        let w = LogForm::dlog_x(rg.clone(), 0)
            .mul_function(&zx)
            .unwrap()
            .add(&LogForm::dy(rg.clone(), 0).mul_function(&s(&rg, &[(&[1], &[0], 1)]).mul(&unit).unwrap()).unwrap())
            .unwrap();
        let mut ws = Workspace::new(m, Value::int(8), 100).unwrap();
        let h = ws.track_form(w);
        let rep = strict_prepare(&mut ws, h, &Value::int(3), 0, &mut NoRecursion).unwrap();
        assert_eq!(ws.steps(), 0);
        assert_eq!(rep.rounds, 0);
        assert_eq!(rep.critical_height, 1);
        let again = strict_prepare(&mut ws, h, &Value::int(3), 0, &mut NoRecursion).unwrap();
        assert_eq!(again, rep);
    }

    #[test]
    fn main_height_examples() {
        let rg = ring(&[1]);
        // Single dominant level 0 at abscissa 2.
        let lv = decompose_levels(&LogForm::dlog_x(rg.clone(), 0).mul_function(&s(&rg, &[(&[2], &[0], 1)])).unwrap(), 0).unwrap();
        let nd = newton_polygon(&lv, &Value::int(1)).unwrap();
        assert_eq!(dominant_main_height(&lv, &nd, &Value::int(2)).unwrap(), Some(0));
        assert_eq!(dominant_main_height(&lv, &nd, &Value::int(1)).unwrap(), None);
        // Two dominant levels at s = 1, 2 on the line of value 3.
        let f = s(&rg, &[(&[2], &[1], 1), (&[1], &[2], 1)]);
        let lv = decompose_levels(&LogForm::dlog_x(rg.clone(), 0).mul_function(&f).unwrap(), 0).unwrap();
        let nd = newton_polygon(&lv, &Value::int(1)).unwrap();
        assert_eq!(dominant_main_height(&lv, &nd, &Value::int(3)).unwrap(), Some(1));
    }
}
