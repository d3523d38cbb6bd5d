//! The recursive driver: resonance classification of the critical part,
//! the coordinate-change steps that break resonance, and the function,
//! truncated-form and foliation modes.
//!
//! Every driver round prepares the pair, reads the critical data at
//! `delta = nu(z)` and either applies a Puiseux package on `z` or, when the
//! critical part stays resonant under packages with the same height, a
//! coordinate change `z' = z + x^p U` that strictly raises `nu(z)`.

use num_integer::binomial;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::cohomology::{truncated_divide, twisted_poincare};
use crate::logforms::LogForm;
use crate::model::{ParamModel, Transform};
use crate::preparation::{
    level_minimal, newton_polygon, strict_prepare, AnyLevels, LevelSet, Levels, LowerFinalizer, NewtonData,
};
use crate::series::{vmin, Finality, Mono, SeriesError, TruncatedSeries};
use crate::valuegroup::{qi, Value, Q};
use crate::workspace::{DriverError, Handle, Op, Purpose, RoundSnapshot, TraceEvent, Tracked, Workspace};

/// `vec_s`: constants of the logarithmic coefficients (and of `h_s`, or of
/// the function level) at the minimal block of a level on the polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedEntry {
    pub s: usize,
    pub block: Vec<u32>,
    pub vec: Vec<Q>,
}

fn component_vector(p: &Tracked, x: &[u32]) -> Vec<Q> {
    match p {
        Tracked::Form(w) => w.log_vector_at(x),
        Tracked::Series(f) => vec![f.coeff(&Mono::new(x.to_vec(), vec![0; f.ring().m()]))],
    }
}

/// Zero (`None`) unless the level lies on the polygon and its minimal block
/// carries a unit.
pub fn reduced_part<L: LevelSet + ?Sized>(
    levels: &L,
    newton: &NewtonData,
    s: usize,
) -> Result<Option<ReducedEntry>, DriverError> {
    if s >= levels.count() {
        return Ok(None);
    }
    let Some((block, v)) = level_minimal(levels, s)? else {
        return Ok(None);
    };
    if newton.polygon.abscissa(s as i64) != v {
        return Ok(None);
    }
    let vec: Vec<Q> = levels
        .components(s)
        .iter()
        .flat_map(|p| component_vector(p, &block))
        .collect();
    if vec.iter().all(|c| c.is_zero()) {
        return Ok(None);
    }
    Ok(Some(ReducedEntry { s, block, vec }))
}

/// Normal form of the reduced critical part.
#[derive(Clone, Debug, PartialEq)]
pub enum Resonance {
    None,
    R1,
    /// `x^I (Phi - lambda)^chi dx^tau/x^tau`.
    R2a(Vec<Q>),
    /// `xi x^I (Phi - lambda)^(chi-1) ((Phi - lambda) dx^upsilon/x^upsilon + Phi dPhi/Phi)`.
    R2b(Vec<Q>),
}

impl Resonance {
    pub fn is_r2(&self) -> bool {
        matches!(self, Resonance::R2a(_) | Resonance::R2b(_))
    }

    pub fn label(&self) -> String {
        let v = |t: &[Q]| t.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Resonance::None => "none".into(),
            Resonance::R1 => "r1".into(),
            Resonance::R2a(t) => format!("r2a({})", v(t)),
            Resonance::R2b(u) => format!("r2b({})", v(u)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceStatus {
    pub kind: Resonance,
    /// Ramification index of the next package on `z`.
    pub d: i64,
    pub p: Vec<i64>,
    /// Constant of `Phi = z^d / x^p` at the center.
    pub lambda: Q,
    /// `I*`: the common x-exponent of the critical segment.
    pub block: Vec<u32>,
    /// Constant of the `dz/z` part at the top of the segment, zero for r2a.
    pub xi: Q,
    pub chi: u32,
}

impl ResonanceStatus {
    /// Coordinate-change steps need an unramified package with `x^p` a monomial.
    pub fn admits_coordinate_change(&self) -> bool {
        self.d == 1 && self.p.iter().all(|e| *e >= 0)
    }
}

/// Constant of the next package on `y_index`, read on a scratch model.
pub fn package_constant(model: &ParamModel, index: usize) -> Result<(crate::model::PackagePlan, Q), DriverError> {
    let mut probe = model.clone();
    let rec = probe.puiseux_package(index)?;
    match &rec.transform {
        Transform::PuiseuxPackage(p) => Ok((p.plan.clone(), p.lambda.clone())),
        _ => Err(DriverError::ImpossibleBranch("package produced another transform".into())),
    }
}

/// `c C(n, k) (-lambda)^(n-k)`.
fn binomial_coeff(c: &Q, n: u32, k: u32, lambda: &Q) -> Q {
    if k > n {
        return Q::zero();
    }
    let b = Q::from_integer(binomial(num_bigint::BigInt::from(n), num_bigint::BigInt::from(k)));
    let mut pw = Q::one();
    for _ in 0..(n - k) {
        pw *= -lambda.clone();
    }
    c * b * pw
}

fn critical_range(newton: &NewtonData) -> Option<(u32, u32)> {
    newton
        .critical
        .as_ref()
        .map(|c| (c.segment.0.ordinate.min(c.segment.1.ordinate), c.height))
}

/// The reduced entries on the critical segment, indexed by ordinate.
fn segment_entries<L: LevelSet + ?Sized>(
    levels: &L,
    newton: &NewtonData,
) -> Result<Vec<Option<ReducedEntry>>, DriverError> {
    let (lo, hi) = critical_range(newton).ok_or_else(|| DriverError::NotPrepared("empty polygon".into()))?;
    let mut out = vec![None; hi as usize + 1];
    for s in lo..=hi {
        out[s as usize] = reduced_part(levels, newton, s as usize)?;
    }
    Ok(out)
}

fn common_block(entries: &[Option<ReducedEntry>], p: &[i64], r: usize) -> Vec<u32> {
    for e in entries.iter().flatten() {
        return (0..r)
            .map(|i| (e.block[i] as i64 + e.s as i64 * p[i]).max(0) as u32)
            .collect();
    }
    vec![0; r]
}

/// Matches the reduced critical part of a prepared form against r1, r2a, r2b.
pub fn classify_resonance(
    model: &ParamModel,
    levels: &Levels,
    newton: &NewtonData,
    gamma: &Value,
) -> Result<ResonanceStatus, DriverError> {
    let b = model.basis().clone();
    let Some(crit) = &newton.critical else {
        return Err(DriverError::NotPrepared("empty polygon".into()));
    };
    if b.lt(gamma, &crit.value)? {
        return Err(DriverError::NotPrepared(format!(
            "critical value {} exceeds gamma {gamma}",
            crit.value
        )));
    }
    let index = levels.index;
    let r = model.r();
    let (plan, lambda) = package_constant(model, index)?;
    let chi = crit.height;
    let entries = segment_entries(levels, newton)?;
    let mut status = ResonanceStatus {
        kind: Resonance::None,
        d: plan.d,
        p: plan.p.clone(),
        lambda: lambda.clone(),
        block: common_block(&entries, &plan.p, r),
        xi: Q::zero(),
        chi,
    };
    let zero = vec![Q::zero(); r + 1];
    let vec_at = |s: u32| -> Vec<Q> {
        entries
            .get(s as usize)
            .and_then(|e| e.as_ref())
            .map_or(zero.clone(), |e| e.vec.clone())
    };
    if plan.d >= 2 {
        let single = critical_range(newton) == Some((1, 1));
        if chi == 1 && single {
            let v = vec_at(1);
            let h = &v[r];
            let pd: Vec<Q> = plan.p.iter().map(|e| Q::new((*e).into(), plan.d.into())).collect();
            let balanced = (0..r).all(|i| (&v[i] + h * &pd[i]).is_zero());
            if !h.is_zero() && balanced {
                status.kind = Resonance::R1;
                status.xi = h.clone();
            }
        }
        return Ok(status);
    }
    let pq: Vec<Q> = plan.p.iter().map(|e| qi(*e)).collect();
    // T_s = f_s + h_s p and Q_s = h_s, for s = 0..chi.
    let t: Vec<Vec<Q>> = (0..=chi)
        .map(|s| {
            let v = vec_at(s);
            (0..r).map(|i| &v[i] + &v[r] * &pq[i]).collect()
        })
        .collect();
    let qv: Vec<Q> = (0..=chi).map(|s| vec_at(s)[r].clone()).collect();
    if qv.iter().all(|c| c.is_zero()) {
        let tau = t[chi as usize].clone();
        let matches = tau.iter().any(|c| !c.is_zero())
            && (0..=chi).all(|s| {
                (0..r).all(|i| t[s as usize][i] == binomial_coeff(&tau[i], chi, s, &lambda))
            });
        if matches {
            status.kind = Resonance::R2a(tau);
        }
        return Ok(status);
    }
    let c = qv[chi as usize].clone();
    if c.is_zero() {
        return Ok(status);
    }
    // Q = c Phi (Phi - lambda)^(chi - 1).
    let q_ok = qv[0].is_zero() && (1..=chi).all(|s| qv[s as usize] == binomial_coeff(&c, chi - 1, s - 1, &lambda));
    let upsilon: Vec<Q> = t[chi as usize].iter().map(|v| v / &c).collect();
    let t_ok = (0..=chi).all(|s| {
        (0..r).all(|i| t[s as usize][i] == binomial_coeff(&(&c * &upsilon[i]), chi, s, &lambda))
    });
    if q_ok && t_ok {
        status.kind = Resonance::R2b(upsilon);
        status.xi = c;
    }
    Ok(status)
}

/// Whether `nu(x^upsilon) < 0` for a rational exponent vector.
pub fn is_negative_exponent(model: &ParamModel, upsilon: &[Q]) -> Result<bool, DriverError> {
    let b = model.basis();
    let v = upsilon
        .iter()
        .enumerate()
        .fold(Value::zero(b.dim()), |acc, (i, u)| acc.add(&model.x_value(i).scale(u)));
    Ok(b.signum(&v)? == std::cmp::Ordering::Less)
}

/// A height-one resonance class with the sign of its `upsilon` resolved.
#[derive(Clone, Debug, PartialEq)]
pub enum HeightOneClass {
    R1,
    R2a,
    /// `upsilon` is zero, or `nu(x^upsilon) >= 0`.
    R2bNonnegative { zero: bool },
    R2bNegative,
    NonResonant,
}

impl HeightOneClass {
    pub fn of(model: &ParamModel, kind: &Resonance) -> Result<Self, DriverError> {
        Ok(match kind {
            Resonance::None => HeightOneClass::NonResonant,
            Resonance::R1 => HeightOneClass::R1,
            Resonance::R2a(_) => HeightOneClass::R2a,
            Resonance::R2b(u) if is_negative_exponent(model, u)? => HeightOneClass::R2bNegative,
            Resonance::R2b(u) => HeightOneClass::R2bNonnegative {
                zero: u.iter().all(Zero::is_zero),
            },
        })
    }
}

/// Height-one transitions across a normalized Puiseux package when the
/// result is resonant with height one again. In particular r1 needs a
/// negative r2b right before it, so it cannot follow a nonnegative r2b.
pub fn check_package_transition(before: &HeightOneClass, after: &HeightOneClass) -> Result<(), String> {
    use HeightOneClass::*;
    let allowed = match (before, after) {
        (_, NonResonant) => true,
        (R2bNegative, R1) => true,
        (_, R1) => false,
        (R2a, next) => *next == R2a,
        (R2bNonnegative { .. } | R1, next) => *next == R2bNonnegative { zero: false },
        (R2bNegative, next) => *next != R2a,
        (NonResonant, _) => true,
    };
    if allowed {
        Ok(())
    } else {
        Err(format!("resonance {before:?} followed by {after:?} across a package"))
    }
}

/// Whether the critical part of a prepared function is `c x^I (Phi - lambda)^chi`.
pub fn function_is_binomial(levels: &crate::preparation::FunctionLevels, newton: &NewtonData, lambda: &Q) -> Result<bool, DriverError> {
    let Some((_, chi)) = critical_range(newton) else {
        return Ok(false);
    };
    let entries = segment_entries(levels, newton)?;
    let at = |s: u32| entries.get(s as usize).and_then(|e| e.as_ref()).map_or(Q::zero(), |e| e.vec[0].clone());
    let c = at(chi);
    Ok(!c.is_zero() && (0..=chi).all(|s| at(s) == binomial_coeff(&c, chi, s, lambda)))
}

/// Terminal status of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum OutcomeStatus {
    FinalDominant(Value),
    FinalRecessive,
    /// `omega = x^I omega'` with `omega'` 0-final dominant.
    PreSimpleCorner { monomial: Vec<u32> },
    /// Stable height-one resonance carried by a dependent direction.
    PreSimpleTrace { dependent: usize, nu_z: Value },
}

impl OutcomeStatus {
    pub fn label(&self) -> String {
        match self {
            OutcomeStatus::FinalDominant(v) => format!("final_dominant {v}"),
            OutcomeStatus::FinalRecessive => "final_recessive".into(),
            OutcomeStatus::PreSimpleCorner { monomial } => format!("pre_simple_corner {monomial:?}"),
            OutcomeStatus::PreSimpleTrace { dependent, nu_z } => {
                format!("pre_simple_trace y{dependent} nu {nu_z}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct UniformizeOutcome {
    pub status: OutcomeStatus,
    pub trace: Vec<TraceEvent>,
    pub model: ParamModel,
    /// The object pulled back to the final model.
    pub object: Tracked,
    /// Working threshold of the run that produced the status.
    pub gamma: Value,
}

impl UniformizeOutcome {
    pub fn packages(&self) -> usize {
        self.model
            .history()
            .iter()
            .filter(|r| matches!(r.transform, Transform::PuiseuxPackage(_)))
            .count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriverConfig {
    /// Rounds per driver invocation before `IterationLimit`.
    pub max_rounds: usize,
    /// Committed transformations before `IterationLimit`.
    pub max_steps: usize,
    /// Threshold doublings in foliation mode.
    pub max_escalations: usize,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            max_steps: 2000,
            max_escalations: 6,
        }
    }
}

fn finality_of(t: &Tracked, gamma: &Value) -> Result<Finality, DriverError> {
    Ok(match t {
        Tracked::Series(f) => f.finality(gamma)?,
        Tracked::Form(w) => w.finality(gamma)?,
    })
}

fn y_index_of(t: &Tracked) -> usize {
    match t {
        Tracked::Series(f) => f.y_index(),
        Tracked::Form(w) => w.y_index(),
    }
}

fn explicit_value_of(t: &Tracked) -> Result<Value, DriverError> {
    Ok(match t {
        Tracked::Series(f) => f.explicit_value()?,
        Tracked::Form(w) => w.explicit_value()?,
    })
}

/// Divides every coefficient of a form by `x^I`.
fn form_div_x(w: &LogForm, x: &[u32]) -> Result<LogForm, DriverError> {
    let mut failed = false;
    let out = w.map_coeffs(|f| match f.div_x_monomial(x) {
        Some(g) => Ok(g),
        None => {
            failed = true;
            Ok(TruncatedSeries::zero(f.ring().clone()))
        }
    })?;
    if failed {
        return Err(DriverError::NotPrepared(format!("form not divisible by x^{x:?}")));
    }
    Ok(out)
}

fn series_div_x(f: &TruncatedSeries, x: &[u32]) -> Result<TruncatedSeries, DriverError> {
    f.div_x_monomial(x)
        .ok_or_else(|| DriverError::NotPrepared(format!("series not divisible by x^{x:?}")))
}

fn x_monomial(ring: &crate::series::RingRef, p: &[i64]) -> TruncatedSeries {
    let x: Vec<u32> = p.iter().map(|e| *e as u32).collect();
    TruncatedSeries::monomial(ring.clone(), Mono::new(x, vec![0; ring.m()]), Q::one())
}

/// What a driver round decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Action {
    Package,
    HeightOne,
    Tschirnhausen,
}

impl Action {
    fn label(self) -> &'static str {
        match self {
            Action::Package => "package",
            Action::HeightOne => "height_one",
            Action::Tschirnhausen => "tschirnhausen",
        }
    }
}

/// Data read at the start of a round.
struct RoundState {
    levels: AnyLevels,
    newton: NewtonData,
    status: Option<ResonanceStatus>,
}

/// The recursive driver. It is its own lower finalizer: preparation hands
/// level components back to [`Engine::drive`].
pub struct Engine {
    config: DriverConfig,
    depth: usize,
    lookahead: bool,
}

impl LowerFinalizer for Engine {
    fn finalize(&mut self, ws: &mut Workspace, target: Handle, delta: &Value) -> Result<(), DriverError> {
        self.depth += 1;
        let res = self.drive(ws, target, delta);
        self.depth -= 1;
        res
    }
}

impl Engine {
    pub fn new(config: DriverConfig) -> Self {
        Self {
            config,
            depth: 0,
            lookahead: true,
        }
    }

    /// Transforms until the tracked object is `gamma`-final.
    pub fn drive(&mut self, ws: &mut Workspace, h: Handle, gamma: &Value) -> Result<(), DriverError> {
        let b = ws.model().basis().clone();
        // (index, chi) of a resonance that packages do not break.
        let mut persistent: Option<(usize, u32)> = None;
        // Height-one class of the previous round when that round applied a
        // package on the same `z`; the transition rules hold only then.
        let mut last_height_one: Option<(usize, HeightOneClass)> = None;
        for _ in 0..self.config.max_rounds {
            if finality_of(ws.get(h), gamma)?.is_final() {
                return Ok(());
            }
            let ell = y_index_of(ws.get(h));
            if ell == 0 {
                return Err(DriverError::ImpossibleBranch(
                    "object free of dependent parameters is not final".into(),
                ));
            }
            let index = ell - 1;
            strict_prepare(ws, h, gamma, index, self)?;
            if finality_of(ws.get(h), gamma)?.is_final() {
                return Ok(());
            }
            let state = self.read_state(ws, h, index, gamma)?;
            let sigma = state.newton.critical_value();
            let chi = state.newton.critical_height();
            let class = match (&state.levels, &state.status) {
                (AnyLevels::Form(_), Some(st)) if chi == 1 => Some(HeightOneClass::of(ws.model(), &st.kind)?),
                _ => None,
            };
            if let (Some((prev_index, prev)), Some(now)) = (&last_height_one, &class) {
                if *prev_index == index {
                    check_package_transition(prev, now).map_err(DriverError::ImpossibleBranch)?;
                }
            }
            let action = match &state.status {
                _ if b.lt(gamma, &sigma)? || chi == 0 => Action::Package,
                None => Action::Package,
                Some(st) if !st.admits_coordinate_change() => Action::Package,
                Some(st) => {
                    let resonant = match &state.levels {
                        AnyLevels::Form(_) => st.kind.is_r2(),
                        AnyLevels::Function(_) => st.kind != Resonance::None && chi >= 2,
                    };
                    if !resonant {
                        Action::Package
                    } else if persistent == Some((index, chi)) || self.package_keeps(ws, h, index, gamma, chi)? {
                        persistent = Some((index, chi));
                        match (&state.levels, chi) {
                            (AnyLevels::Form(_), 1) => Action::HeightOne,
                            _ => Action::Tschirnhausen,
                        }
                    } else {
                        Action::Package
                    }
                }
            };
            if action == Action::Package {
                persistent = None;
            }
            last_height_one = match (action, class) {
                (Action::Package, Some(c)) => Some((index, c)),
                _ => None,
            };
            ws.round(RoundSnapshot {
                depth: self.depth,
                dependent: index + 1,
                gamma: gamma.to_string(),
                explicit_value: explicit_value_of(ws.get(h))?.to_string(),
                nu_z: state.newton.delta.to_string(),
                critical_value: sigma.to_string(),
                critical_height: chi,
                main_is_critical: state.newton.main_is_critical(),
                resonance: state.status.as_ref().map_or("skipped".into(), |s| s.kind.label()),
                action: action.label().into(),
                cloud: state.newton.cloud.clone(),
                delta: state.newton.delta.clone(),
            });
            match action {
                Action::Package => {
                    ws.apply(Op::Package { index }, Purpose::Package)?;
                }
                Action::HeightOne => {
                    let st = state.status.expect("resonant");
                    height_one_step(ws, h, index, gamma, &st)?;
                }
                Action::Tschirnhausen => {
                    let st = state.status.expect("resonant");
                    match state.levels {
                        AnyLevels::Form(_) => tschirnhausen_step(ws, h, index, gamma, &st)?,
                        AnyLevels::Function(_) => function_tschirnhausen_step(ws, h, index, &st)?,
                    }
                }
            }
        }
        Err(DriverError::IterationLimit {
            what: format!("driver rounds on y{}", y_index_of(ws.get(h))),
            cap: self.config.max_rounds,
        })
    }

    fn read_state(&mut self, ws: &Workspace, h: Handle, index: usize, gamma: &Value) -> Result<RoundState, DriverError> {
        let b = ws.model().basis().clone();
        let levels = AnyLevels::of(ws, h, index)?;
        let delta = ws.model().y_value(index)?;
        let newton = newton_polygon(levels.as_set(), &delta)?;
        let sigma = newton.critical_value();
        let status = if newton.critical.is_none() || b.lt(gamma, &sigma)? {
            None
        } else {
            match &levels {
                AnyLevels::Form(l) => Some(classify_resonance(ws.model(), l, &newton, gamma)?),
                AnyLevels::Function(l) => {
                    let (plan, lambda) = package_constant(ws.model(), index)?;
                    let binomial = plan.d == 1 && function_is_binomial(l, &newton, &lambda)?;
                    let entries = segment_entries(l, &newton)?;
                    Some(ResonanceStatus {
                        kind: if binomial { Resonance::R2a(vec![]) } else { Resonance::None },
                        d: plan.d,
                        block: common_block(&entries, &plan.p, ws.model().r()),
                        p: plan.p,
                        lambda,
                        xi: Q::zero(),
                        chi: newton.critical_height(),
                    })
                }
            }
        };
        Ok(RoundState { levels, newton, status })
    }

    /// Whether a package on `z` leaves the pair non-final with the same
    /// resonant critical height; decided on a scratch copy.
    fn package_keeps(&mut self, ws: &Workspace, h: Handle, index: usize, gamma: &Value, chi: u32) -> Result<bool, DriverError> {
        if !self.lookahead {
            return Ok(false);
        }
        let mut probe = ws.clone();
        let mut scout = Engine {
            config: self.config.clone(),
            depth: self.depth + 1,
            lookahead: false,
        };
        let verdict = (|| -> Result<bool, DriverError> {
            probe.apply(Op::Package { index }, Purpose::Package)?;
            if finality_of(probe.get(h), gamma)?.is_final() || y_index_of(probe.get(h)) != index + 1 {
                return Ok(false);
            }
            strict_prepare(&mut probe, h, gamma, index, &mut scout)?;
            if finality_of(probe.get(h), gamma)?.is_final() {
                return Ok(false);
            }
            let st = scout.read_state(&probe, h, index, gamma)?;
            let same = st.newton.critical_height() == chi
                && st.status.as_ref().is_some_and(|s| s.kind != Resonance::None && s.kind != Resonance::R1);
            Ok(same)
        })();
        // A package that cannot even be evaluated gives no evidence of progress.
        Ok(verdict.unwrap_or(true))
    }
}

/// Blow-ups making the x-parts of the given levels below their windows
/// totally ordered, so that each level is its minimal monomial times a series.
fn principalize_levels(
    ws: &mut Workspace,
    h: Handle,
    index: usize,
    ordinates: &[usize],
    margin: &Value,
) -> Result<(), DriverError> {
    let b = ws.model().basis().clone();
    let levels = AnyLevels::of(ws, h, index)?;
    let set = levels.as_set();
    let mut monos: Vec<Vec<u32>> = Vec::new();
    for &s in ordinates {
        if s >= set.count() {
            continue;
        }
        let Some((_, v)) = level_minimal(set, s)? else { continue };
        let window = v.add(margin);
        for part in set.components(s) {
            let support = match &part {
                Tracked::Series(f) => f.x_support(),
                Tracked::Form(w) => w.x_support(),
            };
            for x in support {
                if b.lt(&ws.model().ring().x_value(&x), &window)? {
                    monos.push(x);
                }
            }
        }
    }
    ws.principalize(&monos)?;
    Ok(())
}

/// `alpha_s = eta_s / x^{I_s}` and `H_s = h_s / x^{I_s}` on the window `margin`.
fn normalized_level(levels: &Levels, s: usize, margin: &Value) -> Result<(Vec<u32>, LogForm, TruncatedSeries), DriverError> {
    let (block, v) = level_minimal(levels, s)?
        .ok_or_else(|| DriverError::NotPrepared(format!("level {s} vanishes on the critical segment")))?;
    let ring = levels.eta[s].ring().clone();
    let cut = v.add(margin);
    // Weight-truncation also bounds the x-value of the kept terms.
    let eta = levels.eta[s].truncate(&cut)?;
    let hs = levels.h[s].truncate(&cut)?;
    let eta = form_div_x(&eta, &block)?;
    let hs = series_div_x(&hs, &block)?;
    let _ = ring;
    Ok((block, eta, hs))
}

fn apply_shift(
    ws: &mut Workspace,
    index: usize,
    shift: TruncatedSeries,
    purpose: Purpose,
) -> Result<(), DriverError> {
    let before = ws.model().y_value(index)?;
    if shift.is_zero() {
        ws.note(format!("{} step on y{} has zero shift", purpose_label(purpose), index + 1));
        return Err(DriverError::ProgressAssertionFailed {
            before: before.clone(),
            after: before,
        });
    }
    ws.apply(Op::CoordinateChange { index, shift }, purpose)?;
    let after = ws.model().y_value(index)?;
    let b = ws.model().basis().clone();
    if !b.lt(&before, &after)? {
        return Err(DriverError::ProgressAssertionFailed { before, after });
    }
    Ok(())
}

fn purpose_label(p: Purpose) -> &'static str {
    match p {
        Purpose::Package => "package",
        Purpose::HeightOne => "height-one",
        Purpose::Tschirnhausen => "tschirnhausen",
        Purpose::Horizontal => "horizontal",
        Purpose::Principalization => "principalization",
    }
}

/// Keeps the terms of weight below `bound`, so the shift is a polynomial.
fn polynomial_part(f: &TruncatedSeries, bound: &Value) -> Result<TruncatedSeries, DriverError> {
    let t = f.truncate(bound)?;
    Ok(TruncatedSeries::exact(t.ring().clone(), t.terms().iter().map(|(m, c)| (m.clone(), c.clone())))?)
}

/// Critical height one, resonance r2a or r2b: `z' = z + x^p U` with `U`
/// from a truncated division (r2a) or a twisted Poincaré problem (r2b).
pub fn height_one_step(
    ws: &mut Workspace,
    h: Handle,
    index: usize,
    gamma: &Value,
    status: &ResonanceStatus,
) -> Result<(), DriverError> {
    let _ = gamma;
    let delta = ws.model().y_value(index)?;
    principalize_levels(ws, h, index, &[0, 1], &delta)?;
    let delta = ws.model().y_value(index)?;
    let omega = ws.form(h).clone();
    let levels = crate::preparation::decompose_levels(&omega, index)?;
    let (_, alpha0, _) = normalized_level(&levels, 0, &delta)?;
    let (_, alpha1, h1) = normalized_level(&levels, 1, &delta)?;
    let b = ws.model().basis().clone();
    let ring = ws.model().ring().clone();
    // Recompute p on the principalized model.
    let plan = ws.model().plan_package(index)?;
    if plan.d != 1 || plan.p.iter().any(|e| *e < 0) {
        return Err(DriverError::NotPrepared("height-one step needs an unramified package".into()));
    }
    let xp = x_monomial(&ring, &plan.p);
    let (u, eps, branch) = match &status.kind {
        Resonance::R2a(_) => {
            let eps1 = b.min(&delta, &h1.explicit_value()?)?;
            let div = truncated_divide(&alpha1, &alpha0, &eps1)?;
            (div.h, eps1, "eps1")
        }
        Resonance::R2b(_) => {
            let xi = h1.constant_term();
            if xi.is_zero() {
                return Err(DriverError::NotPrepared("r2b without a unit dz/z coefficient".into()));
            }
            let star = LogForm::log_combination(ring.clone(), &alpha1.log_vector_at(&vec![0; ring.r()]));
            let pq: Vec<Q> = plan.p.iter().map(|e| qi(*e)).collect();
            let sigma = star
                .scale(&(Q::one() / &xi))
                .add(&LogForm::log_combination(ring.clone(), &pq))?;
            if sigma.is_zero() {
                return Err(DriverError::ImpossibleBranch("r2b-0 reached in a height-one step".into()));
            }
            let tail1 = alpha1.sub(&star)?.explicit_value()?;
            let tail_h = h1.sub(&TruncatedSeries::constant(ring.clone(), xi.clone()))?.explicit_value()?;
            let eps2 = b.min(&b.min(&delta, &tail1)?, &tail_h)?;
            let sol = twisted_poincare(&alpha0, &sigma, &eps2)?;
            (sol.u.scale(&(Q::one() / &xi)), eps2, "eps2")
        }
        _ => return Err(DriverError::NotPrepared("height-one step needs r2a or r2b".into())),
    };
    ws.note(format!("height-one step on y{}: branch {branch}, eps {eps}", index + 1));
    let shift = polynomial_part(&u, &eps)?.mul(&xp)?;
    let shift = TruncatedSeries::exact(ring, shift.terms().iter().map(|(m, c)| (m.clone(), c.clone())))?;
    apply_shift(ws, index, shift, Purpose::HeightOne)
}

/// Critical height `chi >= 2`: the shift `F x^p` with `F = U_{chi-1} / (chi U_chi)`
/// removes the subcritical level of the resonant critical part.
pub fn tschirnhausen_step(
    ws: &mut Workspace,
    h: Handle,
    index: usize,
    gamma: &Value,
    status: &ResonanceStatus,
) -> Result<(), DriverError> {
    let chi = status.chi as usize;
    if chi < 2 {
        return Err(DriverError::NotPrepared("tschirnhausen step needs chi >= 2".into()));
    }
    if let Resonance::R2b(_) = status.kind {
        // The dz coefficient carries the resonance: run the function step on it.
        return horizontal_tschirnhausen(ws, h, index, status);
    }
    let b = ws.model().basis().clone();
    let delta = ws.model().y_value(index)?;
    let ordinates: Vec<usize> = (0..=chi).collect();
    principalize_levels(ws, h, index, &ordinates, &delta)?;
    let delta = ws.model().y_value(index)?;
    let omega = ws.form(h).clone();
    let levels = crate::preparation::decompose_levels(&omega, index)?;
    let newton = newton_polygon(&levels, &delta)?;
    let sigma = newton.critical_value();
    let horizontal = omega.dy_coeff(index).explicit_value()?;
    let eps = b
        .min(gamma, &horizontal)?
        .sub(&sigma)
        .map(|v| v.add(&delta))
        .unwrap_or(Value::Infinity);
    let rho = b.min(&eps, &delta)?;
    if b.signum(&rho)? != std::cmp::Ordering::Greater {
        return Err(DriverError::NotPrepared(format!("tschirnhausen epsilon {eps} is not positive")));
    }
    let ring = ws.model().ring().clone();
    let (_, alpha0, _) = normalized_level(&levels, 0, &delta)?;
    let mut units = Vec::new();
    for s in [chi - 1, chi] {
        let (_, alpha_s, _) = normalized_level(&levels, s, &delta)?;
        units.push(truncated_divide(&alpha0, &alpha_s, &rho)?.h);
    }
    let cap = vmin(&b, units[1].bound(), units[0].bound())?;
    let cap = b.min(&cap, &rho)?;
    let f = units[0]
        .mul(&units[1].scale(&qi(chi as i64)).invert_unit(&cap)?)?
        .with_bound_at_most(&cap)?;
    let plan = ws.model().plan_package(index)?;
    let shift = polynomial_part(&f, &rho)?.mul(&x_monomial(&ring, &plan.p))?;
    let shift = TruncatedSeries::exact(ring, shift.terms().iter().map(|(m, c)| (m.clone(), c.clone())))?;
    ws.note(format!("tschirnhausen step on y{}: eps {eps}", index + 1));
    apply_shift(ws, index, shift, Purpose::Tschirnhausen)
}

/// The Tschirnhausen shift of a function read from its level `chi` and `chi - 1`.
fn tschirnhausen_shift(
    ws: &mut Workspace,
    h: Handle,
    index: usize,
    top: usize,
    level_of: impl Fn(&AnyLevels, usize) -> Option<TruncatedSeries>,
) -> Result<TruncatedSeries, DriverError> {
    let b = ws.model().basis().clone();
    let delta = ws.model().y_value(index)?;
    // Principalize the supports of both levels on their windows.
    let levels = AnyLevels::of(ws, h, index)?;
    let mut monos = Vec::new();
    let mut windows = Vec::new();
    for s in [top - 1, top] {
        let g = level_of(&levels, s).ok_or_else(|| DriverError::NotPrepared(format!("missing level {s}")))?;
        let v = g.explicit_value()?;
        let w = v.add(&delta);
        for x in g.x_support() {
            if b.lt(&ws.model().ring().x_value(&x), &w)? {
                monos.push(x);
            }
        }
        windows.push(w);
    }
    ws.principalize(&monos)?;
    let delta = ws.model().y_value(index)?;
    let levels = AnyLevels::of(ws, h, index)?;
    let lower = level_of(&levels, top - 1).expect("present");
    let upper = level_of(&levels, top).expect("present");
    let (ib, vb) = upper.minimal_x_part()?.ok_or_else(|| DriverError::NotPrepared("top level vanishes".into()))?;
    let cut = vb.add(&delta);
    let unit = series_div_x(&upper.truncate(&cut)?, &ib)?;
    let num = series_div_x(&lower.truncate(&vb.add(&delta).add(&delta))?, &ib)?;
    let cap = b.min(&delta.add(&delta), &vmin(&b, unit.bound(), num.bound())?)?;
    let f = num
        .mul(&unit.scale(&qi(top as i64)).invert_unit(&cap)?)?
        .with_bound_at_most(&cap)?;
    let ring = ws.model().ring().clone();
    // The shift must reach nu(z): keep it below twice that value.
    let shift = polynomial_part(&f, &delta.add(&delta))?;
    Ok(TruncatedSeries::exact(ring, shift.terms().iter().map(|(m, c)| (m.clone(), c.clone())))?)
}

/// `z' = z + f_{chi-1} / (chi f_chi)` for a function with binomial critical part.
pub fn function_tschirnhausen_step(
    ws: &mut Workspace,
    h: Handle,
    index: usize,
    status: &ResonanceStatus,
) -> Result<(), DriverError> {
    let top = status.chi as usize;
    let shift = tschirnhausen_shift(ws, h, index, top, |l, s| match l {
        AnyLevels::Function(f) => f.f.get(s).cloned(),
        AnyLevels::Form(_) => None,
    })?;
    ws.note(format!("function tschirnhausen step on y{}", index + 1));
    apply_shift(ws, index, shift, Purpose::Tschirnhausen)
}

/// Tschirnhausen step read from the `dz/z` levels `h_chi`, `h_{chi-1}`.
fn horizontal_tschirnhausen(ws: &mut Workspace, h: Handle, index: usize, status: &ResonanceStatus) -> Result<(), DriverError> {
    let top = status.chi as usize;
    // h_s = z^{s-1} part of H, so H has critical height chi - 1.
    let shift = tschirnhausen_shift(ws, h, index, top, |l, s| match l {
        AnyLevels::Form(f) => f.h.get(s).cloned(),
        AnyLevels::Function(_) => None,
    })?;
    let shift = shift.scale(&(qi(top as i64) / qi(top as i64 - 1)));
    ws.note(format!("horizontal tschirnhausen step on y{}", index + 1));
    apply_shift(ws, index, shift, Purpose::Tschirnhausen)
}

/// Whether `H = x^I (xi + U~)` with `nu(U~) > 0`, or `nu_A(H) > gamma`.
pub fn is_strongly_final(f: &TruncatedSeries, gamma: &Value) -> Result<bool, DriverError> {
    let b = f.basis().clone();
    let Some((x, v)) = f.minimal_x_part()? else {
        return Ok(true);
    };
    if b.lt(gamma, &v)? {
        return Ok(true);
    }
    let lead = f.coeff(&Mono::new(x.clone(), vec![0; f.ring().m()]));
    Ok(!lead.is_zero() && f.x_support().iter().all(|y| y.iter().zip(&x).all(|(a, c)| a >= c)))
}

/// Drives the horizontal coefficient `H = omega(d/dz)` to strong finality.
pub fn horizontal_monomialize(
    ws: &mut Workspace,
    omega: Handle,
    index: usize,
    gamma: &Value,
    engine: &mut Engine,
) -> Result<(), DriverError> {
    let hcoef = ws.form(omega).dy_coeff(index);
    let hh = ws.track_series(hcoef);
    let res = (|| {
        engine.drive(ws, hh, gamma)?;
        let hf = ws.series(hh).clone();
        if !is_strongly_final(&hf, gamma)? {
            let monos = hf.x_support();
            ws.principalize(&monos)?;
        }
        let hf = ws.series(hh).clone();
        if !is_strongly_final(&hf, gamma)? {
            return Err(DriverError::OutcomeVerification("horizontal coefficient is not strongly final".into()));
        }
        Ok(())
    })();
    ws.release(hh);
    res
}

fn working_cap(model: &ParamModel, gamma: &Value) -> Result<Value, DriverError> {
    let b = model.basis().clone();
    let mut wmax = b.max(&model.ring().zero_value(), &model.ring().zero_value())?;
    for w in model.ring().y_weights() {
        wmax = b.max(&wmax, w)?;
    }
    Ok(gamma.scale_int(2).add(&wmax))
}

fn run_mode(
    object: Tracked,
    gamma: &Value,
    model: &ParamModel,
    config: &DriverConfig,
) -> Result<(Workspace, Handle), (DriverError, Box<Workspace>)> {
    let cap = working_cap(model, gamma).map_err(|e| (e, Box::new(Workspace::new(model.clone(), Value::Infinity, 0).expect("empty workspace"))))?;
    let mut ws = match Workspace::new(model.clone(), cap, config.max_steps) {
        Ok(ws) => ws,
        Err(e) => return Err((e, Box::new(Workspace::new(model.clone(), Value::Infinity, 0).expect("empty workspace")))),
    };
    let h = match object {
        Tracked::Series(f) => ws.track_series(f),
        Tracked::Form(w) => ws.track_form(w),
    };
    let mut engine = Engine::new(config.clone());
    match engine.drive(&mut ws, h, gamma) {
        Ok(()) => Ok((ws, h)),
        Err(e) => Err((e, Box::new(ws))),
    }
}

fn final_outcome(ws: Workspace, h: Handle, gamma: &Value) -> Result<UniformizeOutcome, DriverError> {
    let object = ws.get(h).clone();
    let status = match finality_of(&object, gamma)? {
        Finality::DominantAt(v) => OutcomeStatus::FinalDominant(v),
        Finality::Recessive => OutcomeStatus::FinalRecessive,
        Finality::NotFinal => return Err(DriverError::OutcomeVerification("driver stopped on a non-final object".into())),
    };
    Ok(UniformizeOutcome {
        status,
        trace: ws.events().to_vec(),
        model: ws.model().clone(),
        object,
        gamma: gamma.clone(),
    })
}

/// A failed run together with the trace committed before the failure.
#[derive(Clone, Debug)]
pub struct RunFailure {
    pub error: DriverError,
    pub trace: Vec<TraceEvent>,
}

impl From<DriverError> for RunFailure {
    fn from(error: DriverError) -> Self {
        Self { error, trace: Vec::new() }
    }
}

fn failure((error, ws): (DriverError, Box<Workspace>)) -> RunFailure {
    RunFailure {
        error,
        trace: ws.events().to_vec(),
    }
}

/// Truncated form mode: a nested transformation after which `omega` is `gamma`-final.
pub fn uniformize(omega: &LogForm, gamma: &Value, model: &ParamModel, config: &DriverConfig) -> Result<UniformizeOutcome, DriverError> {
    uniformize_traced(omega, gamma, model, config).map_err(|f| f.error)
}

/// [`uniformize`] keeping the trace of a failed run.
pub fn uniformize_traced(
    omega: &LogForm,
    gamma: &Value,
    model: &ParamModel,
    config: &DriverConfig,
) -> Result<UniformizeOutcome, RunFailure> {
    if omega.degree() != 1 {
        return Err(DriverError::from(SeriesError::MalformedRing("uniformize expects a one-form".into())).into());
    }
    let defect = omega.integrability_defect().map_err(DriverError::from)?;
    let b = model.basis().clone();
    let twice = gamma.scale_int(2);
    let witness = defect.explicit_value().map_err(DriverError::from)?;
    if b.lt(&witness, &twice).map_err(DriverError::from)? {
        return Err(DriverError::IntegrabilityViolation { witness, needed: twice }.into());
    }
    let (ws, h) = run_mode(Tracked::Form(omega.clone()), gamma, model, config).map_err(failure)?;
    Ok(final_outcome(ws, h, gamma)?)
}

/// Function mode: a nested transformation after which `f` is `gamma`-final.
pub fn uniformize_function(
    f: &TruncatedSeries,
    gamma: &Value,
    model: &ParamModel,
    config: &DriverConfig,
) -> Result<UniformizeOutcome, DriverError> {
    uniformize_function_traced(f, gamma, model, config).map_err(|f| f.error)
}

/// [`uniformize_function`] keeping the trace of a failed run.
pub fn uniformize_function_traced(
    f: &TruncatedSeries,
    gamma: &Value,
    model: &ParamModel,
    config: &DriverConfig,
) -> Result<UniformizeOutcome, RunFailure> {
    let (ws, h) = run_mode(Tracked::Series(f.clone()), gamma, model, config).map_err(failure)?;
    Ok(final_outcome(ws, h, gamma)?)
}

/// Whether the last top-level rounds show the stable height-one resonant regime.
fn stable_trace_regime(events: &[TraceEvent]) -> Option<(usize, String)> {
    let tops: Vec<&RoundSnapshot> = events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Round(s) if s.depth == 0 => Some(s),
            _ => None,
        })
        .collect();
    // A closing package with the critical value above the threshold ends the run.
    let mut end = tops.len();
    while end > 0 && tops[end - 1].action == "package" && tops[end - 1].resonance == "skipped" {
        end -= 1;
    }
    let tail = &tops[end.saturating_sub(2)..end];
    let stable = tail.len() == 2
        && tail.iter().all(|s| {
            s.critical_height == 1
                && s.main_is_critical
                && (s.resonance.starts_with("r2a") || s.resonance.starts_with("r2b"))
                && s.action == "height_one"
        });
    stable.then(|| (tail[1].dependent, tail[1].nu_z.clone()))
}

/// `omega = x^I omega'` with `omega'` 0-final dominant, after principalizing
/// the x-support of `omega`. Returns `I`.
fn corner_factor(ws: &mut Workspace, h: Handle) -> Result<Vec<u32>, DriverError> {
    let support = ws.form(h).x_support();
    ws.principalize(&support)?;
    let omega = ws.form(h).clone();
    let (x, _) = omega
        .minimal_x_part()?
        .ok_or_else(|| DriverError::OutcomeVerification("zero form has no corner".into()))?;
    let reduced = form_div_x(&omega, &x)?;
    let zero = ws.model().ring().zero_value();
    match reduced.finality(&zero)? {
        Finality::DominantAt(_) => Ok(x),
        _ => Err(DriverError::OutcomeVerification("reduced form is not 0-final dominant".into())),
    }
}

/// Starting threshold of foliation mode: the explicit value of `omega`
/// plus the largest dependent weight.
pub fn default_foliation_gamma(omega: &LogForm, model: &ParamModel) -> Result<Value, DriverError> {
    let b = model.basis().clone();
    let v = omega.explicit_value()?;
    let base = if v.is_infinite() { model.ring().zero_value() } else { v };
    let mut w = model.ring().x_values()[0].clone();
    for y in model.ring().y_weights() {
        w = b.max(&w, y)?;
    }
    Ok(base.add(&w))
}

/// Foliation mode: escalate `gamma` from `gamma0` until the run ends at a
/// pre-simple corner or in the stable height-one regime.
pub fn foliation_mode(
    omega: &LogForm,
    model: &ParamModel,
    gamma0: &Value,
    config: &DriverConfig,
) -> Result<UniformizeOutcome, DriverError> {
    foliation_mode_traced(omega, model, gamma0, config).map_err(|f| f.error)
}

/// [`foliation_mode`] keeping the trace of a failed run.
pub fn foliation_mode_traced(
    omega: &LogForm,
    model: &ParamModel,
    gamma0: &Value,
    config: &DriverConfig,
) -> Result<UniformizeOutcome, RunFailure> {
    let mut gamma = gamma0.clone();
    let mut last_recessive: Option<UniformizeOutcome> = None;
    for round in 0..=config.max_escalations {
        match run_mode(Tracked::Form(omega.clone()), &gamma, model, config) {
            Ok((mut ws, h)) => {
                let fin = finality_of(ws.get(h), &gamma)?;
                match fin {
                    Finality::DominantAt(_) => {
                        let monomial = corner_factor(&mut ws, h)?;
                        let mut out = final_outcome(ws, h, &gamma)?;
                        out.status = OutcomeStatus::PreSimpleCorner { monomial };
                        return Ok(out);
                    }
                    _ => {
                        let regime = stable_trace_regime(ws.events());
                        let out = final_outcome(ws, h, &gamma)?;
                        if let (Some((dependent, _)), true) = (&regime, round == config.max_escalations) {
                            let nu_z = out.model.y_value(dependent - 1).map_err(DriverError::from)?;
                            let mut out = out;
                            out.status = OutcomeStatus::PreSimpleTrace { dependent: *dependent, nu_z };
                            return Ok(out);
                        }
                        last_recessive = Some(out);
                    }
                }
            }
            Err((e, ws)) => {
                if e.is_insufficient_precision() || e.is_iteration_limit() {
                    if let Some((dependent, _)) = stable_trace_regime(ws.events()) {
                        let nu_z = ws.model().y_value(dependent - 1).map_err(DriverError::from)?;
                        return Ok(UniformizeOutcome {
                            status: OutcomeStatus::PreSimpleTrace { dependent, nu_z },
                            trace: ws.events().to_vec(),
                            model: ws.model().clone(),
                            object: ws.first_object().cloned().expect("tracked object"),
                            gamma: gamma.clone(),
                        });
                    }
                }
                return Err(failure((e, ws)));
            }
        }
        gamma = gamma.scale_int(2);
    }
    last_recessive.ok_or_else(|| {
        DriverError::IterationLimit {
            what: "foliation escalation".into(),
            cap: config.max_escalations,
        }
        .into()
    })
}
