//! The evolving model together with the objects carried along its
//! transformations, the trace of committed steps and the shared driver error.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::cohomology::CohomologyError;
use crate::logforms::LogForm;
use crate::model::{ModelError, ParamModel, TransformRecord};
use crate::polygon::{Point, PolygonError};
use crate::series::{SeriesError, TruncatedSeries};
use crate::valuegroup::{Value, ValueError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error("object involves y{found} but only {allowed} dependent parameters are allowed")]
    TooManyDependents { found: usize, allowed: usize },
    #[error("iteration limit {cap} reached in {what}")]
    IterationLimit { what: String, cap: usize },
    #[error("nu(z) did not grow: {before} then {after}")]
    ProgressAssertionFailed { before: Value, after: Value },
    #[error("impossible branch reached: {0}")]
    ImpossibleBranch(String),
    #[error("pair is not prepared: {0}")]
    NotPrepared(String),
    #[error("integrability defect has value {witness}, below {needed}")]
    IntegrabilityViolation { witness: Value, needed: Value },
    #[error("outcome failed verification: {0}")]
    OutcomeVerification(String),
}

impl From<ValueError> for DriverError {
    fn from(e: ValueError) -> Self {
        Self::Series(e.into())
    }
}

impl DriverError {
    pub fn is_insufficient_precision(&self) -> bool {
        match self {
            Self::Series(SeriesError::InsufficientPrecision(_)) => true,
            Self::Model(m) => m.is_insufficient_precision(),
            Self::Cohomology(CohomologyError::Series(SeriesError::InsufficientPrecision(_))) => true,
            _ => false,
        }
    }

    pub fn is_iteration_limit(&self) -> bool {
        matches!(self, Self::IterationLimit { .. })
    }
}

#[derive(Clone, Debug)]
pub enum Tracked {
    Series(TruncatedSeries),
    Form(LogForm),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Handle(usize);

/// Why a transformation was committed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Package,
    HeightOne,
    Tschirnhausen,
    Horizontal,
    Principalization,
}

/// Invariants read off the pair at the start of a driver round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundSnapshot {
    pub depth: usize,
    /// 1-based index of the distinguished dependent parameter.
    pub dependent: usize,
    pub gamma: String,
    pub explicit_value: String,
    pub nu_z: String,
    pub critical_value: String,
    pub critical_height: u32,
    pub main_is_critical: bool,
    pub resonance: String,
    pub action: String,
    /// Newton cloud of the round, kept for polygon snapshots.
    #[serde(skip)]
    pub cloud: Vec<Point>,
    #[serde(skip)]
    pub delta: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Transform {
        step: usize,
        kind: String,
        /// 1-based parameter index the transformation acts on.
        index: usize,
        purpose: Purpose,
        summary: String,
    },
    Round(RoundSnapshot),
    Note { text: String },
}

/// A transformation request.
#[derive(Clone, Debug)]
pub enum Op {
    Blowup { target: usize, by: usize },
    CoordinateChange { index: usize, shift: TruncatedSeries },
    Package { index: usize },
}

#[derive(Clone, Debug)]
pub struct Workspace {
    model: ParamModel,
    objects: Vec<Option<Tracked>>,
    cap: Value,
    events: Vec<TraceEvent>,
    steps: usize,
    max_steps: usize,
}

impl Workspace {
    /// `cap` bounds the weight to which pulled-back objects are kept.
    pub fn new(mut model: ParamModel, cap: Value, max_steps: usize) -> Result<Self, DriverError> {
        let b = model.basis().clone();
        if b.lt(model.eval_cap(), &cap)? {
            model.set_eval_cap(cap.clone());
        }
        Ok(Self {
            model,
            objects: Vec::new(),
            cap,
            events: Vec::new(),
            steps: 0,
            max_steps,
        })
    }

    pub fn model(&self) -> &ParamModel {
        &self.model
    }

    pub fn cap(&self) -> &Value {
        &self.cap
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn track_series(&mut self, f: TruncatedSeries) -> Handle {
        self.objects.push(Some(Tracked::Series(f)));
        Handle(self.objects.len() - 1)
    }

    pub fn track_form(&mut self, w: LogForm) -> Handle {
        self.objects.push(Some(Tracked::Form(w)));
        Handle(self.objects.len() - 1)
    }

    pub fn release(&mut self, h: Handle) {
        self.objects[h.0] = None;
    }

    pub fn get(&self, h: Handle) -> &Tracked {
        self.objects[h.0].as_ref().expect("released handle")
    }

    pub fn series(&self, h: Handle) -> &TruncatedSeries {
        match self.get(h) {
            Tracked::Series(f) => f,
            Tracked::Form(_) => panic!("handle holds a form"),
        }
    }

    pub fn form(&self, h: Handle) -> &LogForm {
        match self.get(h) {
            Tracked::Form(w) => w,
            Tracked::Series(_) => panic!("handle holds a series"),
        }
    }

    /// The earliest object still tracked.
    pub fn first_object(&self) -> Option<&Tracked> {
        self.objects.iter().flatten().next()
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.events.push(TraceEvent::Note { text: text.into() });
    }

    pub fn round(&mut self, snap: RoundSnapshot) {
        self.events.push(TraceEvent::Round(snap));
    }

    /// Applies a transformation to the model and pulls back every tracked object.
    pub fn apply(&mut self, op: Op, purpose: Purpose) -> Result<Arc<TransformRecord>, DriverError> {
        if self.steps >= self.max_steps {
            return Err(DriverError::IterationLimit {
                what: "transformations".into(),
                cap: self.max_steps,
            });
        }
        let (rec, index, summary) = match op {
            Op::Blowup { target, by } => {
                let rec = self.model.independent_blowup(target, by)?;
                (rec, target + 1, format!("x{} = x{} x{}'", target + 1, by + 1, target + 1))
            }
            Op::CoordinateChange { index, shift } => {
                let s = format!("y{}' = y{} + ({} terms)", index + 1, index + 1, shift.len());
                let rec = self.model.coordinate_change(index, shift)?;
                (rec, index + 1, s)
            }
            Op::Package { index } => {
                let rec = self.model.puiseux_package(index)?;
                let s = match &rec.transform {
                    crate::model::Transform::PuiseuxPackage(p) => format!(
                        "d = {}, p = {:?}, lambda = {}",
                        p.plan.d, p.plan.p, p.lambda
                    ),
                    _ => String::new(),
                };
                (rec, index + 1, s)
            }
        };
        for slot in self.objects.iter_mut() {
            let Some(obj) = slot.take() else { continue };
            *slot = Some(match obj {
                Tracked::Series(f) => Tracked::Series(rec.pull_back_series(&f, &self.cap)?),
                Tracked::Form(w) => Tracked::Form(rec.pull_back_form(&w, &self.cap)?),
            });
        }
        self.steps += 1;
        self.events.push(TraceEvent::Transform {
            step: self.steps,
            kind: rec.transform.kind().to_string(),
            index,
            purpose,
            summary,
        });
        Ok(rec)
    }

    /// Blow-ups making the given x-monomials totally ordered by divisibility.
    pub fn principalize(&mut self, monomials: &[Vec<u32>]) -> Result<usize, DriverError> {
        let mut probe = self.model.clone();
        let recs = probe.principalize(monomials)?;
        for rec in &recs {
            let crate::model::Transform::IndependentBlowup { target, by } = rec.transform else {
                unreachable!("principalization only blows up")
            };
            self.apply(Op::Blowup { target, by }, Purpose::Principalization)?;
        }
        Ok(recs.len())
    }
}
