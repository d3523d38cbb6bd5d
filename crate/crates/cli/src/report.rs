//! Serialized outcomes, trace files and polygon snapshots.

use std::path::Path;

use locuni_core::model::{PackagePlan, ParamModel, Transform};
use locuni_core::polygon::Polygon;
use locuni_core::series::TruncatedSeries;
use locuni_core::uniformizer::{OutcomeStatus, UniformizeOutcome};
use locuni_core::workspace::{DriverError, TraceEvent, Tracked};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct OutcomeSummary {
    pub mode: &'static str,
    pub status: &'static str,
    /// Dominant value for `final_dominant`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Exponent of the monomial factor for `pre_simple_corner`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monomial: Option<Vec<u32>>,
    /// 1-based dependent parameter and its value for `pre_simple_trace`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependent: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_z: Option<String>,
    pub gamma: String,
    pub packages: usize,
    pub transformations: usize,
    pub final_explicit_value: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorSummary {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct TermOut {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub coeff: String,
}

/// A committed transformation with enough data to replay it.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformOut {
    CoordinateChange { index: usize, shift: Vec<TermOut> },
    IndependentBlowup { target: usize, by: usize },
    PuiseuxPackage { index: usize, plan: PackagePlan, lambda: String },
}

#[derive(Debug, Serialize)]
pub struct TraceFile<'a> {
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<&'a OutcomeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'a ErrorSummary>,
    pub events: &'a [TraceEvent],
    pub transforms: Vec<TransformOut>,
}

fn terms(f: &TruncatedSeries) -> Vec<TermOut> {
    f.terms()
        .iter()
        .map(|(m, c)| TermOut {
            x: m.x.clone(),
            y: m.y.clone(),
            coeff: c.to_string(),
        })
        .collect()
}

/// Indices are 1-based, matching the parameter names.
pub fn transforms(model: &ParamModel) -> Vec<TransformOut> {
    model
        .history()
        .iter()
        .map(|r| match &r.transform {
            Transform::CoordinateChange { index, shift } => TransformOut::CoordinateChange {
                index: index + 1,
                shift: terms(shift),
            },
            Transform::IndependentBlowup { target, by } => TransformOut::IndependentBlowup {
                target: target + 1,
                by: by + 1,
            },
            Transform::PuiseuxPackage(p) => TransformOut::PuiseuxPackage {
                index: p.index + 1,
                plan: p.plan.clone(),
                lambda: p.lambda.to_string(),
            },
        })
        .collect()
}

pub fn explicit_value(object: &Tracked) -> String {
    let v = match object {
        Tracked::Series(f) => f.explicit_value(),
        Tracked::Form(w) => w.explicit_value(),
    };
    v.map_or_else(|e| format!("unknown ({e})"), |v| v.to_string())
}

pub fn summarize(mode: &'static str, out: &UniformizeOutcome) -> OutcomeSummary {
    let mut s = OutcomeSummary {
        mode,
        status: "",
        value: None,
        monomial: None,
        dependent: None,
        nu_z: None,
        gamma: out.gamma.to_string(),
        packages: out.packages(),
        transformations: out.model.history().len(),
        final_explicit_value: explicit_value(&out.object),
    };
    match &out.status {
        OutcomeStatus::FinalDominant(v) => {
            s.status = "final_dominant";
            s.value = Some(v.to_string());
        }
        OutcomeStatus::FinalRecessive => s.status = "final_recessive",
        OutcomeStatus::PreSimpleCorner { monomial } => {
            s.status = "pre_simple_corner";
            s.monomial = Some(monomial.clone());
        }
        OutcomeStatus::PreSimpleTrace { dependent, nu_z } => {
            s.status = "pre_simple_trace";
            s.dependent = Some(*dependent);
            s.nu_z = Some(nu_z.to_string());
        }
    }
    s
}

pub fn error_kind(e: &DriverError) -> &'static str {
    if e.is_insufficient_precision() {
        "insufficient_precision"
    } else if e.is_iteration_limit() {
        "iteration_limit"
    } else {
        match e {
            DriverError::IntegrabilityViolation { .. } => "integrability_violation",
            DriverError::TooManyDependents { .. } => "too_many_dependents",
            DriverError::ProgressAssertionFailed { .. } => "progress_assertion_failed",
            DriverError::OutcomeVerification(_) => "outcome_verification",
            _ => "engine_error",
        }
    }
}

/// Writes one SVG per driver round that has a nonempty cloud; returns the count.
pub fn write_svgs(dir: &Path, model: &ParamModel, events: &[TraceEvent]) -> std::io::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let mut written = 0;
    let rounds = events.iter().filter_map(|e| match e {
        TraceEvent::Round(s) => Some(s),
        _ => None,
    });
    for (k, snap) in rounds.enumerate() {
        if snap.cloud.is_empty() {
            continue;
        }
        let Ok(poly) = Polygon::from_cloud(model.basis().clone(), &snap.cloud) else {
            continue;
        };
        let svg = poly.to_svg(&snap.cloud, Some(&snap.delta));
        std::fs::write(dir.join(format!("round_{:03}_y{}.svg", k + 1, snap.dependent)), svg)?;
        written += 1;
    }
    Ok(written)
}
