//! `locuni`: runs a problem file in function, truncated form or foliation mode.
//!
//! Exit status: 0 on an outcome, 1 on malformed input, 2 on insufficient
//! precision, 3 on an iteration limit, 4 on any other failure.

mod problem;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use locuni_core::logforms::LogForm;
use locuni_core::model::ParamModel;
use locuni_core::series::{Finality, TruncatedSeries};
use locuni_core::uniformizer::{
    default_foliation_gamma, foliation_mode_traced, uniformize_function_traced, uniformize_traced, DriverConfig,
    OutcomeStatus, RunFailure, UniformizeOutcome,
};
use locuni_core::valuegroup::Value;
use locuni_core::workspace::{DriverError, Tracked};

use problem::{Mode, Object, ProblemError, ValueSpec};
use report::{ErrorSummary, TraceFile};

#[derive(Debug, Parser)]
#[command(name = "locuni", version, about = "Local uniformization of functions and formal one-forms")]
struct Cli {
    /// Problem description (JSON).
    problem: PathBuf,
    /// Overrides the mode of the problem file.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Threshold: one rational, or comma-separated coordinates over the basis.
    #[arg(long)]
    gamma: Option<String>,
    /// Cap on committed transformations.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Directory receiving one polygon snapshot per driver round.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    /// Trace file to write.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Re-check the outcome, replay the transformations and rerun for determinism.
    #[arg(long)]
    verify: bool,
}

const EXIT_MALFORMED: u8 = 1;
const EXIT_PRECISION: u8 = 2;
const EXIT_ITERATION: u8 = 3;
const EXIT_OTHER: u8 = 4;

/// A fully parsed run request.
struct Job {
    mode: Mode,
    model: ParamModel,
    object: Object,
    gamma: Option<Value>,
    config: DriverConfig,
}

fn prepare(cli: &Cli, file: &problem::ProblemFile) -> Result<Job, ProblemError> {
    let mode = cli.mode.unwrap_or(file.mode);
    let model = file.model.build()?;
    let object = file.object.build(model.ring())?;
    let dim = model.basis().dim();
    let gamma = match cli.gamma.as_deref() {
        Some(g) => Some(ValueSpec::parse_flag(g).to_value(dim)?),
        None => file.gamma.as_ref().map(|g| g.to_value(dim)).transpose()?,
    };
    match (mode, &object, &gamma) {
        (Mode::Function, Object::Form(_), _) => {
            return Err(ProblemError::Invalid("function mode needs a series object".into()))
        }
        (Mode::TruncatedForm, Object::Series(_), _) => {
            return Err(ProblemError::Invalid("truncated_form mode needs a form object".into()))
        }
        (Mode::Function | Mode::TruncatedForm, _, None) => {
            return Err(ProblemError::Invalid(format!("{} mode needs gamma", mode.name())))
        }
        _ => {}
    }
    let mut config = DriverConfig::default();
    let o = &file.options;
    config.max_rounds = o.max_rounds.unwrap_or(config.max_rounds);
    config.max_steps = cli.max_steps.or(o.max_steps).unwrap_or(config.max_steps);
    config.max_escalations = o.max_escalations.unwrap_or(config.max_escalations);
    Ok(Job {
        mode,
        model,
        object,
        gamma,
        config,
    })
}

fn execute(job: &Job) -> Result<UniformizeOutcome, RunFailure> {
    match (&job.object, job.mode) {
        (Object::Series(f), Mode::Function) => {
            uniformize_function_traced(f, job.gamma.as_ref().expect("checked"), &job.model, &job.config)
        }
        (Object::Form(w), Mode::TruncatedForm) => {
            uniformize_traced(w, job.gamma.as_ref().expect("checked"), &job.model, &job.config)
        }
        (object, Mode::Foliation) => {
            // A series in foliation mode stands for its differential.
            let w = match object {
                Object::Form(w) => w.clone(),
                Object::Series(f) => LogForm::d_function(f),
            };
            let gamma0 = match &job.gamma {
                Some(g) => g.clone(),
                None => default_foliation_gamma(&w, &job.model)?,
            };
            foliation_mode_traced(&w, &job.model, &gamma0, &job.config)
        }
        _ => unreachable!("mode and object checked in prepare"),
    }
}

fn finality(object: &Tracked, gamma: &Value) -> Result<Finality, DriverError> {
    Ok(match object {
        Tracked::Series(f) => f.finality(gamma)?,
        Tracked::Form(w) => w.finality(gamma)?,
    })
}

/// Whether `omega / x^monomial` exists and is 0-final dominant.
fn corner_holds(out: &UniformizeOutcome, monomial: &[u32]) -> Result<bool, DriverError> {
    let Tracked::Form(w) = &out.object else {
        return Ok(false);
    };
    let mut divisible = true;
    let reduced = w.map_coeffs(|c| {
        Ok(c.div_x_monomial(monomial).unwrap_or_else(|| {
            divisible = false;
            TruncatedSeries::zero(c.ring().clone())
        }))
    })?;
    let zero = out.model.ring().zero_value();
    Ok(divisible && matches!(reduced.finality(&zero)?, Finality::DominantAt(_)))
}

/// Re-checks the outcome predicate, replays the history on the initial model
/// and reruns the job, requiring an identical trace.
fn verify(job: &Job, out: &UniformizeOutcome) -> Result<(), String> {
    let err = |e: DriverError| e.to_string();
    let ok = match &out.status {
        OutcomeStatus::FinalDominant(v) => finality(&out.object, &out.gamma).map_err(err)? == Finality::DominantAt(v.clone()),
        OutcomeStatus::FinalRecessive => finality(&out.object, &out.gamma).map_err(err)? == Finality::Recessive,
        OutcomeStatus::PreSimpleCorner { monomial } => corner_holds(out, monomial).map_err(err)?,
        OutcomeStatus::PreSimpleTrace { dependent, nu_z } => {
            out.model.y_value(dependent - 1).map_err(|e| e.to_string())? == *nu_z
        }
    };
    if !ok {
        return Err(format!("outcome {} does not hold on the final model", out.status.label()));
    }
    let mut replayed = job.model.clone();
    for rec in out.model.history() {
        replayed.replay(&rec.transform).map_err(|e| format!("replay failed: {e}"))?;
    }
    if replayed != out.model {
        return Err("replaying the transformations does not reproduce the final model".into());
    }
    let again = execute(job).map_err(|f| format!("rerun failed: {}", f.error))?;
    let a = serde_json::to_string(&out.trace).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&again.trace).map_err(|e| e.to_string())?;
    if a != b || again.status != out.status {
        return Err("rerun produced a different trace".into());
    }
    Ok(())
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    // Usage errors are malformed input; clap's own status 2 would collide.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_MALFORMED } else { 0 });
        }
    };
    let path = cli.problem.to_string_lossy().into_owned();
    let file = match problem::load(&path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MALFORMED);
        }
    };
    let job = match prepare(&cli, &file) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MALFORMED);
        }
    };
    let trace_out = cli.trace_out.clone().or(file.options.trace_out.as_ref().map(PathBuf::from));
    let svg_dir = cli.svg_dir.clone().or(file.options.svg_dir.as_ref().map(PathBuf::from));
    let result = execute(&job);
    let (summary, failure) = match &result {
        Ok(out) => (Some(report::summarize(job.mode.name(), out)), None),
        Err(f) => (
            None,
            Some(ErrorSummary {
                kind: report::error_kind(&f.error),
                message: f.error.to_string(),
            }),
        ),
    };
    let (events, transforms) = match &result {
        Ok(out) => (out.trace.as_slice(), report::transforms(&out.model)),
        Err(f) => (f.trace.as_slice(), Vec::new()),
    };
    let mut status = match (&result, &failure) {
        (Ok(_), _) => 0,
        (Err(f), _) if f.error.is_insufficient_precision() => EXIT_PRECISION,
        (Err(f), _) if f.error.is_iteration_limit() => EXIT_ITERATION,
        _ => EXIT_OTHER,
    };
    if let Some(p) = &trace_out {
        let trace = TraceFile {
            mode: job.mode.name(),
            outcome: summary.as_ref(),
            error: failure.as_ref(),
            events,
            transforms,
        };
        if let Err(e) = write_json(p, &trace) {
            eprintln!("error: {e}");
            status = status.max(EXIT_OTHER);
        }
    }
    if let Some(dir) = &svg_dir {
        if let Err(e) = report::write_svgs(dir, &job.model, events) {
            eprintln!("error: cannot write snapshots to {}: {e}", dir.display());
            status = status.max(EXIT_OTHER);
        }
    }
    match (&result, &summary, &failure) {
        (Ok(out), Some(s), _) => {
            println!("{}", serde_json::to_string_pretty(s).expect("summary serializes"));
            if cli.verify {
                if let Err(e) = verify(&job, out) {
                    eprintln!("verification failed: {e}");
                    status = EXIT_OTHER;
                } else {
                    eprintln!("verification passed");
                }
            }
        }
        (Err(f), _, Some(fail)) => {
            let gamma = job.gamma.as_ref().map_or("default".into(), |g| g.to_string());
            eprintln!("error ({}) at gamma {gamma}: {}", fail.kind, fail.message);
            if !f.trace.is_empty() && trace_out.is_none() {
                eprintln!("{} trace events recorded; pass --trace-out to keep them", f.trace.len());
            }
        }
        _ => unreachable!(),
    }
    ExitCode::from(status)
}
