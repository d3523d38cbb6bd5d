//! Problem files: JSON with exact rationals written as `"p/q"` strings.

use std::sync::Arc;

use locuni_core::logforms::LogForm;
use locuni_core::model::{HahnPrec, HahnSeries, ParamModel};
use locuni_core::series::{Mono, RingRef, TruncatedSeries};
use locuni_core::valuegroup::{AlgebraicReal, BasisSpec, Value, Q};
use num_bigint::BigInt;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed rational {0:?}")]
    Rational(String),
    #[error("malformed integer {0:?}")]
    Integer(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Function,
    TruncatedForm,
    Foliation,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Function => "function",
            Mode::TruncatedForm => "truncated_form",
            Mode::Foliation => "foliation",
        }
    }
}

/// A value given by its coordinates over the basis; a bare string is the
/// multiple of the first basis element.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(String),
    Coords(Vec<String>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BasisElement {
    Rational { rational: String },
    /// Coefficients from the constant term upward, isolating interval `[lo, hi]`.
    Algebraic { minpoly: Vec<String>, lo: String, hi: String },
}

#[derive(Clone, Debug, Deserialize)]
pub struct CenterTerm {
    pub exponent: ValueSpec,
    pub coeff: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct CenterSpec {
    pub terms: Vec<CenterTerm>,
    /// Known through this exponent; absent means exact.
    #[serde(default)]
    pub validity: Option<ValueSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct Names {
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub y: Vec<String>,
}

impl Names {
    /// Names are optional; when given they must be distinct and match the parameter counts.
    fn check(&self, r: usize, m: usize) -> Result<(), ProblemError> {
        for (given, want, what) in [(&self.x, r, "x"), (&self.y, m, "y")] {
            if !given.is_empty() && given.len() != want {
                return Err(ProblemError::Invalid(format!("{} {what} names for {want} parameters", given.len())));
            }
        }
        let mut all: Vec<&String> = self.x.iter().chain(&self.y).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(ProblemError::Invalid("parameter names must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub names: Names,
    pub basis: Vec<BasisElement>,
    pub x_values: Vec<ValueSpec>,
    pub centers: Vec<CenterSpec>,
    #[serde(default)]
    pub eval_cap: Option<ValueSpec>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TermSpec {
    #[serde(default)]
    pub x: Vec<u32>,
    #[serde(default)]
    pub y: Vec<u32>,
    pub coeff: String,
}

/// One summand `coeff * symbol` of a one-form; symbols are `dx<i>/x<i>` and `dy<j>`.
#[derive(Clone, Debug, Deserialize)]
pub struct FormEntry {
    pub symbol: String,
    pub coeff: Vec<TermSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSpec {
    Series(Vec<TermSpec>),
    Form(Vec<FormEntry>),
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct Options {
    pub max_rounds: Option<usize>,
    pub max_steps: Option<usize>,
    pub max_escalations: Option<usize>,
    pub trace_out: Option<String>,
    pub svg_dir: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ProblemFile {
    pub mode: Mode,
    pub model: ModelSpec,
    pub object: ObjectSpec,
    #[serde(default)]
    pub gamma: Option<ValueSpec>,
    #[serde(default)]
    pub options: Options,
}

pub enum Object {
    Series(TruncatedSeries),
    Form(LogForm),
}

pub fn load(path: &str) -> Result<ProblemFile, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.into(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn rational(s: &str) -> Result<Q, ProblemError> {
    s.trim().parse::<Q>().map_err(|_| ProblemError::Rational(s.into()))
}

fn integer(s: &str) -> Result<BigInt, ProblemError> {
    s.trim().parse::<BigInt>().map_err(|_| ProblemError::Integer(s.into()))
}

impl ValueSpec {
    pub fn to_value(&self, dim: usize) -> Result<Value, ProblemError> {
        let coords = match self {
            ValueSpec::Scalar(s) => {
                let mut c = vec![Q::from_integer(0.into()); dim];
                c[0] = rational(s)?;
                c
            }
            ValueSpec::Coords(v) => {
                if v.len() != dim {
                    return Err(ProblemError::Invalid(format!(
                        "value has {} coordinates, the basis has {dim}",
                        v.len()
                    )));
                }
                v.iter().map(|s| rational(s)).collect::<Result<_, _>>()?
            }
        };
        Ok(Value::from_coords(coords))
    }

    /// Parses the command line form: one rational or comma-separated coordinates.
    pub fn parse_flag(s: &str) -> Self {
        if s.contains(',') {
            ValueSpec::Coords(s.split(',').map(|t| t.trim().to_string()).collect())
        } else {
            ValueSpec::Scalar(s.trim().to_string())
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<ParamModel, ProblemError> {
        let elements = self
            .basis
            .iter()
            .map(|e| match e {
                BasisElement::Rational { rational: r } => Ok(AlgebraicReal::rational(rational(r)?)),
                BasisElement::Algebraic { minpoly, lo, hi } => {
                    let coeffs = minpoly.iter().map(|c| integer(c)).collect::<Result<_, _>>()?;
                    AlgebraicReal::new(coeffs, rational(lo)?, rational(hi)?)
                        .map_err(|e| ProblemError::Invalid(e.to_string()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let basis = Arc::new(BasisSpec::new(elements).map_err(|e| ProblemError::Invalid(e.to_string()))?);
        let dim = basis.dim();
        let xs = self
            .x_values
            .iter()
            .map(|v| v.to_value(dim))
            .collect::<Result<Vec<_>, _>>()?;
        if xs.is_empty() {
            return Err(ProblemError::Invalid("at least one independent parameter is required".into()));
        }
        self.names.check(xs.len(), self.centers.len())?;
        let ys = self
            .centers
            .iter()
            .map(|c| {
                let prec = match &c.validity {
                    Some(v) => HahnPrec::through(v.to_value(dim)?),
                    None => HahnPrec::exact(),
                };
                let terms = c
                    .terms
                    .iter()
                    .map(|t| Ok((t.exponent.to_value(dim)?, rational(&t.coeff)?)))
                    .collect::<Result<Vec<_>, ProblemError>>()?;
                HahnSeries::new(&basis, terms, prec).map_err(|e| ProblemError::Invalid(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cap = match &self.eval_cap {
            Some(v) => v.to_value(dim)?,
            None => Value::from_coords({
                let mut c = vec![Q::from_integer(0.into()); dim];
                c[0] = Q::from_integer(32.into());
                c
            }),
        };
        ParamModel::new(basis, xs, ys, cap).map_err(|e| ProblemError::Invalid(e.to_string()))
    }
}

fn series(ring: &RingRef, terms: &[TermSpec]) -> Result<TruncatedSeries, ProblemError> {
    let (r, m) = (ring.r(), ring.m());
    let parsed = terms
        .iter()
        .map(|t| {
            let pad = |v: &[u32], n: usize, what: &str| {
                if v.len() > n {
                    return Err(ProblemError::Invalid(format!("{what} exponent has {} entries, expected {n}", v.len())));
                }
                let mut e = v.to_vec();
                e.resize(n, 0);
                Ok(e)
            };
            Ok((Mono::new(pad(&t.x, r, "x")?, pad(&t.y, m, "y")?), rational(&t.coeff)?))
        })
        .collect::<Result<Vec<_>, ProblemError>>()?;
    TruncatedSeries::exact(ring.clone(), parsed).map_err(|e| ProblemError::Invalid(e.to_string()))
}

/// `dx<i>/x<i>` or `dy<j>`, 1-based, as a basis one-form.
fn symbol(ring: &RingRef, name: &str) -> Result<LogForm, ProblemError> {
    let bad = || ProblemError::Invalid(format!("unknown symbol {name:?}"));
    if let Some(rest) = name.strip_prefix("dx") {
        let (i, tail) = rest.split_once("/x").ok_or_else(bad)?;
        let i: usize = i.parse().map_err(|_| bad())?;
        if tail != i.to_string() || i == 0 || i > ring.r() {
            return Err(bad());
        }
        return Ok(LogForm::dlog_x(ring.clone(), i - 1));
    }
    if let Some(rest) = name.strip_prefix("dy") {
        let j: usize = rest.parse().map_err(|_| bad())?;
        if j == 0 || j > ring.m() {
            return Err(bad());
        }
        return Ok(LogForm::dy(ring.clone(), j - 1));
    }
    Err(bad())
}

impl ObjectSpec {
    pub fn build(&self, ring: &RingRef) -> Result<Object, ProblemError> {
        let invalid = |e: locuni_core::series::SeriesError| ProblemError::Invalid(e.to_string());
        match self {
            ObjectSpec::Series(t) => Ok(Object::Series(series(ring, t)?)),
            ObjectSpec::Form(entries) => {
                let mut w = LogForm::zero(ring.clone(), 1);
                for e in entries {
                    let c = series(ring, &e.coeff)?;
                    w = w.add(&symbol(ring, &e.symbol)?.mul_function(&c).map_err(invalid)?).map_err(invalid)?;
                }
                Ok(Object::Form(w))
            }
        }
    }
}
