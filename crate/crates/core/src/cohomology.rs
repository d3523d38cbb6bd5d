//! Truncated division of one-forms, the truncated logarithmic Poincaré lemma
//! and the residual normalization of closed dominant forms.
//!
//! All identities are exact on the known window: every returned decomposition
//! reconstructs its input up to the bound of the input.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::logforms::{LogForm, Symbol};
use crate::series::{vmin, Finality, Mono, SeriesError, TruncatedSeries};
use crate::valuegroup::{qi, Value, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohomologyError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("divisor has no unit logarithmic coefficient")]
    NotDominant,
    #[error("wedge value {witness} is below the requested {rho}")]
    WedgeValueTooSmall { witness: Value, rho: Value },
    #[error("twisted differential has value {witness}, below {rho}")]
    NotTruncatedClosed { witness: Value, rho: Value },
    #[error("block at x^{block:?} is not integrable")]
    NonIntegrableBlock { block: Vec<u32> },
    #[error("form is not closed on its known window")]
    NotClosed,
}

impl From<crate::valuegroup::ValueError> for CohomologyError {
    fn from(e: crate::valuegroup::ValueError) -> Self {
        Self::Series(e.into())
    }
}

/// `beta = h alpha + remainder`.
#[derive(Clone, Debug)]
pub struct Division {
    pub h: TruncatedSeries,
    pub remainder: LogForm,
    /// Index of the logarithmic coefficient of `alpha` used as the unit.
    pub unit_index: usize,
}

/// How the residue vector was decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidueBranch {
    /// `-mu` is not a nonnegative integer vector: no residue block exists.
    NonIntegral,
    /// `x^{-mu}` is a monomial with value at least `rho`: the block is remainder.
    BeyondTruncation,
    /// The block `x^{-mu}` was solved and its constants became residues.
    Solved,
}

/// `eta = d_mu f + x^{-mu} dx^lambda/x^lambda + remainder`.
#[derive(Clone, Debug)]
pub struct PoincareDecomposition {
    pub f: TruncatedSeries,
    pub lambda: Vec<Q>,
    pub remainder: LogForm,
    pub branch: ResidueBranch,
}

/// `alpha = dx~^mu/x~^mu` with `x~_{i0} = w x_{i0}` and `w = exp(h / mu_{i0})`.
#[derive(Clone, Debug)]
pub struct Residual {
    pub mu: Vec<Q>,
    pub i0: usize,
    pub w: TruncatedSeries,
    /// The potential in `alpha = dx^mu/x^mu + dh`, with no constant term.
    pub h: TruncatedSeries,
}

/// Truncated exponential of a series without constant term.
pub fn truncated_exp(h: &TruncatedSeries, cap: &Value) -> Result<TruncatedSeries, SeriesError> {
    if !h.constant_term().is_zero() {
        return Err(SeriesError::MalformedRing("exp needs a zero constant term".into()));
    }
    let ring = h.ring().clone();
    let bound = vmin(ring.basis(), h.bound(), cap)?;
    if h.is_zero() {
        return TruncatedSeries::one(ring).with_bound_at_most(&bound);
    }
    if bound.is_infinite() {
        return Err(SeriesError::Unbounded);
    }
    let h = h.truncate(&bound)?;
    let mut acc = TruncatedSeries::one(ring.clone()).with_bound_at_most(&bound)?;
    let mut term = acc.clone();
    let mut k = 1i64;
    loop {
        term = term.mul(&h)?.with_bound_at_most(&bound)?.scale(&(Q::one() / qi(k)));
        if term.is_empty() {
            break;
        }
        acc = acc.add(&term)?;
        k += 1;
    }
    Ok(acc)
}

/// Index of a logarithmic coefficient of `alpha` with nonzero constant term.
fn unit_log_index(alpha: &LogForm) -> Option<usize> {
    (0..alpha.ring().r()).find(|i| !alpha.log_coeff(*i).constant_term().is_zero())
}

/// Divides `beta` by a 0-final dominant `alpha` up to `rho`.
pub fn truncated_divide(alpha: &LogForm, beta: &LogForm, rho: &Value) -> Result<Division, CohomologyError> {
    let b = alpha.ring().basis().clone();
    let i = unit_log_index(alpha).ok_or(CohomologyError::NotDominant)?;
    let wedge = alpha.wedge(beta)?;
    let witness = wedge.explicit_value()?;
    if b.lt(&witness, rho)? {
        return Err(CohomologyError::WedgeValueTooSmall {
            witness,
            rho: rho.clone(),
        });
    }
    let a = alpha.log_coeff(i);
    let f = beta.log_coeff(i);
    let cap = vmin(&b, beta.bound(), alpha.bound())?;
    let h = f.mul(&a.invert_unit(&cap)?)?.with_bound_at_most(&cap)?;
    let remainder = beta.sub(&alpha.mul_function(&h)?)?;
    Ok(Division {
        h,
        remainder,
        unit_index: i,
    })
}

/// Splits a form into blocks by x-part, keeping the blocks of x-value below `rho`.
fn low_blocks(eta: &LogForm, rho: &Value) -> Result<Vec<Vec<u32>>, SeriesError> {
    let b = eta.ring().basis().clone();
    let mut out = Vec::new();
    for x in eta.x_support() {
        if b.lt(&eta.ring().x_value(&x), rho)? {
            out.push(x);
        }
    }
    Ok(out)
}

/// Primitive of a closed form `sum g_j dy_j` whose coefficients share the
/// x-part `x`: integrates along rays in the y variables.
fn y_primitive(block: &LogForm, x: &[u32]) -> Result<TruncatedSeries, SeriesError> {
    let ring = block.ring().clone();
    let r = ring.r();
    let mut terms: Vec<(Mono, Q)> = Vec::new();
    for (k, g) in block.coeffs() {
        let s = k[0] as usize;
        if s < r {
            continue;
        }
        let j = s - r;
        for (m, c) in g.terms() {
            debug_assert_eq!(m.x, x);
            let mut e = m.clone();
            e.y[j] += 1;
            let deg = m.y_degree() as i64 + 1;
            terms.push((e, c / qi(deg)));
        }
    }
    TruncatedSeries::new(ring, terms, block.bound().clone())
}

/// Solves `d_mu(eta) ~ 0` below `rho`.
pub fn truncated_poincare(eta: &LogForm, mu: &[Q], rho: &Value) -> Result<PoincareDecomposition, CohomologyError> {
    let ring = eta.ring().clone();
    let b = ring.basis().clone();
    let r = ring.r();
    if eta.degree() != 1 || mu.len() != r {
        return Err(SeriesError::MalformedRing("poincare expects a one-form and r residues".into()).into());
    }
    let closure = eta.d_mu(mu)?;
    let witness = closure.explicit_value()?;
    if b.lt(&witness, rho)? {
        return Err(CohomologyError::NotTruncatedClosed {
            witness,
            rho: rho.clone(),
        });
    }
    let residue_block: Option<Vec<u32>> = mu
        .iter()
        .map(|m| {
            let n = -m;
            (n.is_integer() && n >= Q::zero()).then(|| n.to_integer().try_into().ok()).flatten()
        })
        .collect();
    let mut f_terms: Vec<(Mono, Q)> = Vec::new();
    let mut lambda = vec![Q::zero(); r];
    for x in low_blocks(eta, rho)? {
        let block = eta.x_block(&x);
        let shift: Vec<Q> = x.iter().zip(mu).map(|(e, m)| qi(*e as i64) + m).collect();
        if let Some(i) = shift.iter().position(|v| !v.is_zero()) {
            // eta_I = d_shift(f_I): the f_I is read off one proportional coefficient.
            let c = block.log_coeff(i);
            for (m, a) in c.terms() {
                f_terms.push((m.clone(), a / &shift[i]));
            }
        } else {
            let one = Mono::new(x.clone(), vec![0; ring.m()]);
            for (li, l) in lambda.iter_mut().enumerate() {
                *l = block.log_coeff(li).coeff(&one);
            }
            for (m, a) in y_primitive(&block, &x)?.terms() {
                f_terms.push((m.clone(), a.clone()));
            }
        }
    }
    let f = TruncatedSeries::new(ring.clone(), f_terms, eta.bound().clone())?;
    let branch = match &residue_block {
        None => ResidueBranch::NonIntegral,
        Some(x) if b.lt(&ring.x_value(x), rho)? => ResidueBranch::Solved,
        Some(_) => ResidueBranch::BeyondTruncation,
    };
    let mut theta = LogForm::function(f.clone()).d_mu(mu)?;
    if let (Some(x), ResidueBranch::Solved) = (&residue_block, branch) {
        let xm = Mono::new(x.clone(), vec![0; ring.m()]);
        let res = LogForm::log_combination(ring.clone(), &lambda)
            .mul_function(&TruncatedSeries::monomial(ring.clone(), xm, Q::one()))?;
        theta = theta.add(&res)?;
    }
    let remainder = eta.sub(&theta)?;
    for x in low_blocks(&remainder, rho)? {
        return Err(CohomologyError::NonIntegrableBlock { block: x });
    }
    Ok(PoincareDecomposition {
        f,
        lambda,
        remainder,
        branch,
    })
}

/// Residual normalization of a closed, 0-final dominant one-form.
pub fn residual_normalize(alpha: &LogForm) -> Result<Residual, CohomologyError> {
    let ring = alpha.ring().clone();
    let r = ring.r();
    if !alpha.d()?.is_zero() {
        return Err(CohomologyError::NotClosed);
    }
    let zero = ring.zero_value();
    match alpha.finality(&zero)? {
        Finality::DominantAt(_) => {}
        _ => return Err(CohomologyError::NotDominant),
    }
    let dec = truncated_poincare(alpha, &vec![Q::zero(); r], &Value::Infinity)?;
    let mu = dec.lambda.clone();
    let i0 = mu.iter().position(|m| !m.is_zero()).ok_or(CohomologyError::NotDominant)?;
    let h = dec.f;
    let w = truncated_exp(&h.scale(&(Q::one() / &mu[i0])), alpha.bound())?;
    Ok(Residual { mu, i0, w, h })
}

/// Solution of `d_sigma(alpha) ~ 0` for a closed, 0-final dominant `sigma`:
/// `alpha = u sigma + du + x^{-v} dx^lambda/x^lambda + remainder`, with `v`
/// the residual exponent of `sigma`.
#[derive(Clone, Debug)]
pub struct TwistedSolution {
    pub u: TruncatedSeries,
    pub residual: Residual,
    pub decomposition: PoincareDecomposition,
}

pub fn twisted_poincare(alpha: &LogForm, sigma: &LogForm, rho: &Value) -> Result<TwistedSolution, CohomologyError> {
    let residual = residual_normalize(sigma)?;
    let cap = alpha.bound().clone();
    // With sigma = dx^v/x^v + dh, d_sigma = e^{-h} d_v e^{h}.
    let eh = truncated_exp(&residual.h, &cap)?;
    let beta = alpha.mul_function(&eh)?;
    let decomposition = truncated_poincare(&beta, &residual.mu, rho)?;
    let emh = truncated_exp(&residual.h.neg(), &cap)?;
    let u = decomposition.f.mul(&emh)?;
    Ok(TwistedSolution {
        u,
        residual,
        decomposition,
    })
}

/// Symbol of `dx_i/x_i`.
pub fn log_symbol(i: usize) -> Vec<Symbol> {
    vec![i as Symbol]
}
