//! Pullback of series and logarithmic forms along one recorded transformation.
//!
//! Every transformation maps a monomial to terms of weight at least its own,
//! so a series known up to weight `B` stays known up to `B` afterwards.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;

use super::{ModelError, Transform, TransformRecord};
use crate::logforms::LogForm;
use crate::series::{vmin, Mono, Ring, SeriesError, TruncatedSeries};
use crate::valuegroup::{Value, Q};

fn binomial_row(b: u32) -> Vec<Q> {
    let mut row = vec![BigInt::one()];
    for k in 0..b {
        let next = row.last().expect("nonempty") * BigInt::from(b - k) / BigInt::from(k + 1);
        row.push(next);
    }
    row.into_iter().map(Q::from_integer).collect()
}

/// `(y_index + lambda)^b` in `ring`, exact.
fn shifted_power(ring: &crate::series::RingRef, index: usize, lambda: &Q, b: u32) -> TruncatedSeries {
    let binom = binomial_row(b);
    let mut lp = Q::one();
    let mut terms = Vec::with_capacity(b as usize + 1);
    // Coefficient of y^k is C(b, k) lambda^(b - k).
    let mut lpows = vec![Q::one(); b as usize + 1];
    for k in 1..=b as usize {
        lp *= lambda;
        lpows[k] = lp.clone();
    }
    for k in 0..=b as usize {
        let mut m = Mono::one(ring.r(), ring.m());
        m.y[index] = k as u32;
        terms.push((m, &binom[k] * &lpows[b as usize - k]));
    }
    TruncatedSeries::exact(ring.clone(), terms).expect("arity")
}

pub(super) fn series(
    rec: &TransformRecord,
    f: &TruncatedSeries,
    cap: &Value,
) -> Result<TruncatedSeries, ModelError> {
    if !Ring::same(f.ring(), &rec.ring_before) {
        return Err(SeriesError::RingMismatch.into());
    }
    let ring = rec.ring_after.clone();
    let basis = ring.basis().clone();
    let bound = vmin(&basis, f.bound(), cap)?;
    let out = match &rec.transform {
        Transform::IndependentBlowup { target, by } => {
            let (t, b) = (*target, *by);
            f.map_monomials(
                ring,
                |m| {
                    let mut k = m.clone();
                    k.x[b] += m.x[t];
                    k
                },
                bound.clone(),
            )?
        }
        Transform::CoordinateChange { index, shift } => {
            let l = *index;
            let shift = shift.clone().rebase(ring.clone()).with_bound_at_most(&bound)?;
            let p = TruncatedSeries::y_var(ring.clone(), l).sub(&shift)?;
            let mut groups: BTreeMap<u32, Vec<(Mono, Q)>> = BTreeMap::new();
            for (m, c) in f.terms() {
                let mut k = m.clone();
                k.y[l] = 0;
                groups.entry(m.y[l]).or_default().push((k, c.clone()));
            }
            let mut acc = TruncatedSeries::zero(ring.clone()).with_bound_at_most(&bound)?;
            let mut power = TruncatedSeries::one(ring.clone());
            let mut have = 0u32;
            for (a, terms) in groups {
                while have < a {
                    power = power.mul(&p)?.with_bound_at_most(&bound)?;
                    have += 1;
                }
                let g = TruncatedSeries::new(ring.clone(), terms, bound.clone())?;
                acc = acc.add(&g.mul(&power)?.with_bound_at_most(&bound)?)?;
            }
            acc
        }
        Transform::PuiseuxPackage(p) => {
            let l = p.index;
            let c = &p.plan.c;
            let r = ring.r();
            let mut groups: BTreeMap<u32, Vec<(Mono, Q)>> = BTreeMap::new();
            for (m, coef) in f.terms() {
                let mut u: Vec<i64> = m.x.iter().map(|e| *e as i64).collect();
                u.push(m.y[l] as i64);
                let e: Vec<i64> = (0..=r)
                    .map(|k| (0..=r).map(|s| u[s] * c[s][k]).sum())
                    .collect();
                let mut k = m.clone();
                for (i, v) in e[..r].iter().enumerate() {
                    k.x[i] = u32::try_from(*v).map_err(|_| {
                        ModelError::InconsistentPackage("negative exponent in pullback".into())
                    })?;
                }
                k.y[l] = 0;
                groups.entry(e[r] as u32).or_default().push((k, coef.clone()));
            }
            let mut acc = TruncatedSeries::zero(ring.clone()).with_bound_at_most(&bound)?;
            for (b, terms) in groups {
                let g = TruncatedSeries::new(ring.clone(), terms, bound.clone())?;
                let pw = shifted_power(&ring, l, &p.lambda, b);
                acc = acc.add(&g.mul(&pw)?.with_bound_at_most(&bound)?)?;
            }
            acc
        }
    };
    Ok(out.with_bound_at_most(&bound)?)
}

/// Images of the basis one-forms under the transformation.
fn symbol_images(rec: &TransformRecord, cap: &Value) -> Result<Vec<LogForm>, ModelError> {
    let ring = rec.ring_after.clone();
    let r = ring.r();
    let m = ring.m();
    let mut images: Vec<LogForm> = (0..r)
        .map(|i| LogForm::dlog_x(ring.clone(), i))
        .chain((0..m).map(|j| LogForm::dy(ring.clone(), j)))
        .collect();
    match &rec.transform {
        Transform::IndependentBlowup { target, by } => {
            images[*target] = images[*target].add(&LogForm::dlog_x(ring.clone(), *by))?;
        }
        Transform::CoordinateChange { index, shift } => {
            let shift = shift.clone().rebase(ring.clone());
            let df = LogForm::d_function(&shift);
            images[r + index] = LogForm::dy(ring.clone(), *index).sub(&df)?;
        }
        Transform::PuiseuxPackage(p) => {
            let l = p.index;
            let c = &p.plan.c;
            let unit = shifted_power(&ring, l, &p.lambda, 1);
            let needs_inverse = (0..r).any(|s| c[s][r] != 0);
            let inv = if needs_inverse {
                Some(unit.invert_unit(cap)?)
            } else {
                None
            };
            let dyl = LogForm::dy(ring.clone(), l);
            for s in 0..r {
                let coeffs: Vec<Q> = (0..r).map(|k| Q::from(BigInt::from(c[s][k]))).collect();
                let mut img = LogForm::log_combination(ring.clone(), &coeffs);
                if c[s][r] != 0 {
                    let f = inv
                        .as_ref()
                        .expect("inverse computed")
                        .scale(&Q::from(BigInt::from(c[s][r])));
                    img = img.add(&dyl.mul_function(&f)?)?;
                }
                images[s] = img;
            }
            // dy_l = Y (sum_k c[r][k] dx_k/x_k) + c[r][r] x^{c[r]} (y'+lambda)^{c[r][r]-1} dy'.
            let xpart = Mono::new(
                (0..r).map(|k| c[r][k] as u32).collect(),
                vec![0; m],
            );
            let brr = c[r][r];
            let y_image = shifted_power(&ring, l, &p.lambda, brr as u32).mul_monomial(&xpart, &Q::one());
            let coeffs: Vec<Q> = (0..r).map(|k| Q::from(BigInt::from(c[r][k]))).collect();
            let mut img = LogForm::log_combination(ring.clone(), &coeffs).mul_function(&y_image)?;
            if brr > 0 {
                let g = shifted_power(&ring, l, &p.lambda, (brr - 1) as u32)
                    .mul_monomial(&xpart, &Q::from(BigInt::from(brr)));
                img = img.add(&dyl.mul_function(&g)?)?;
            }
            images[r + l] = img;
        }
    }
    Ok(images)
}

pub(super) fn form(rec: &TransformRecord, w: &LogForm, cap: &Value) -> Result<LogForm, ModelError> {
    if !Ring::same(w.ring(), &rec.ring_before) {
        return Err(SeriesError::RingMismatch.into());
    }
    let ring = rec.ring_after.clone();
    let basis = ring.basis().clone();
    let bound = vmin(&basis, w.bound(), cap)?;
    let images = symbol_images(rec, &bound)?;
    let mut acc = LogForm::zero(ring.clone(), w.degree()).with_bound_at_most(&bound)?;
    for (k, f) in w.coeffs() {
        let fp = series(rec, f, &bound)?;
        let mut term = LogForm::function(fp);
        for s in k {
            term = term.wedge(&images[*s as usize])?.with_bound_at_most(&bound)?;
        }
        acc = acc.add(&term)?;
    }
    Ok(acc.with_bound_at_most(&bound)?)
}

#[cfg(test)]
mod tests {
    use crate::logforms::LogForm;
    use crate::model::{mono, rational_model};
    use crate::series::TruncatedSeries;
    use crate::valuegroup::{qi, Value};

    #[test]
    fn package_pulls_back_example_a() {
        let mut m = rational_model(
            &[qi(1)],
            &[(&[(qi(2), qi(1)), (qi(3), qi(1))], Some(qi(3)))],
            qi(20),
        )
        .unwrap();
        let ring = m.ring().clone();
        let f = TruncatedSeries::exact(
            ring,
            [(mono(&[0], &[1]), qi(1)), (mono(&[2], &[0]), qi(-1))],
        )
        .unwrap();
        let rec = m.puiseux_package(0).unwrap();
        let g = rec.pull_back_series(&f, &Value::int(10)).unwrap();
        // y - x^2 = x^2 (y' + 1) - x^2 = x^2 y'.
        assert_eq!(g.len(), 1);
        assert_eq!(g.coeff(&mono(&[2], &[1])), qi(1));
        let w = LogForm::d_function(&f);
        let wp = rec.pull_back_form(&w, &Value::int(10)).unwrap();
        let dg = LogForm::d_function(&g);
        assert!(wp.sub(&dg).unwrap().is_zero());
    }
}
