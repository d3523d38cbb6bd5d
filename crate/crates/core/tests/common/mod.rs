//! Seeded generators shared by the acceptance and property suites.
#![allow(dead_code)]

use std::sync::Arc;

use locuni_core::logforms::LogForm;
use locuni_core::model::{HahnSeries, ParamModel};
use locuni_core::series::{Mono, RingRef, TruncatedSeries};
use locuni_core::valuegroup::{q, qi, AlgebraicReal, BasisSpec, Value, Q};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Basis `(1)` for one independent parameter, `(1, sqrt 2)` for two.
pub fn basis_for(r: usize) -> Arc<BasisSpec> {
    match r {
        1 => Arc::new(BasisSpec::unit()),
        2 => Arc::new(
            BasisSpec::new(vec![AlgebraicReal::rational(qi(1)), AlgebraicReal::sqrt(2).unwrap()]).unwrap(),
        ),
        _ => panic!("generators cover r <= 2"),
    }
}

pub fn nonzero_coeff(g: &mut ChaCha8Rng) -> Q {
    loop {
        let n: i64 = g.gen_range(-5..=5);
        if n != 0 {
            return q(n, g.gen_range(1..=3));
        }
    }
}

/// Value `sum a_i nu(x_i)` with the x-values being the basis vectors.
pub fn lattice_value(r: usize, a: &[Q]) -> Value {
    Value::from_coords(a[..r].to_vec())
}

/// A center `c t^e + tail` with `e` a positive combination of the x-values,
/// optionally with denominator `den` (ramified contact).
pub fn random_center(g: &mut ChaCha8Rng, r: usize, den: i64, tail: usize) -> HahnSeries {
    let b = basis_for(r);
    let mut lead: Vec<Q> = (0..r).map(|_| q(g.gen_range(0..=3), den)).collect();
    if lead.iter().all(|c| *c == qi(0)) {
        lead[0] = q(g.gen_range(1..=3), den);
    }
    let mut terms = vec![(lattice_value(r, &lead), nonzero_coeff(g))];
    for _ in 0..tail {
        let extra: Vec<Q> = (0..r).map(|_| q(g.gen_range(0..=3), den)).collect();
        let e: Vec<Q> = lead.iter().zip(&extra).map(|(a, c)| a + c + q(1, den)).collect();
        terms.push((lattice_value(r, &e), nonzero_coeff(g)));
    }
    HahnSeries::exact(&b, terms).unwrap()
}

/// The rational `n/d` as a value with `dim` coordinates.
pub fn scalar(dim: usize, n: i64, d: i64) -> Value {
    let mut c = vec![qi(0); dim];
    c[0] = q(n, d);
    Value::from_coords(c)
}

pub fn random_model(g: &mut ChaCha8Rng, r: usize, m: usize, cap: i64) -> ParamModel {
    let b = basis_for(r);
    let xs: Vec<Value> = (0..r).map(|i| Value::unit(r, i)).collect();
    let den = if g.gen_bool(0.3) { 2 } else { 1 };
    let ys = (0..m).map(|_| random_center(g, r, den, 2)).collect();
    ParamModel::new(b, xs, ys, scalar(r, cap, 1)).unwrap()
}

pub fn random_mono(g: &mut ChaCha8Rng, r: usize, m: usize, xmax: u32, ymax: u32) -> Mono {
    Mono::new(
        (0..r).map(|_| g.gen_range(0..=xmax)).collect(),
        (0..m).map(|_| g.gen_range(0..=ymax)).collect(),
    )
}

/// A polynomial with `n` random terms and no constant term.
pub fn random_series(g: &mut ChaCha8Rng, ring: &RingRef, n: usize, xmax: u32, ymax: u32) -> TruncatedSeries {
    let (r, m) = (ring.r(), ring.m());
    let terms: Vec<(Mono, Q)> = (0..n)
        .map(|_| (random_mono(g, r, m, xmax, ymax), nonzero_coeff(g)))
        .filter(|(mo, _)| !mo.is_one())
        .collect();
    TruncatedSeries::exact(ring.clone(), terms).unwrap()
}

/// A polynomial allowed to contain a constant term.
pub fn random_coefficient(g: &mut ChaCha8Rng, ring: &RingRef, n: usize, xmax: u32, ymax: u32) -> TruncatedSeries {
    let (r, m) = (ring.r(), ring.m());
    let terms: Vec<(Mono, Q)> = (0..n)
        .map(|_| (random_mono(g, r, m, xmax, ymax), nonzero_coeff(g)))
        .collect();
    TruncatedSeries::exact(ring.clone(), terms).unwrap()
}

/// A one-form with random polynomial coefficients on every basis symbol.
pub fn random_form(g: &mut ChaCha8Rng, ring: &RingRef, n: usize, xmax: u32, ymax: u32) -> LogForm {
    let mut w = LogForm::zero(ring.clone(), 1);
    for i in 0..ring.r() {
        let c = random_coefficient(g, ring, n, xmax, ymax);
        w = w.add(&LogForm::dlog_x(ring.clone(), i).mul_function(&c).unwrap()).unwrap();
    }
    for j in 0..ring.m() {
        if g.gen_bool(0.7) {
            let c = random_coefficient(g, ring, n, xmax, ymax);
            w = w.add(&LogForm::dy(ring.clone(), j).mul_function(&c).unwrap()).unwrap();
        }
    }
    w
}

/// Dense univariate polynomial in `t` with rational exponents handled by a
/// common denominator: `coeffs[k]` multiplies `t^(k/den)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TPoly {
    pub den: i64,
    pub coeffs: Vec<Q>,
}

impl TPoly {
    pub fn monomial(num: i64, den: i64, c: Q) -> Self {
        let mut coeffs = vec![qi(0); num as usize + 1];
        coeffs[num as usize] = c;
        Self { den, coeffs }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.den, o.den);
        let n = self.coeffs.len().max(o.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).cloned().unwrap_or(qi(0)) + o.coeffs.get(k).cloned().unwrap_or(qi(0)))
            .collect();
        Self { den: self.den, coeffs }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.den, o.den);
        let mut coeffs = vec![qi(0); self.coeffs.len() + o.coeffs.len()];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, c) in o.coeffs.iter().enumerate() {
                coeffs[i + j] += a * c;
            }
        }
        Self { den: self.den, coeffs }
    }

    /// Order as a rational exponent, `None` for zero.
    pub fn order(&self) -> Option<Q> {
        self.coeffs
            .iter()
            .position(|c| *c != qi(0))
            .map(|k| q(k as i64, self.den))
    }
}
