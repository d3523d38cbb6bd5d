//! Property tests for the algebraic invariants the engine relies on.

mod common;

use std::cmp::Ordering;
use std::sync::Arc;

use proptest::prelude::*;

use common::*;
use locuni_core::logforms::LogForm;
use locuni_core::polygon::{Point, Polygon, PolygonError};
use locuni_core::preparation::decompose_levels;
use locuni_core::series::Mono;
use locuni_core::valuegroup::{q, qi, AlgebraicReal, BasisSpec, Value, Q};

fn root_basis() -> BasisSpec {
    BasisSpec::new(vec![
        AlgebraicReal::rational(qi(1)),
        AlgebraicReal::sqrt(2).unwrap(),
        AlgebraicReal::sqrt(3).unwrap(),
    ])
    .unwrap()
}

fn coords() -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec((-30i64..=30, 1i64..=6).prop_map(|(n, d)| q(n, d)), 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn order_is_antisymmetric_and_transitive(a in coords(), b in coords(), c in coords()) {
        let basis = root_basis();
        let (u, v, w) = (Value::from_coords(a), Value::from_coords(b), Value::from_coords(c));
        let uv = basis.cmp(&u, &v).unwrap();
        prop_assert_eq!(uv, basis.cmp(&v, &u).unwrap().reverse());
        let vw = basis.cmp(&v, &w).unwrap();
        if uv != Ordering::Greater && vw != Ordering::Greater {
            prop_assert_ne!(basis.cmp(&u, &w).unwrap(), Ordering::Greater);
        }
    }

    #[test]
    fn equal_exactly_when_coordinates_agree(a in coords(), b in coords()) {
        let basis = root_basis();
        let same = a == b;
        let ord = basis.cmp(&Value::from_coords(a), &Value::from_coords(b)).unwrap();
        prop_assert_eq!(ord == Ordering::Equal, same);
    }

    #[test]
    fn nonconstant_monomials_have_positive_value(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 1 + (seed % 2) as usize, 2, 20);
        let ring = model.ring();
        let base = random_mono(&mut g, ring.r(), ring.m(), 3, 2);
        let extra = random_mono(&mut g, ring.r(), ring.m(), 3, 2);
        prop_assume!(!extra.is_one());
        let b = ring.basis();
        prop_assert!(b.lt(&ring.weight(&base), &ring.weight(&base.mul(&extra))).unwrap());
    }

    #[test]
    fn exterior_derivative_squares_to_zero(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 1 + (seed % 2) as usize, 2, 20);
        let ring = model.ring().clone();
        let f = random_coefficient(&mut g, &ring, 4, 3, 2);
        let w = random_form(&mut g, &ring, 3, 3, 2);
        prop_assert!(LogForm::d_function(&f).d().unwrap().is_zero());
        prop_assert!(w.d().unwrap().d().unwrap().is_zero());
    }

    #[test]
    fn wedge_of_one_forms_anticommutes(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 1 + (seed % 2) as usize, 2, 20);
        let ring = model.ring().clone();
        let a = random_form(&mut g, &ring, 2, 2, 1);
        let b = random_form(&mut g, &ring, 2, 2, 1);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().is_zero());
        prop_assert!(a.wedge(&a).unwrap().is_zero());
    }

    #[test]
    fn differential_obeys_leibniz(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 1 + (seed % 2) as usize, 2, 20);
        let ring = model.ring().clone();
        let f = random_coefficient(&mut g, &ring, 3, 2, 2);
        let h = random_coefficient(&mut g, &ring, 3, 2, 2);
        let lhs = LogForm::d_function(&f.mul(&h).unwrap());
        let rhs = LogForm::d_function(&h)
            .mul_function(&f)
            .unwrap()
            .add(&LogForm::d_function(&f).mul_function(&h).unwrap())
            .unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().is_zero());
    }

    #[test]
    fn levels_reconstruct_the_form(seed in any::<u64>(), m in 1usize..=2) {
        let mut g = rng(seed);
        let model = random_model(&mut g, 1 + (seed % 2) as usize, m, 20);
        let ring = model.ring().clone();
        // Levels are taken along the last parameter so no later one occurs.
        let w = random_form(&mut g, &ring, 4, 3, 3);
        let levels = decompose_levels(&w, m - 1).unwrap();
        prop_assert!(levels.reconstruct().unwrap().sub(&w).unwrap().is_zero());
    }

    #[test]
    fn planning_never_lowers_the_polygon(
        pts in prop::collection::vec((0i64..=40, 1i64..=4, 0u32..=6), 1..7),
        pick in any::<prop::sample::Index>(),
    ) {
        let basis = Arc::new(BasisSpec::unit());
        let cloud: Vec<Point> = pts.iter().map(|(n, d, s)| Point::new(Value::rat(q(*n, *d)), *s)).collect();
        let poly = Polygon::from_cloud(basis.clone(), &cloud).unwrap();
        let s = poly.vertices()[pick.index(poly.vertices().len())].ordinate;
        let next = poly.apply_planning(s).unwrap();
        for t in 0..10i64 {
            let (before, after) = (poly.abscissa(t), next.abscissa(t));
            prop_assert!(after.is_infinite() || (!before.is_infinite() && basis.le(&before, &after).unwrap()));
        }
        // The planned level strictly rises or leaves the polygon.
        let after = next.abscissa(s as i64);
        prop_assert!(after.is_infinite() || basis.lt(&poly.abscissa(s as i64), &after).unwrap());
    }

    #[test]
    fn planning_choice_is_eligible(
        pts in prop::collection::vec((0i64..=40, 1i64..=4, 0u32..=6), 1..7),
        delta in 1i64..=12, rho in 1i64..=60, eps in 1i64..=8,
    ) {
        let basis = Arc::new(BasisSpec::unit());
        let cloud: Vec<Point> = pts.iter().map(|(n, d, s)| Point::new(Value::rat(q(*n, *d)), *s)).collect();
        let poly = Polygon::from_cloud(basis.clone(), &cloud).unwrap();
        let (delta, rho, eps) = (Value::rat(q(delta, 4)), Value::rat(q(rho, 4)), Value::rat(q(eps, 8)));
        prop_assume!(basis.lt(&eps, &rho).unwrap());
        match poly.planning(&delta, &rho, &eps) {
            Ok(choice) => {
                let s = choice.ordinate as i64;
                let line = rho.sub(&delta.scale_int(s)).unwrap();
                prop_assert!(basis.lt(&poly.abscissa(s), &line).unwrap());
                prop_assert!(poly.is_vertex(choice.ordinate));
            }
            Err(PolygonError::AlreadyContained) => {
                prop_assert!(poly.contained_in(&delta, &rho.sub(&eps).unwrap()).unwrap());
            }
            Err(e) => prop_assert!(false, "no eligible vertex although not contained: {e}"),
        }
    }
}

#[test]
fn unit_monomial_weight_is_zero() {
    let mut g = rng(0);
    let model = random_model(&mut g, 1, 1, 10);
    let ring = model.ring();
    assert_eq!(ring.weight(&Mono::one(1, 1)), Value::int(0));
}
