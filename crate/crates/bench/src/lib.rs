//! Fixed workloads for the `engine` benchmarks.

use std::sync::Arc;

use locuni_core::logforms::LogForm;
use locuni_core::model::{mono, rational_model, ParamModel};
use locuni_core::polygon::Point;
use locuni_core::series::TruncatedSeries;
use locuni_core::valuegroup::{q, qi, AlgebraicReal, BasisSpec, Value};

/// `y - x^2` over the center `y = t^2 + t^3`.
pub fn classical_curve() -> (ParamModel, TruncatedSeries) {
    let model = rational_model(&[qi(1)], &[(&[(qi(2), qi(1)), (qi(3), qi(1))], None)], qi(12)).expect("valid model");
    let f = TruncatedSeries::exact(model.ring().clone(), [(mono(&[0], &[1]), qi(1)), (mono(&[2], &[0]), qi(-1))])
        .expect("valid series");
    (model, f)
}

/// The Euler form `-x(y - x) dx/x + x^2 dy` with its divergent solution
/// `sum (n-1)! t^n` known through `t^degree`.
pub fn euler(degree: i64) -> (ParamModel, LogForm) {
    let mut terms = Vec::new();
    let mut fact = qi(1);
    for n in 1..=degree {
        if n > 1 {
            fact *= qi(n - 1);
        }
        terms.push((qi(n), fact.clone()));
    }
    let model = rational_model(&[qi(1)], &[(&terms, Some(qi(degree)))], qi(2 * degree)).expect("valid model");
    let ring = model.ring().clone();
    let a = TruncatedSeries::exact(ring.clone(), [(mono(&[1], &[1]), qi(-1)), (mono(&[2], &[0]), qi(1))]).expect("valid");
    let c = TruncatedSeries::exact(ring.clone(), [(mono(&[2], &[0]), qi(1))]).expect("valid");
    let w = LogForm::dlog_x(ring.clone(), 0)
        .mul_function(&a)
        .and_then(|x| x.add(&LogForm::dy(ring, 0).mul_function(&c)?))
        .expect("valid form");
    (model, w)
}

/// Basis `(1, sqrt 2, sqrt 3)` and pairs of values straddling near-ties.
pub fn near_ties() -> (Arc<BasisSpec>, Vec<(Value, Value)>) {
    let basis = Arc::new(
        BasisSpec::new(vec![
            AlgebraicReal::rational(qi(1)),
            AlgebraicReal::sqrt(2).expect("square root"),
            AlgebraicReal::sqrt(3).expect("square root"),
        ])
        .expect("independent basis"),
    );
    let convergents = [(3, 2), (17, 12), (99, 70), (577, 408), (3363, 2378)];
    let pairs = convergents
        .iter()
        .map(|&(p, d)| {
            (
                Value::from_coords(vec![qi(p), qi(0), q(1, 7)]),
                Value::from_coords(vec![qi(0), qi(d), q(1, 7)]),
            )
        })
        .collect();
    (basis, pairs)
}

/// A staircase cloud whose planning sequence is long.
pub fn staircase(height: u32) -> Vec<Point> {
    (0..=height)
        .map(|s| {
            let drop = (height - s) as i64;
            Point::new(Value::rat(q(drop * drop * 3, 2)), s)
        })
        .collect()
}
