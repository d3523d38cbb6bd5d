//! Positively convex polygons in the (abscissa, ordinate) plane with integer
//! ordinates: hulls of level clouds, critical data and planning moves.
//!
//! A polygon is kept as its vertex list, ordered by increasing ordinate and
//! strictly decreasing abscissa. The abscissa function `lambda(s)` is infinite
//! below the lowest vertex, linear between vertices and constant above the top.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::valuegroup::{q, qi, BasisSpec, Value, ValueError, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolygonError {
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("polygon is empty")]
    EmptyPolygon,
    #[error("polygon already lies in the target half-plane")]
    AlreadyContained,
    #[error("no vertex satisfies the planning conditions")]
    NoEligibleVertex,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// A cloud or hull point: abscissa and integer ordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point {
    pub abscissa: Value,
    pub ordinate: u32,
}

impl Point {
    pub fn new(abscissa: Value, ordinate: u32) -> Self {
        Self { abscissa, ordinate }
    }
}

#[derive(Clone, Debug)]
pub struct Polygon {
    basis: Arc<BasisSpec>,
    vertices: Vec<Point>,
}

/// Supporting data of the line of slope `-1/delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalData {
    /// `min(lambda + s delta)` over the polygon.
    pub value: Value,
    /// Ordinate of the highest vertex on the supporting line.
    pub height: u32,
    /// Lowest and highest vertices on the supporting line (equal for a vertex).
    pub segment: (Point, Point),
}

/// The planning threshold `theta = min(1, 2 eps / ((h+1)(h+2)))`.
#[derive(Clone, Debug, PartialEq)]
pub enum Theta {
    One,
    Scaled(Value),
}

/// A planning move chosen by [`Polygon::planning`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlanningChoice {
    pub ordinate: u32,
    /// Smallest integer strictly above `rho / delta`.
    pub h: u64,
    pub theta: Theta,
    /// `ceil((h+1)(rho+1)/theta)`, the bound on the length of planning sequences.
    pub bound: BigInt,
}

impl Polygon {
    pub fn empty(basis: Arc<BasisSpec>) -> Self {
        Self {
            basis,
            vertices: vec![],
        }
    }

    /// Positive convex hull of a cloud; infinite abscissas are ignored.
    pub fn from_cloud(basis: Arc<BasisSpec>, points: &[Point]) -> Result<Self, PolygonError> {
        let b = &*basis;
        let mut pts: Vec<Point> = points
            .iter()
            .filter(|p| !p.abscissa.is_infinite())
            .cloned()
            .collect();
        pts.sort_by_key(|p| p.ordinate);
        // Per ordinate keep the minimum, then drop points dominated from below.
        let mut staircase: Vec<Point> = Vec::new();
        for p in pts {
            if let Some(last) = staircase.last() {
                if last.ordinate == p.ordinate {
                    if b.lt(&p.abscissa, &last.abscissa)? {
                        staircase.pop();
                    } else {
                        continue;
                    }
                }
            }
            if let Some(last) = staircase.iter().rev().find(|q| q.ordinate < p.ordinate) {
                if b.le(&last.abscissa, &p.abscissa)? {
                    continue;
                }
            }
            staircase.push(p);
        }
        // Lower hull of the staircase, seen as the graph of s -> lambda.
        let mut hull: Vec<Point> = Vec::new();
        for p in staircase {
            while hull.len() >= 2 {
                let p0 = &hull[hull.len() - 2];
                let p1 = &hull[hull.len() - 1];
                if on_or_above_chord(b, p0, p1, &p)? {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        Ok(Self {
            basis,
            vertices: hull,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn lowest_vertex(&self) -> Option<&Point> {
        self.vertices.first()
    }

    pub fn top_vertex(&self) -> Option<&Point> {
        self.vertices.last()
    }

    /// `lambda_N(s)`.
    pub fn abscissa(&self, s: i64) -> Value {
        let Some(first) = self.vertices.first() else {
            return Value::Infinity;
        };
        if s < first.ordinate as i64 {
            return Value::Infinity;
        }
        let last = self.vertices.last().expect("nonempty");
        if s >= last.ordinate as i64 {
            return last.abscissa.clone();
        }
        for w in self.vertices.windows(2) {
            let (a, c) = (&w[0], &w[1]);
            if s == a.ordinate as i64 {
                return a.abscissa.clone();
            }
            if s < c.ordinate as i64 {
                let t = q(s - a.ordinate as i64, (c.ordinate - a.ordinate) as i64);
                let diff = c.abscissa.sub(&a.abscissa).expect("finite vertices");
                return a.abscissa.add(&diff.scale(&t));
            }
        }
        last.abscissa.clone()
    }

    /// Whether `(lambda_N(s), s)` is a vertex.
    pub fn is_vertex(&self, s: u32) -> bool {
        self.vertices.iter().any(|p| p.ordinate == s)
    }

    /// `alpha_N(s) = lambda(s-1) + lambda(s+1) - 2 lambda(s)`: zero off the
    /// polygon, infinite at the lowest vertex.
    pub fn sharpness(&self, s: i64) -> Value {
        let here = self.abscissa(s);
        if here.is_infinite() {
            return Value::zero(self.basis.dim());
        }
        let below = self.abscissa(s - 1);
        if below.is_infinite() {
            return Value::Infinity;
        }
        let above = self.abscissa(s + 1);
        below
            .add(&above)
            .sub(&here.scale_int(2))
            .expect("finite abscissas")
    }

    /// Critical value, height and segment for the slope `-1/delta`.
    pub fn critical_data(&self, delta: &Value) -> Result<CriticalData, PolygonError> {
        let b = &*self.basis;
        if self.vertices.is_empty() {
            return Err(PolygonError::EmptyPolygon);
        }
        if b.signum(delta)? != Ordering::Greater {
            return Err(PolygonError::InvalidParameter("delta must be positive"));
        }
        let level = |p: &Point| p.abscissa.add(&delta.scale_int(p.ordinate as i64));
        let mut best = level(&self.vertices[0]);
        let mut lo = 0usize;
        let mut hi = 0usize;
        for (k, p) in self.vertices.iter().enumerate().skip(1) {
            let v = level(p);
            match b.cmp(&v, &best)? {
                Ordering::Less => {
                    best = v;
                    lo = k;
                    hi = k;
                }
                Ordering::Equal => hi = k,
                Ordering::Greater => {}
            }
        }
        Ok(CriticalData {
            value: best,
            height: self.vertices[hi].ordinate,
            segment: (self.vertices[lo].clone(), self.vertices[hi].clone()),
        })
    }

    /// `varsigma_delta(N)`; infinite for the empty polygon.
    pub fn critical_value(&self, delta: &Value) -> Result<Value, PolygonError> {
        match self.critical_data(delta) {
            Ok(c) => Ok(c.value),
            Err(PolygonError::EmptyPolygon) => Ok(Value::Infinity),
            Err(e) => Err(e),
        }
    }

    /// Whether the polygon lies in `H+_delta(rho) = {lambda + s delta >= rho}`.
    pub fn contained_in(&self, delta: &Value, rho: &Value) -> Result<bool, PolygonError> {
        let v = self.critical_value(delta)?;
        Ok(self.basis.le(rho, &v)?)
    }

    /// `max(0, rho - s delta - lambda(s))`, the amount by which level `s` sits
    /// below the line `lambda + s delta = rho`.
    pub fn excess(&self, s: u32, delta: &Value, rho: &Value) -> Result<Value, PolygonError> {
        let zero = Value::zero(self.basis.dim());
        let lam = self.abscissa(s as i64);
        if lam.is_infinite() {
            return Ok(zero);
        }
        let e = rho
            .sub(&delta.scale_int(s as i64))
            .and_then(|v| v.sub(&lam))
            .ok_or(PolygonError::InvalidParameter("rho must be finite"))?;
        Ok(self.basis.max(&zero, &e)?)
    }

    /// Chooses a `(delta, rho, eps)`-planning vertex: `lambda(s) < rho - s delta`
    /// and `alpha(s) >= theta`. The sharpest eligible vertex is returned, the
    /// lowest ordinate breaking ties; the chord move then gains `alpha(s)/2`.
    pub fn planning(&self, delta: &Value, rho: &Value, eps: &Value) -> Result<PlanningChoice, PolygonError> {
        let b = &*self.basis;
        if b.signum(delta)? != Ordering::Greater {
            return Err(PolygonError::InvalidParameter("delta must be positive"));
        }
        if b.signum(eps)? != Ordering::Greater {
            return Err(PolygonError::InvalidParameter("eps must be positive"));
        }
        if b.signum(rho)? == Ordering::Less || rho.is_infinite() {
            return Err(PolygonError::InvalidParameter("rho must be finite and nonnegative"));
        }
        let target = rho.sub(eps).expect("finite");
        if self.contained_in(delta, &target)? {
            return Err(PolygonError::AlreadyContained);
        }
        let h = b.steps_above(rho, delta)?;
        let theta = theta_for(b, eps, h)?;
        let bound = planning_bound(b, rho, h, &theta)?;
        let mut best: Option<(u32, Value)> = None;
        for p in &self.vertices {
            let line = rho.sub(&delta.scale_int(p.ordinate as i64)).expect("finite");
            if !b.lt(&p.abscissa, &line)? {
                continue;
            }
            let alpha = self.sharpness(p.ordinate as i64);
            let sharp_enough = match &theta {
                Theta::One => alpha.is_infinite() || b.cmp_rational(&alpha, &Q::one())? != Ordering::Less,
                Theta::Scaled(t) => b.le(t, &alpha)?,
            };
            if !sharp_enough {
                continue;
            }
            let sharper = match &best {
                None => true,
                Some((_, a)) => !a.is_infinite() && (alpha.is_infinite() || b.lt(a, &alpha)?),
            };
            if sharper {
                best = Some((p.ordinate, alpha));
            }
        }
        match best {
            Some((ordinate, _)) => Ok(PlanningChoice {
                ordinate,
                h,
                theta,
                bound,
            }),
            None => Err(PolygonError::NoEligibleVertex),
        }
    }

    /// The extremal `s`-planning: hull of the other vertices together with the
    /// polygon points at ordinates `s - 1` and `s + 1`.
    pub fn apply_planning(&self, s: u32) -> Result<Self, PolygonError> {
        if !self.is_vertex(s) {
            return Err(PolygonError::InvalidParameter("planning ordinate is not a vertex"));
        }
        let mut pts: Vec<Point> = self
            .vertices
            .iter()
            .filter(|p| p.ordinate != s)
            .cloned()
            .collect();
        for t in [s as i64 - 1, s as i64 + 1] {
            if t < 0 {
                continue;
            }
            let a = self.abscissa(t);
            if !a.is_infinite() {
                pts.push(Point::new(a, t as u32));
            }
        }
        Self::from_cloud(self.basis.clone(), &pts)
    }

    /// Plans until the polygon lies in `H+_delta(rho - eps)`; returns the
    /// final polygon and the number of moves.
    pub fn plan_fully(
        &self,
        delta: &Value,
        rho: &Value,
        eps: &Value,
        max_moves: u64,
    ) -> Result<(Self, u64), PolygonError> {
        let mut cur = self.clone();
        let mut moves = 0u64;
        loop {
            match cur.planning(delta, rho, eps) {
                Ok(choice) => {
                    if moves >= max_moves {
                        return Err(PolygonError::InvalidParameter("planning move cap reached"));
                    }
                    cur = cur.apply_planning(choice.ordinate)?;
                    moves += 1;
                }
                Err(PolygonError::AlreadyContained) => return Ok((cur, moves)),
                Err(e) => return Err(e),
            }
        }
    }

    /// SVG snapshot: cloud, hull edges, the critical line of slope `-1/delta`
    /// and the critical vertices.
    pub fn to_svg(&self, cloud: &[Point], delta: Option<&Value>) -> String {
        let b = &*self.basis;
        let fx = |v: &Value| b.to_f64(v);
        let max_s = cloud
            .iter()
            .map(|p| p.ordinate)
            .chain(self.vertices.iter().map(|p| p.ordinate))
            .max()
            .unwrap_or(0) as f64
            + 1.0;
        let max_a = cloud
            .iter()
            .filter(|p| !p.abscissa.is_infinite())
            .map(|p| fx(&p.abscissa))
            .fold(1.0f64, f64::max)
            * 1.2;
        let (w, h, pad) = (480.0, 360.0, 40.0);
        let sx = |a: f64| pad + a / max_a * (w - 2.0 * pad);
        let sy = |s: f64| h - pad - s / max_s * (h - 2.0 * pad);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<line x1="{pad}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
            y0 = h - pad,
            x1 = w - pad
        );
        let _ = writeln!(
            out,
            r#"<line x1="{pad}" y1="{y0}" x2="{pad}" y2="{pad}" stroke="black"/>"#,
            y0 = h - pad
        );
        for p in cloud.iter().filter(|p| !p.abscissa.is_infinite()) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="gray"/>"#,
                sx(fx(&p.abscissa)),
                sy(p.ordinate as f64)
            );
        }
        if let (Some(first), Some(last)) = (self.vertices.first(), self.vertices.last()) {
            let mut path = format!("M {:.2} {:.2}", w - pad, sy(first.ordinate as f64));
            for p in &self.vertices {
                let _ = write!(path, " L {:.2} {:.2}", sx(fx(&p.abscissa)), sy(p.ordinate as f64));
            }
            let _ = write!(path, " L {:.2} {:.2}", sx(fx(&last.abscissa)), pad);
            let _ = writeln!(out, r#"<path d="{path}" fill="none" stroke="steelblue" stroke-width="2"/>"#);
        }
        if let Some(d) = delta {
            if let Ok(c) = self.critical_data(d) {
                let v = fx(&c.value);
                let dv = fx(d);
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="4 3"/>"#,
                    sx(v),
                    sy(0.0),
                    sx(0.0),
                    sy(if dv > 0.0 { v / dv } else { max_s })
                );
                for p in [&c.segment.0, &c.segment.1] {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="firebrick"/>"#,
                        sx(fx(&p.abscissa)),
                        sy(p.ordinate as f64)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Whether `p1` lies on or above the chord from `p0` to `p2` (ordinates increasing).
fn on_or_above_chord(b: &BasisSpec, p0: &Point, p1: &Point, p2: &Point) -> Result<bool, ValueError> {
    let s01 = (p1.ordinate - p0.ordinate) as i64;
    let s02 = (p2.ordinate - p0.ordinate) as i64;
    let lhs = p1.abscissa.sub(&p0.abscissa).expect("finite").scale_int(s02);
    let rhs = p2.abscissa.sub(&p0.abscissa).expect("finite").scale_int(s01);
    b.le(&rhs, &lhs)
}

fn theta_for(b: &BasisSpec, eps: &Value, h: u64) -> Result<Theta, ValueError> {
    let c = q(2, ((h + 1) * (h + 2)) as i64);
    let scaled = eps.scale(&c);
    if b.cmp_rational(&scaled, &Q::one())? == Ordering::Less {
        Ok(Theta::Scaled(scaled))
    } else {
        Ok(Theta::One)
    }
}

/// `ceil((h+1)(rho+1)/theta)`.
fn planning_bound(b: &BasisSpec, rho: &Value, h: u64, theta: &Theta) -> Result<BigInt, ValueError> {
    let h1 = qi(h as i64 + 1);
    match theta {
        // (h+1) rho + (h+1) with an integer second summand.
        Theta::One => Ok(b.ceil_scaled(rho, &h1)? + BigInt::from(h + 1)),
        Theta::Scaled(t) => {
            // Smallest n with n t - (h+1) rho >= h+1.
            let num = rho.scale(&h1);
            let (nlo, _) = b.enclose(&num, 64).expect("finite");
            let (_, thi) = b.enclose(t, 64).expect("finite");
            let guess = ((nlo + &h1) / thi).floor().to_integer();
            let mut n = if guess.is_positive() { guess - 2 } else { BigInt::zero() };
            if n.is_negative() {
                n = BigInt::zero();
            }
            loop {
                let lhs = t.scale(&Q::from_integer(n.clone())).sub(&num).expect("finite");
                if b.cmp_rational(&lhs, &h1)? != Ordering::Less {
                    return Ok(n);
                }
                n += 1;
            }
        }
    }
}

impl Theta {
    pub fn to_f64(&self, b: &BasisSpec) -> f64 {
        match self {
            Theta::One => 1.0,
            Theta::Scaled(v) => b.to_f64(v),
        }
    }
}

impl PlanningChoice {
    pub fn bound_u64(&self) -> Option<u64> {
        self.bound.to_u64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b() -> Arc<BasisSpec> {
        Arc::new(BasisSpec::unit())
    }

    fn pt(a: i64, s: u32) -> Point {
        Point::new(Value::int(a), s)
    }

    #[test]
    fn hull_keeps_extremal_points() {
        let p = Polygon::from_cloud(b(), &[pt(3, 0), pt(1, 1), pt(0, 2)]).unwrap();
        assert_eq!(p.vertices().len(), 3);
        let p = Polygon::from_cloud(b(), &[pt(3, 0), pt(2, 1), pt(0, 2)]).unwrap();
        assert_eq!(p.vertices(), &[pt(3, 0), pt(0, 2)]);
        let p = Polygon::from_cloud(b(), &[pt(5, 0)]).unwrap();
        assert_eq!(p.vertices(), &[pt(5, 0)]);
    }

    #[test]
    fn critical_data_by_slope() {
        let p = Polygon::from_cloud(b(), &[pt(3, 0), pt(1, 1), pt(0, 2)]).unwrap();
        let c = p.critical_data(&Value::int(1)).unwrap();
        assert_eq!(c.value, Value::int(2));
        assert_eq!(c.height, 2);
        assert_eq!(c.segment, (pt(1, 1), pt(0, 2)));
        let c = p.critical_data(&Value::int(3)).unwrap();
        assert_eq!(c.value, Value::int(3));
        assert_eq!(c.height, 0);
        let single = Polygon::from_cloud(b(), &[pt(4, 0)]).unwrap();
        let c = single.critical_data(&Value::int(7)).unwrap();
        assert_eq!((c.value, c.height), (Value::int(4), 0));
    }

    #[test]
    fn sharpness_detects_vertices() {
        let p = Polygon::from_cloud(b(), &[pt(3, 0), pt(2, 1), pt(1, 2)]).unwrap();
        assert!(p.sharpness(1).is_zero());
        assert!(p.sharpness(0).is_infinite());
        let p = Polygon::from_cloud(b(), &[pt(3, 0), pt(1, 1), pt(0, 2)]).unwrap();
        assert_eq!(p.sharpness(1), Value::int(1));
        assert!(p.sharpness(-1).is_zero());
    }

    #[test]
    fn planning_threshold_and_bound() {
        // rho = 3, delta = 1: h = 4, theta = 2 eps / 30.
        let p = Polygon::from_cloud(b(), &[pt(0, 0)]).unwrap();
        let c = p.planning(&Value::int(1), &Value::int(3), &Value::int(1)).unwrap();
        assert_eq!(c.h, 4);
        assert_eq!(c.theta, Theta::Scaled(Value::rat(q(1, 15))));
        // (h+1)(rho+1)/theta = 5 * 4 * 15 = 300.
        assert_eq!(c.bound, BigInt::from(300));
        assert_eq!(c.ordinate, 0);
    }

    #[test]
    fn contained_polygon_refuses_planning() {
        let p = Polygon::from_cloud(b(), &[pt(5, 0), pt(4, 1)]).unwrap();
        assert_eq!(
            p.planning(&Value::int(1), &Value::int(3), &Value::int(1)),
            Err(PolygonError::AlreadyContained)
        );
    }

    #[test]
    fn planning_moves_to_chord() {
        let p = Polygon::from_cloud(b(), &[pt(4, 0), pt(0, 1), pt(0, 2)]).unwrap();
        // Lowest vertex removal drops the bottom row.
        let p1 = p.apply_planning(0).unwrap();
        assert_eq!(p1.vertices(), &[pt(0, 1)]);
        let p = Polygon::from_cloud(b(), &[pt(6, 0), pt(1, 1), pt(0, 3)]).unwrap();
        let p2 = p.apply_planning(1).unwrap();
        // Neighbours at s=0 (6) and s=2 (1/2): chord at 1 is 13/4.
        assert_eq!(p2.abscissa(1), Value::rat(q(13, 4)));
    }

    #[test]
    fn full_planning_respects_bound() {
        let p = Polygon::from_cloud(b(), &[pt(0, 0), pt(0, 1)]).unwrap();
        let (delta, rho, eps) = (Value::int(1), Value::int(2), Value::rat(q(1, 2)));
        let bound = p.planning(&delta, &rho, &eps).unwrap().bound;
        let (end, moves) = p.plan_fully(&delta, &rho, &eps, 100_000).unwrap();
        assert!(BigInt::from(moves) <= bound);
        assert!(end.contained_in(&delta, &Value::rat(q(3, 2))).unwrap());
    }
}
