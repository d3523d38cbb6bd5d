//! Planning a Puiseux package: a sequence of blow-ups among `(x_1..x_r, y)`
//! ending with `y = x^{p/d}`-type monomial relation turned into a unit.
//!
//! The sequence is found by best-first search over elementary blow-ups. A state
//! is the exponent matrix `B` (old variables as monomials in current ones); the
//! relation vector `c = B^T (-p, d)` and the current values follow from it.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::valuegroup::{BasisSpec, Value, ValueError, Q};

pub type IntMatrix = Vec<Vec<i64>>;

/// Exponent data of a package on one dependent parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackagePlan {
    /// Ramification index: `d nu(y) = sum p_i nu(x_i)`.
    pub d: i64,
    pub p: Vec<i64>,
    /// Blow-up composite before the last step.
    pub b: IntMatrix,
    /// Full package: `old_s = prod_k new_k^{c[s][k]}`, last new variable is `y' + lambda`.
    pub c: IntMatrix,
    pub c_inv: IntMatrix,
    /// Independent parameter absorbed in the last step.
    pub i0: usize,
    /// Number of elementary blow-ups used.
    pub steps: usize,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("value of the dependent parameter is not a rational combination of the independent values")]
    NoRationalRelation,
    #[error("no blow-up sequence found within {0} nodes")]
    SearchExhausted(usize),
}

/// Rational coordinates `q` with `target = sum q_i gens_i`, all values finite.
pub fn rational_relation(gens: &[Value], target: &Value) -> Result<Vec<Q>, PlanError> {
    let r = gens.len();
    let cols: Vec<&[Q]> = gens
        .iter()
        .map(|g| g.coords().ok_or(PlanError::NoRationalRelation))
        .collect::<Result<_, _>>()?;
    let t = target.coords().ok_or(PlanError::NoRationalRelation)?;
    let n = t.len();
    // Augmented n x (r + 1) system.
    let mut m: Vec<Vec<Q>> = (0..n)
        .map(|row| {
            let mut v: Vec<Q> = cols.iter().map(|c| c[row].clone()).collect();
            v.push(t[row].clone());
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..r {
        let Some(pr) = (row..n).find(|i| !m[*i][col].is_zero()) else {
            continue;
        };
        m.swap(row, pr);
        let inv = Q::one() / &m[row][col];
        for v in m[row].iter_mut() {
            *v *= &inv;
        }
        for i in 0..n {
            if i != row && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for k in 0..=r {
                    let sub = &f * &m[row][k];
                    m[i][k] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if m[row..].iter().any(|v| !v[r].is_zero()) || pivots.len() < r {
        return Err(PlanError::NoRationalRelation);
    }
    let mut q = vec![Q::zero(); r];
    for (i, col) in pivots.iter().enumerate() {
        q[*col] = m[i][r].clone();
    }
    Ok(q)
}

/// `(d, p)` with `d` the least common denominator of `q` and `p = d q`.
pub fn ramification(q: &[Q]) -> (i64, Vec<i64>) {
    let d = q
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let p = q
        .iter()
        .map(|x| (x * Q::from_integer(d.clone())).to_integer().to_i64().expect("small exponent"))
        .collect();
    (d.to_i64().expect("small ramification"), p)
}

pub fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

/// Determinant by exact rational elimination.
pub fn det(m: &IntMatrix) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .map(|r| r.iter().map(|x| Q::from_integer(BigInt::from(*x))).collect())
        .collect();
    let mut det = Q::one();
    for col in 0..n {
        let Some(pr) = (col..n).find(|i| !a[*i][col].is_zero()) else {
            return BigInt::zero();
        };
        if pr != col {
            a.swap(pr, col);
            det = -det;
        }
        det *= &a[col][col];
        for i in col + 1..n {
            let f = &a[i][col] / &a[col][col];
            for k in col..n {
                let sub = &f * &a[col][k];
                a[i][k] -= sub;
            }
        }
    }
    det.to_integer()
}

/// Inverse of a unimodular integer matrix.
pub fn inverse_unimodular(m: &IntMatrix) -> Option<IntMatrix> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v: Vec<Q> = r.iter().map(|x| Q::from_integer(BigInt::from(*x))).collect();
            v.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            v
        })
        .collect();
    for col in 0..n {
        let pr = (col..n).find(|i| !a[*i][col].is_zero())?;
        a.swap(pr, col);
        let inv = Q::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for k in 0..2 * n {
                    let sub = &f * &a[col][k];
                    a[i][k] -= sub;
                }
            }
        }
    }
    a.iter()
        .map(|r| {
            r[n..]
                .iter()
                .map(|x| x.is_integer().then(|| x.to_integer().to_i64()).flatten())
                .collect::<Option<Vec<i64>>>()
        })
        .collect()
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

#[derive(Clone)]
struct Node {
    b: IntMatrix,
    c: Vec<i64>,
    vals: Vec<Value>,
    depth: usize,
}

fn goal_index(c: &[i64]) -> Option<usize> {
    let y = c.len() - 1;
    if c[y] != 1 {
        return None;
    }
    let mut found = None;
    for (i, v) in c[..y].iter().enumerate() {
        match *v {
            0 => {}
            -1 if found.is_none() => found = Some(i),
            _ => return None,
        }
    }
    found
}

fn search(
    basis: &BasisSpec,
    x_values: &[Value],
    y_value: &Value,
    d: i64,
    p: &[i64],
    forbid_x_by_y: bool,
    node_cap: usize,
) -> Result<Option<(IntMatrix, usize, usize)>, PlanError> {
    let r = x_values.len();
    let n = r + 1;
    let mut c0: Vec<i64> = p.iter().map(|v| -v).collect();
    c0.push(d);
    let mut vals: Vec<Value> = x_values.to_vec();
    vals.push(y_value.clone());
    let start = Node {
        b: identity(n),
        c: c0,
        vals,
        depth: 0,
    };
    let mut nodes = vec![start];
    let mut heap = BinaryHeap::new();
    let prio = |nd: &Node| nd.depth as i64 + nd.c.iter().map(|v| v.abs()).sum::<i64>();
    heap.push(Reverse((prio(&nodes[0]), 0usize)));
    let mut seen: HashSet<IntMatrix> = HashSet::new();
    seen.insert(nodes[0].b.clone());
    while let Some(Reverse((_, id))) = heap.pop() {
        let node = nodes[id].clone();
        if let Some(i0) = goal_index(&node.c) {
            return Ok(Some((node.b, i0, node.depth)));
        }
        if nodes.len() >= node_cap {
            break;
        }
        for a in 0..n {
            for bb in 0..n {
                if a == bb {
                    continue;
                }
                if forbid_x_by_y && a == r && bb < r {
                    continue;
                }
                if basis.cmp(&node.vals[a], &node.vals[bb])? != Ordering::Less {
                    continue;
                }
                let mut c = node.c.clone();
                c[a] += c[bb];
                if c[r] == 0 {
                    continue;
                }
                let mut b = node.b.clone();
                for row in b.iter_mut() {
                    row[a] += row[bb];
                }
                if !seen.insert(b.clone()) {
                    continue;
                }
                let mut vals = node.vals.clone();
                vals[bb] = vals[bb].sub(&vals[a]).expect("finite values");
                let child = Node {
                    b,
                    c,
                    vals,
                    depth: node.depth + 1,
                };
                let pr = prio(&child);
                nodes.push(child);
                heap.push(Reverse((pr, nodes.len() - 1)));
            }
        }
    }
    Ok(None)
}

/// Plans a package for a dependent parameter of value `y_value`.
pub fn plan_package(
    basis: &BasisSpec,
    x_values: &[Value],
    y_value: &Value,
    node_cap: usize,
) -> Result<PackagePlan, PlanError> {
    let q = rational_relation(x_values, y_value)?;
    let (d, p) = ramification(&q);
    let r = x_values.len();
    let found = match search(basis, x_values, y_value, d, &p, d == 1, node_cap)? {
        Some(f) => Some(f),
        None if d == 1 => search(basis, x_values, y_value, d, &p, false, node_cap)?,
        None => None,
    };
    let (b, i0, steps) = found.ok_or(PlanError::SearchExhausted(node_cap))?;
    let mut c = b.clone();
    for row in c.iter_mut() {
        row[i0] += row[r];
    }
    let c_inv = inverse_unimodular(&c).ok_or(PlanError::SearchExhausted(node_cap))?;
    Ok(PackagePlan {
        d,
        p,
        b,
        c,
        c_inv,
        i0,
        steps: steps + 1,
    })
}

/// Whether the x rows of `c` avoid the last column, as for unramified packages.
pub fn has_block_shape(c: &IntMatrix) -> bool {
    let n = c.len();
    c[..n - 1].iter().all(|row| row[n - 1] == 0) && c[n - 1][n - 1] == 1
}

/// Values of the new independent parameters: `c_inv` applied to the old values.
pub fn transformed_values(plan: &PackagePlan, x_values: &[Value], y_value: &Value) -> Vec<Value> {
    let r = x_values.len();
    let mut old: Vec<&Value> = x_values.iter().collect();
    old.push(y_value);
    (0..r)
        .map(|k| {
            old.iter()
                .enumerate()
                .fold(Value::zero(y_value.coords().map_or(1, |c| c.len())), |acc, (s, v)| {
                    acc.add(&v.scale_int(plan.c_inv[k][s]))
                })
        })
        .collect()
}

/// Sanity data for tests: every entry of `m` is nonnegative.
pub fn is_nonnegative(m: &IntMatrix) -> bool {
    m.iter().all(|r| r.iter().all(|v| !v.is_negative()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuegroup::{qi, AlgebraicReal};

    #[test]
    fn unramified_integer_case() {
        let b = BasisSpec::unit();
        let plan = plan_package(&b, &[Value::int(1)], &Value::int(2), 1000).unwrap();
        assert_eq!((plan.d, plan.p.clone()), (1, vec![2]));
        assert_eq!(plan.c, vec![vec![1, 0], vec![2, 1]]);
        assert_eq!(plan.c_inv[1], vec![-2, 1]);
        assert!(has_block_shape(&plan.c));
    }

    #[test]
    fn ramified_case() {
        let b = BasisSpec::unit();
        let v = Value::rat(crate::valuegroup::q(3, 2));
        let plan = plan_package(&b, &[Value::int(1)], &v, 1000).unwrap();
        assert_eq!(plan.d, 2);
        assert_eq!(plan.p, vec![3]);
        assert_eq!(det(&plan.c), BigInt::one());
        assert_eq!(plan.c_inv[1], vec![-3, 2]);
        assert!(is_nonnegative(&plan.c));
        let nv = transformed_values(&plan, &[Value::int(1)], &v);
        assert_eq!(nv, vec![Value::rat(crate::valuegroup::q(1, 2))]);
    }

    #[test]
    fn irrational_difference() {
        // nu(y) = sqrt2 - 1 with x values (1, sqrt2).
        let b = BasisSpec::new(vec![
            AlgebraicReal::rational(qi(1)),
            AlgebraicReal::sqrt(2).unwrap(),
        ])
        .unwrap();
        let xs = vec![Value::unit(2, 0), Value::unit(2, 1)];
        let y = Value::Finite(vec![qi(-1), qi(1)]);
        let plan = plan_package(&b, &xs, &y, 5000).unwrap();
        assert_eq!(plan.d, 1);
        assert_eq!(plan.p, vec![-1, 1]);
        assert_eq!(det(&plan.c), BigInt::one());
        assert!(is_nonnegative(&plan.c));
        assert_eq!(plan.c_inv[2], vec![1, -1, 1]);
        assert!(has_block_shape(&plan.c));
        for v in transformed_values(&plan, &xs, &y) {
            assert_eq!(b.signum(&v).unwrap(), Ordering::Greater);
        }
    }
}
