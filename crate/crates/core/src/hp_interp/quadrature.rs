//! Gauss-Lobatto and Gauss-Legendre rules on `[-1, 1]`, plus the collapsed
//! (Duffy) rule on the unit triangle.

use crate::error::{Error, Result};
use crate::geometry::Point;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// `(P_k(x), P_k'(x))` by the three-term recurrence.
pub fn legendre(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let kf = k as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_k'(±1) = (±1)^{k+1} k(k+1)/2
        let s = if x > 0.0 || k % 2 == 1 { 1.0 } else { -1.0 };
        s * kf * (kf + 1.0) / 2.0
    } else {
        kf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLobattoRule {
    pub degree: usize,
    /// Ascending, `-1` and `1` included, exactly symmetric.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLobattoRule {
    /// Nodes mapped to `[0, 1]`.
    pub fn unit_nodes(&self) -> Vec<f64> {
        let q = self.degree;
        let mut t: Vec<f64> = self.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect();
        t[0] = 0.0;
        t[q] = 1.0;
        t
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Roots of `P_m` (ascending) by Newton's method from Chebyshev-type guesses.
fn legendre_roots(m: usize) -> Vec<f64> {
    let mut neg = Vec::with_capacity(m / 2);
    for k in 0..m / 2 {
        let mut x = -(std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        neg.push(x);
    }
    mirror(neg, m % 2 == 1)
}

fn mirror(neg: Vec<f64>, with_zero: bool) -> Vec<f64> {
    let mut all = neg.clone();
    if with_zero {
        all.push(0.0);
    }
    all.extend(neg.iter().rev().map(|x| -x));
    all
}

/// Gauss-Lobatto rule with `q + 1` nodes, the roots of `(1 - x²) P_q'(x)`.
///
/// The interior nodes interlace with the roots of `P_q`, which gives a bracket
/// for each; the Newton iteration falls back to bisection whenever a step
/// leaves its bracket.
pub fn gauss_lobatto_rule(q: usize) -> Result<GaussLobattoRule> {
    if q == 0 {
        return Err(Error::Parameter("Gauss-Lobatto degree must be >= 1".into()));
    }
    let brackets = legendre_roots(q);
    let qf = q as f64;
    // P_q'' from the Legendre equation: (1 - x²) P'' = 2x P' - q(q+1) P
    let g = |x: f64| {
        let (p, dp) = legendre(q, x);
        (dp, (2.0 * x * dp - qf * (qf + 1.0) * p) / (1.0 - x * x))
    };
    let mut neg = Vec::new();
    for k in 0..(q - 1) / 2 {
        let (mut lo, mut hi) = (brackets[k], brackets[k + 1]);
        let glo = g(lo).0;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..NEWTON_MAX_ITER {
            let (v, dv) = g(x);
            if v == 0.0 {
                break;
            }
            if (v > 0.0) == (glo > 0.0) {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - v / dv;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let dx = (next - x).abs();
            x = next;
            if dx <= NEWTON_TOL {
                break;
            }
        }
        neg.push(x);
    }
    let mut nodes = vec![-1.0];
    nodes.extend(mirror(neg, q % 2 == 0 && q > 1));
    nodes.push(1.0);
    debug_assert_eq!(nodes.len(), q + 1);
    let weights = nodes
        .iter()
        .map(|&x| {
            let p = legendre(q, x).0;
            2.0 / (qf * (qf + 1.0) * p * p)
        })
        .collect();
    Ok(GaussLobattoRule {
        degree: q,
        nodes,
        weights,
    })
}

/// Gauss-Legendre rule with `m` points on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let nodes = legendre_roots(m);
    let weights = nodes
        .iter()
        .map(|&x| {
            let dp = legendre(m, x).1;
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

/// Quadrature points and weights on a reference cell.
#[derive(Debug, Clone)]
pub struct CellRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Tensor Gauss-Legendre rule with `m` points per direction on `[0,1]²`.
pub fn square_rule(m: usize) -> CellRule {
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            points.push([0.5 * (1.0 + x[i]), 0.5 * (1.0 + x[j])]);
            weights.push(0.25 * w[i] * w[j]);
        }
    }
    CellRule { points, weights }
}

/// Collapsed tensor rule on the unit triangle `(0,0), (1,0), (0,1)`:
/// `(ξ, η) ↦ (ξ(1 - η), η)`, exact for total degree `2m - 2`.
pub fn triangle_rule(m: usize) -> CellRule {
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for j in 0..m {
        let eta = 0.5 * (1.0 + x[j]);
        for i in 0..m {
            let xi = 0.5 * (1.0 + x[i]);
            points.push([xi * (1.0 - eta), eta]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - eta));
        }
    }
    CellRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_small_degrees() {
        let r = gauss_lobatto_rule(1).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 1.0]);
        assert_eq!(r.weights, vec![1.0, 1.0]);

        let r = gauss_lobatto_rule(2).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 0.0, 1.0]);
        for (w, e) in r.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((r.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-15);

        let r = gauss_lobatto_rule(3).unwrap();
        let s = 1.0 / 5f64.sqrt();
        for (x, e) in r.nodes.iter().zip([-1.0, -s, s, 1.0]) {
            assert!((x - e).abs() < 1e-15);
        }
        for (w, e) in r.weights.iter().zip([1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0]) {
            assert!((w - e).abs() < 1e-15);
        }
        // degree 5 exactness
        assert!((r.integrate(|x| x.powi(4)) - 0.4).abs() < 1e-15);
        assert!(r.integrate(|x| x.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn lobatto_rejects_zero() {
        assert!(gauss_lobatto_rule(0).is_err());
    }

    #[test]
    fn lobatto_invariants() {
        for q in 1..=40 {
            let r = gauss_lobatto_rule(q).unwrap();
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "q={q}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for i in 0..=q {
                assert_eq!(r.nodes[i], -r.nodes[q - i]);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            // interior nodes are roots of P_q'
            for &x in &r.nodes[1..q] {
                assert!(legendre(q, x).1.abs() < 1e-10 * (q * q) as f64);
            }
        }
    }

    #[test]
    fn legendre_rule_exactness() {
        for m in 1..20 {
            let (x, w) = gauss_legendre(m);
            for k in 0..2 * m {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((v - exact).abs() < 1e-13, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let m = 6;
        let r = triangle_rule(m);
        for a in 0..=5u32 {
            for b in 0..=(2 * m as u32 - 2 - a) {
                let v: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((v - exact).abs() < 1e-15, "a={a} b={b}");
            }
        }
    }
}
