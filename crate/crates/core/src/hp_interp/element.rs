//! Nodal bases on the reference square `[0,1]²` and the reference triangle
//! with vertices `(0,0), (1,0), (0,1)`.
//!
//! Local node order is the same for both shapes: vertices (counterclockwise),
//! then `q - 1` nodes per edge running from the edge's first vertex, then
//! interior nodes. Edge nodes sit at the Gauss-Lobatto points of the edge, so
//! traces of neighbouring elements agree and the interpolants are
//! `H¹`-conforming.
//!
//! The triangle nodes are the Blyth-Pozrikidis points built from the 1D
//! Gauss-Lobatto points; the basis is obtained by inverting a Vandermonde
//! matrix in the orthonormal Dubiner basis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Point;

use super::lagrange::Lagrange1d;
use super::quadrature::gauss_lobatto_rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Triangle,
    Rectangle,
}

impl Shape {
    pub fn num_vertices(self) -> usize {
        match self {
            Shape::Triangle => 3,
            Shape::Rectangle => 4,
        }
    }

    pub fn reference_vertices(self) -> &'static [Point] {
        match self {
            Shape::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            Shape::Rectangle => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    pub fn contains(self, x: Point, tol: f64) -> bool {
        match self {
            Shape::Triangle => x[0] >= -tol && x[1] >= -tol && x[0] + x[1] <= 1.0 + tol,
            Shape::Rectangle => {
                x[0] >= -tol && x[1] >= -tol && x[0] <= 1.0 + tol && x[1] <= 1.0 + tol
            }
        }
    }
}

#[derive(Debug)]
enum Kind {
    Tensor {
        lag: Lagrange1d,
        /// `(i, j)` grid index of every local node.
        ij: Vec<(usize, usize)>,
    },
    Simplex {
        /// `coef[(m, k)]`: coefficient of Dubiner mode `m` in nodal function `k`.
        coef: DMatrix<f64>,
    },
}

/// Nodal Lagrange basis of degree `q` on a reference cell.
#[derive(Debug)]
pub struct ReferenceBasis {
    pub shape: Shape,
    pub q: usize,
    nodes: Vec<Point>,
    kind: Kind,
}

/// Local `(i, j)` grid indices of the tensor nodes in canonical order.
fn tensor_order(q: usize) -> Vec<(usize, usize)> {
    let mut ij = vec![(0, 0), (q, 0), (q, q), (0, q)];
    ij.extend((1..q).map(|i| (i, 0)));
    ij.extend((1..q).map(|j| (q, j)));
    ij.extend((1..q).rev().map(|i| (i, q)));
    ij.extend((1..q).rev().map(|j| (0, j)));
    for j in 1..q {
        for i in 1..q {
            ij.push((i, j));
        }
    }
    ij
}

/// Barycentric index triples `(i0, i1, i2)`, `i0 + i1 + i2 = q`, in canonical order.
fn simplex_order(q: usize) -> Vec<[usize; 3]> {
    let mut t = vec![[q, 0, 0], [0, q, 0], [0, 0, q]];
    t.extend((1..q).map(|k| [q - k, k, 0]));
    t.extend((1..q).map(|k| [0, q - k, k]));
    t.extend((1..q).map(|k| [k, 0, q - k]));
    for i2 in 1..q {
        for i1 in 1..q - i2 {
            t.push([q - i1 - i2, i1, i2]);
        }
    }
    t
}

impl ReferenceBasis {
    pub fn new(shape: Shape, q: usize) -> Result<Self> {
        let gl = gauss_lobatto_rule(q)?.unit_nodes();
        match shape {
            Shape::Rectangle => {
                let ij = tensor_order(q);
                let nodes = ij.iter().map(|&(i, j)| [gl[i], gl[j]]).collect();
                Ok(ReferenceBasis {
                    shape,
                    q,
                    nodes,
                    kind: Kind::Tensor {
                        lag: Lagrange1d::new(gl),
                        ij,
                    },
                })
            }
            Shape::Triangle => {
                let nodes: Vec<Point> = simplex_order(q)
                    .iter()
                    .map(|&[i0, i1, i2]| {
                        let (v0, v1, v2) = (gl[i0], gl[i1], gl[i2]);
                        let l1 = (1.0 + 2.0 * v1 - v0 - v2) / 3.0;
                        let l2 = (1.0 + 2.0 * v2 - v0 - v1) / 3.0;
                        // exact values on the edges
                        match (i0, i1, i2) {
                            (_, _, 0) => [v1, 0.0],
                            (0, _, _) => [1.0 - v2, v2],
                            (_, 0, _) => [0.0, 1.0 - v0],
                            _ => [l1, l2],
                        }
                    })
                    .collect();
                let n = nodes.len();
                let mut v = DMatrix::zeros(n, n);
                let mut row = vec![0.0; n];
                for (k, p) in nodes.iter().enumerate() {
                    dubiner(q, *p, &mut row, None);
                    for m in 0..n {
                        v[(k, m)] = row[m];
                    }
                }
                let inv = v.try_inverse().ok_or_else(|| {
                    Error::Consistency(format!("singular triangle Vandermonde matrix for q = {q}"))
                })?;
                Ok(ReferenceBasis {
                    shape,
                    q,
                    nodes,
                    kind: Kind::Simplex { coef: inv },
                })
            }
        }
    }

    /// Shared instance per `(shape, q)`.
    pub fn cached(shape: Shape, q: usize) -> Result<Arc<ReferenceBasis>> {
        static CACHE: OnceLock<Mutex<HashMap<(Shape, usize), Arc<ReferenceBasis>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&(shape, q)) {
            return Ok(b.clone());
        }
        let b = Arc::new(ReferenceBasis::new(shape, q)?);
        cache.lock().unwrap().insert((shape, q), b.clone());
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Local index of the `m`-th node (`1 ≤ m < q`) on local edge `e`.
    pub fn edge_node(&self, e: usize, m: usize) -> usize {
        self.shape.num_vertices() + e * (self.q - 1) + (m - 1)
    }

    pub fn num_interior(&self) -> usize {
        self.len() - self.shape.num_vertices() * self.q
    }

    pub fn values(&self, x: Point, out: &mut [f64]) {
        match &self.kind {
            Kind::Tensor { lag, ij } => {
                let n1 = lag.len();
                let mut vx = vec![0.0; n1];
                let mut vy = vec![0.0; n1];
                lag.values(x[0], &mut vx);
                lag.values(x[1], &mut vy);
                for (k, &(i, j)) in ij.iter().enumerate() {
                    out[k] = vx[i] * vy[j];
                }
            }
            Kind::Simplex { coef } => {
                let n = self.len();
                let mut psi = vec![0.0; n];
                dubiner(self.q, x, &mut psi, None);
                for k in 0..n {
                    out[k] = (0..n).map(|m| coef[(m, k)] * psi[m]).sum();
                }
            }
        }
    }

    /// Values and reference gradients.
    pub fn values_and_gradients(&self, x: Point, val: &mut [f64], grad: &mut [[f64; 2]]) {
        match &self.kind {
            Kind::Tensor { lag, ij } => {
                let n1 = lag.len();
                let (mut vx, mut dx) = (vec![0.0; n1], vec![0.0; n1]);
                let (mut vy, mut dy) = (vec![0.0; n1], vec![0.0; n1]);
                lag.values_and_derivatives(x[0], &mut vx, &mut dx);
                lag.values_and_derivatives(x[1], &mut vy, &mut dy);
                for (k, &(i, j)) in ij.iter().enumerate() {
                    val[k] = vx[i] * vy[j];
                    grad[k] = [dx[i] * vy[j], vx[i] * dy[j]];
                }
            }
            Kind::Simplex { coef } => {
                let n = self.len();
                let mut psi = vec![0.0; n];
                let mut dpsi = vec![[0.0; 2]; n];
                dubiner(self.q, x, &mut psi, Some(&mut dpsi));
                for k in 0..n {
                    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                    for m in 0..n {
                        let c = coef[(m, k)];
                        v += c * psi[m];
                        gx += c * dpsi[m][0];
                        gy += c * dpsi[m][1];
                    }
                    val[k] = v;
                    grad[k] = [gx, gy];
                }
            }
        }
    }

    /// Tensor grid indices, `None` for triangles.
    pub fn tensor_indices(&self) -> Option<(&Lagrange1d, &[(usize, usize)])> {
        match &self.kind {
            Kind::Tensor { lag, ij } => Some((lag, ij)),
            Kind::Simplex { .. } => None,
        }
    }
}

fn gamma_int(n: usize) -> f64 {
    // Γ(n) for positive integers
    (1..n).map(|k| k as f64).product()
}

/// Normalized Jacobi polynomials `P_0..=P_n^{(α, 0)}(x)`.
fn jacobi_all(x: f64, alpha: usize, n: usize) -> Vec<f64> {
    let a = alpha as f64;
    let mut p = Vec::with_capacity(n + 1);
    let gamma0 = 2f64.powf(a + 1.0) / (a + 1.0) * gamma_int(alpha + 1) / gamma_int(alpha + 1);
    p.push(1.0 / gamma0.sqrt());
    if n == 0 {
        return p;
    }
    let gamma1 = (a + 1.0) / (a + 3.0) * gamma0;
    p.push(((a + 2.0) * x / 2.0 + a / 2.0) / gamma1.sqrt());
    let mut aold = 2.0 / (2.0 + a) * ((a + 1.0) / (a + 3.0)).sqrt();
    for i in 1..n {
        let i_f = i as f64;
        let h1 = 2.0 * i_f + a;
        let anew = 2.0 / (h1 + 2.0)
            * ((i_f + 1.0) * (i_f + 1.0 + a) * (i_f + 1.0 + a) * (i_f + 1.0) / (h1 + 1.0) / (h1 + 3.0))
                .sqrt();
        let bnew = -(a * a) / h1 / (h1 + 2.0);
        let next = (-aold * p[i - 1] + (x - bnew) * p[i]) / anew;
        p.push(next);
        aold = anew;
    }
    p
}

/// Derivatives of the normalized Jacobi polynomials `P_0..=P_n^{(α, 0)}`.
fn jacobi_deriv_all(x: f64, alpha: usize, n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n + 1];
    if n == 0 {
        return d;
    }
    // d/dx P_k^{(α,β)} = sqrt(k(k+α+β+1)) P_{k-1}^{(α+1,β+1)}
    let shifted = jacobi_all_ab(x, alpha + 1, 1, n - 1);
    for k in 1..=n {
        let kf = k as f64;
        d[k] = (kf * (kf + alpha as f64 + 1.0)).sqrt() * shifted[k - 1];
    }
    d
}

/// Normalized Jacobi polynomials with general integer `(α, β)`.
fn jacobi_all_ab(x: f64, alpha: usize, beta: usize, n: usize) -> Vec<f64> {
    if beta == 0 {
        return jacobi_all(x, alpha, n);
    }
    let (a, b) = (alpha as f64, beta as f64);
    let mut p = Vec::with_capacity(n + 1);
    let gamma0 = 2f64.powf(a + b + 1.0) / (a + b + 1.0) * gamma_int(alpha + 1) * gamma_int(beta + 1)
        / gamma_int(alpha + beta + 1);
    p.push(1.0 / gamma0.sqrt());
    if n == 0 {
        return p;
    }
    let gamma1 = (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
    p.push(((a + b + 2.0) * x / 2.0 + (a - b) / 2.0) / gamma1.sqrt());
    let mut aold = 2.0 / (2.0 + a + b) * ((a + 1.0) * (b + 1.0) / (a + b + 3.0)).sqrt();
    for i in 1..n {
        let i_f = i as f64;
        let h1 = 2.0 * i_f + a + b;
        let anew = 2.0 / (h1 + 2.0)
            * ((i_f + 1.0) * (i_f + 1.0 + a + b) * (i_f + 1.0 + a) * (i_f + 1.0 + b)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let bnew = -(a * a - b * b) / h1 / (h1 + 2.0);
        let next = (-aold * p[i - 1] + (x - bnew) * p[i]) / anew;
        p.push(next);
        aold = anew;
    }
    p
}

/// Orthonormal Dubiner basis on the unit triangle (modes ordered by `(i, j)`,
/// `i + j ≤ q`), with optional gradients with respect to `(x, y)`.
fn dubiner(q: usize, x: Point, out: &mut [f64], mut grad: Option<&mut [[f64; 2]]>) {
    // collapsed coordinates on the (-1,-1), (1,-1), (-1,1) triangle
    let r = 2.0 * x[0] - 1.0;
    let s = 2.0 * x[1] - 1.0;
    let a = if (1.0 - s).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    let b = s;
    let pa = jacobi_all(a, 0, q);
    let dpa = jacobi_deriv_all(a, 0, q);
    let half = 0.5 * (1.0 - b);
    let mut m = 0;
    for i in 0..=q {
        let pb = jacobi_all(b, 2 * i + 1, q - i);
        let dpb = jacobi_deriv_all(b, 2 * i + 1, q - i);
        let scale = 2f64.powf(i as f64 + 0.5);
        for j in 0..=(q - i) {
            out[m] = scale * pa[i] * pb[j] * half.powi(i as i32);
            if let Some(g) = grad.as_deref_mut() {
                let hm1 = if i > 0 { half.powi(i as i32 - 1) } else { 1.0 };
                let mut dr = dpa[i] * pb[j];
                if i > 0 {
                    dr *= hm1;
                }
                let mut ds = dpa[i] * pb[j] * 0.5 * (1.0 + a);
                if i > 0 {
                    ds *= hm1;
                }
                let mut tmp = dpb[j] * half.powi(i as i32);
                if i > 0 {
                    tmp -= 0.5 * i as f64 * pb[j] * hm1;
                }
                ds += pa[i] * tmp;
                // d/dx = 2 d/dr, d/dy = 2 d/ds
                g[m] = [2.0 * scale * dr, 2.0 * scale * ds];
            }
            m += 1;
        }
    }
}

/// A polynomial on a reference cell in nodal form.
#[derive(Debug, Clone)]
pub struct PolyOnElement {
    pub basis: Arc<ReferenceBasis>,
    pub values: Vec<f64>,
}

impl PolyOnElement {
    pub fn shape(&self) -> Shape {
        self.basis.shape
    }

    pub fn degree(&self) -> usize {
        self.basis.q
    }

    pub fn eval(&self, x: Point) -> f64 {
        let mut v = vec![0.0; self.basis.len()];
        self.basis.values(x, &mut v);
        v.iter().zip(&self.values).map(|(a, b)| a * b).sum()
    }

    /// Value and reference gradient.
    pub fn eval_grad(&self, x: Point) -> (f64, [f64; 2]) {
        let n = self.basis.len();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.basis.values_and_gradients(x, &mut v, &mut g);
        let mut out = (0.0, [0.0; 2]);
        for k in 0..n {
            out.0 += v[k] * self.values[k];
            out.1[0] += g[k][0] * self.values[k];
            out.1[1] += g[k][1] * self.values[k];
        }
        out
    }
}

fn interp_on(shape: Shape, f: impl Fn(Point) -> f64, q: usize) -> Result<PolyOnElement> {
    let basis = ReferenceBasis::cached(shape, q)?;
    let values = basis.nodes().iter().map(|&p| f(p)).collect();
    Ok(PolyOnElement { basis, values })
}

/// Tensor-product Gauss-Lobatto interpolant on `[0,1]²`.
pub fn interp_square(f: impl Fn(Point) -> f64, q: usize) -> Result<PolyOnElement> {
    interp_on(Shape::Rectangle, f, q)
}

/// `ℙ_q` interpolant on the unit triangle whose edge traces are the
/// Gauss-Lobatto interpolants of the edge traces of `f`.
pub fn interp_triangle(f: impl Fn(Point) -> f64, q: usize) -> Result<PolyOnElement> {
    interp_on(Shape::Triangle, f, q)
}

/// Reference-cell sample points on a uniform grid with `n + 1` points per side.
pub fn sample_grid(shape: Shape, n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    let mut pts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if shape == Shape::Triangle && i + j > n {
                continue;
            }
            pts.push([i as f64 * h, j as f64 * h]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp_interp::lagrange::interp_1d;

    #[test]
    fn node_counts_and_layout() {
        for q in 1..=8 {
            let r = ReferenceBasis::new(Shape::Rectangle, q).unwrap();
            assert_eq!(r.len(), (q + 1) * (q + 1));
            assert_eq!(r.num_interior(), (q - 1) * (q - 1));
            let t = ReferenceBasis::new(Shape::Triangle, q).unwrap();
            assert_eq!(t.len(), (q + 1) * (q + 2) / 2);
            assert_eq!(t.num_interior(), q.saturating_sub(1) * q.saturating_sub(2) / 2);
            for b in [&r, &t] {
                let nv = b.shape.num_vertices();
                for (k, v) in b.shape.reference_vertices().iter().enumerate() {
                    assert_eq!(b.nodes()[k], *v);
                }
                // edge nodes lie on their edge, at increasing distance from the start
                for e in 0..nv {
                    let a = b.shape.reference_vertices()[e];
                    let c = b.shape.reference_vertices()[(e + 1) % nv];
                    let mut last = 0.0;
                    for m in 1..q {
                        let p = b.nodes()[b.edge_node(e, m)];
                        let t = crate::geometry::dist(p, a) / crate::geometry::dist(c, a);
                        assert!(crate::geometry::point_segment_dist(p, a, c) < 1e-15);
                        assert!(t > last);
                        last = t;
                    }
                }
            }
        }
    }

    #[test]
    fn kronecker_property() {
        for shape in [Shape::Triangle, Shape::Rectangle] {
            for q in 1..=10 {
                let b = ReferenceBasis::new(shape, q).unwrap();
                let mut v = vec![0.0; b.len()];
                for (k, &p) in b.nodes().iter().enumerate() {
                    b.values(p, &mut v);
                    for (m, &x) in v.iter().enumerate() {
                        let e = if m == k { 1.0 } else { 0.0 };
                        assert!((x - e).abs() < 1e-10, "{shape:?} q={q}");
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for shape in [Shape::Triangle, Shape::Rectangle] {
            let b = ReferenceBasis::new(shape, 5).unwrap();
            let n = b.len();
            let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
            let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
            for p in [[0.2, 0.3], [0.11, 0.57], [0.6, 0.05]] {
                b.values_and_gradients(p, &mut v, &mut g);
                for d in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[d] += h;
                    pm[d] -= h;
                    b.values(pp, &mut vp);
                    b.values(pm, &mut vm);
                    for k in 0..n {
                        let fd = (vp[k] - vm[k]) / (2.0 * h);
                        assert!((fd - g[k][d]).abs() < 1e-6 * (1.0 + fd.abs()), "{shape:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_trace_is_gauss_lobatto_interpolant() {
        for q in 1..=8 {
            let f = |p: Point| p[0].powi(q as i32 + 1) + (p[1] * 3.0).sin();
            let pi = interp_triangle(f, q).unwrap();
            let edge = interp_1d(|x| f([0.5 * (1.0 + x), 0.0]), q).unwrap();
            for k in 0..=40 {
                let t = k as f64 / 40.0;
                assert!((pi.eval([t, 0.0]) - edge.eval(2.0 * t - 1.0)).abs() < 1e-11, "q={q}");
            }
            // hypotenuse, parametrized from (1,0) to (0,1)
            let hyp = interp_1d(|x| { let t = 0.5 * (1.0 + x); f([1.0 - t, t]) }, q).unwrap();
            for k in 0..=40 {
                let t = k as f64 / 40.0;
                assert!((pi.eval([1.0 - t, t]) - hyp.eval(2.0 * t - 1.0)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn square_error_is_one_dimensional() {
        // x^{q+1}: the error is the 1D remainder, constant in y
        for q in 1..=6 {
            let pi = interp_square(|p| p[0].powi(q as i32 + 1), q).unwrap();
            let one_d = interp_1d(|x| (0.5 * (1.0 + x)).powi(q as i32 + 1), q).unwrap();
            for i in 0..=10 {
                let x = i as f64 / 10.0;
                let e1 = x.powi(q as i32 + 1) - one_d.eval(2.0 * x - 1.0);
                for j in 0..=10 {
                    let y = j as f64 / 10.0;
                    let e2 = x.powi(q as i32 + 1) - pi.eval([x, y]);
                    assert!((e1 - e2).abs() < 1e-13);
                }
            }
        }
    }
}
