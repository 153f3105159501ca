//! Univariate Lagrange interpolation in barycentric form.

use crate::error::Result;

use super::quadrature::gauss_lobatto_rule;

/// Lagrange basis on a fixed set of distinct nodes.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    /// `diff[m][j] = l_j'(x_m)`.
    diff: Vec<Vec<f64>>,
}

impl Lagrange1d {
    pub fn new(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                1.0 / (0..n)
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product::<f64>()
            })
            .collect();
        let mut diff = vec![vec![0.0; n]; n];
        for m in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != m {
                    diff[m][j] = (bary[j] / bary[m]) / (nodes[m] - nodes[j]);
                    s += diff[m][j];
                }
            }
            diff[m][m] = -s;
        }
        Lagrange1d { nodes, bary, diff }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All basis values `l_j(x)`.
    pub fn values(&self, x: f64, out: &mut [f64]) {
        if let Some(m) = self.nodes.iter().position(|&t| t == x) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[m] = 1.0;
            return;
        }
        let mut s = 0.0;
        for j in 0..self.nodes.len() {
            out[j] = self.bary[j] / (x - self.nodes[j]);
            s += out[j];
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    /// All basis values and derivatives. The derivative of the interpolant of
    /// `l_j` has nodal values `diff[·][j]`, so `l_j' = Σ_m diff[m][j] l_m`.
    pub fn values_and_derivatives(&self, x: f64, val: &mut [f64], der: &mut [f64]) {
        self.values(x, val);
        for j in 0..self.nodes.len() {
            der[j] = (0..self.nodes.len()).map(|m| self.diff[m][j] * val[m]).sum();
        }
    }

    pub fn eval(&self, coeffs: &[f64], x: f64) -> f64 {
        let mut v = vec![0.0; self.len()];
        self.values(x, &mut v);
        v.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn eval_derivative(&self, coeffs: &[f64], x: f64) -> f64 {
        let n = self.len();
        let (mut v, mut d) = (vec![0.0; n], vec![0.0; n]);
        self.values_and_derivatives(x, &mut v, &mut d);
        d.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Degree-`q` Gauss-Lobatto interpolant of a function on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Interpolant1d {
    pub basis: Lagrange1d,
    pub values: Vec<f64>,
}

impl Interpolant1d {
    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.basis.eval(&self.values, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.basis.eval_derivative(&self.values, x)
    }
}

pub fn interp_1d(f: impl Fn(f64) -> f64, q: usize) -> Result<Interpolant1d> {
    let rule = gauss_lobatto_rule(q)?;
    let values = rule.nodes.iter().map(|&x| f(x)).collect();
    Ok(Interpolant1d {
        basis: Lagrange1d::new(rule.nodes),
        values,
    })
}

/// `max_x Σ_i |l_i(x)|` over `grid` equispaced points of `[-1, 1]`.
pub fn lebesgue_constant_on_grid(q: usize, grid: usize) -> Result<f64> {
    let rule = gauss_lobatto_rule(q)?;
    let basis = Lagrange1d::new(rule.nodes);
    let mut v = vec![0.0; q + 1];
    let mut max: f64 = 0.0;
    for k in 0..grid {
        let x = -1.0 + 2.0 * k as f64 / (grid - 1) as f64;
        basis.values(x, &mut v);
        max = max.max(v.iter().map(|t| t.abs()).sum());
    }
    Ok(max)
}

/// Lebesgue constant of Gauss-Lobatto interpolation, estimated on 10⁵ points.
pub fn lebesgue_constant(q: usize) -> Result<f64> {
    lebesgue_constant_on_grid(q, 100_001)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials() {
        for q in 1..=12 {
            let p = |x: f64| (0..=q).map(|k| (k as f64 + 1.0) * x.powi(k as i32) / 3.0).sum::<f64>();
            let dp = |x: f64| {
                (1..=q)
                    .map(|k| (k as f64 + 1.0) * k as f64 * x.powi(k as i32 - 1) / 3.0)
                    .sum::<f64>()
            };
            let i = interp_1d(p, q).unwrap();
            for k in 0..=50 {
                let x = -1.0 + k as f64 / 25.0;
                assert!((i.eval(x) - p(x)).abs() < 1e-12, "q={q}");
                assert!((i.derivative(x) - dp(x)).abs() < 1e-10 * (q * q) as f64, "q={q}");
            }
        }
    }

    #[test]
    fn abs_at_degree_two_is_x_squared() {
        let i = interp_1d(f64::abs, 2).unwrap();
        for k in 0..=20 {
            let x = -1.0 + k as f64 / 10.0;
            assert!((i.eval(x) - x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_layer_error_against_dense_samples() {
        // exp(-(1+x)/ε), ε = 0.1, q = 8: the remainder is
        // f^{(q+1)}(ξ) ω(x) / (q+1)! with |f^{(q+1)}| ≤ ε^{-(q+1)}
        let eps = 0.1;
        let f = |x: f64| (-(1.0 + x) / eps).exp();
        let q = 8;
        let i = interp_1d(f, q).unwrap();
        let nodes = i.basis.nodes().to_vec();
        let grid: Vec<f64> = (0..=20_000).map(|k| -1.0 + k as f64 / 10_000.0).collect();
        let err = grid.iter().map(|&x| (i.eval(x) - f(x)).abs()).fold(0.0, f64::max);
        let omega = grid
            .iter()
            .map(|&x| nodes.iter().map(|t| x - t).product::<f64>().abs())
            .fold(0.0, f64::max);
        let fact: f64 = (1..=q + 1).map(|k| k as f64).product();
        let bound = eps.powi(-(q as i32 + 1)) / fact * omega;
        assert!(err > 1e-6 && err <= bound, "err = {err}, bound = {bound}");
    }

    #[test]
    fn lebesgue_small() {
        assert!((lebesgue_constant(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((lebesgue_constant(2).unwrap() - 1.25).abs() < 1e-9);
    }
}
