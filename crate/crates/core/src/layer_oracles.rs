//! Closed-form layer functions used as interpolation targets and as exact
//! solutions for solver checks. All functions live in reference coordinates
//! with the layer attached to `{ỹ = 0}` or to the origin.

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams {
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LayerParams {
    pub fn new(eps: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Parameter(format!("eps must lie in (0,1], got {eps}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Parameter(format!("beta must lie in [0,1), got {beta}")));
        }
        Ok(LayerParams { eps, alpha, beta })
    }
}

/// `e^{-α ỹ/ε}`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryLayerFn {
    pub eps: f64,
    pub alpha: f64,
}

pub fn boundary_layer_fn(p: LayerParams) -> BoundaryLayerFn {
    BoundaryLayerFn { eps: p.eps, alpha: p.alpha }
}

impl BoundaryLayerFn {
    pub fn value(&self, x: Point) -> f64 {
        (-self.alpha * x[1] / self.eps).exp()
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        [0.0, -self.alpha / self.eps * self.value(x)]
    }

    /// `∂_ỹ^k u`.
    pub fn dy(&self, k: u32, x: Point) -> f64 {
        (-self.alpha / self.eps).powi(k as i32) * self.value(x)
    }

    /// `[u_xx, u_xy, u_yy]`.
    pub fn hessian(&self, x: Point) -> [f64; 3] {
        [0.0, 0.0, self.dy(2, x)]
    }
}

fn radius(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// `r̃^{1-β}` with `r̃ = |x̃|`.
#[derive(Debug, Clone, Copy)]
pub struct CornerSingularityFn {
    pub beta: f64,
}

pub fn corner_singularity_fn(beta: f64) -> Result<CornerSingularityFn> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Parameter(format!("beta must lie in [0,1), got {beta}")));
    }
    Ok(CornerSingularityFn { beta })
}

impl CornerSingularityFn {
    pub fn value(&self, x: Point) -> f64 {
        radius(x).powf(1.0 - self.beta)
    }

    pub fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let r = radius(x);
        if r == 0.0 {
            return Err(Error::Singularity);
        }
        let s = (1.0 - self.beta) * r.powf(-self.beta - 1.0);
        Ok([s * x[0], s * x[1]])
    }
}

/// `ε^{β-1} r̃^{1-β} e^{-α r̃/ε}`.
#[derive(Debug, Clone, Copy)]
pub struct CornerLayerFn {
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn corner_layer_fn(p: LayerParams) -> CornerLayerFn {
    CornerLayerFn { eps: p.eps, alpha: p.alpha, beta: p.beta }
}

impl CornerLayerFn {
    pub fn value(&self, x: Point) -> f64 {
        let r = radius(x);
        (r / self.eps).powf(1.0 - self.beta) * (-self.alpha * r / self.eps).exp()
    }

    pub fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let r = radius(x);
        if r == 0.0 {
            return Err(Error::Singularity);
        }
        let v = self.value(x);
        let dr = v * ((1.0 - self.beta) / r - self.alpha / self.eps);
        Ok([dr * x[0] / r, dr * x[1] / r])
    }
}

/// `X(t) = 1 - (e^{-t/ε} + e^{-(1-t)/ε}) / (1 + e^{-1/ε})`, the solution of
/// `-ε² X'' + X = 1` on `(0,1)` with zero boundary values.
#[derive(Debug, Clone, Copy)]
pub struct LayerProfile {
    pub eps: f64,
}

impl LayerProfile {
    fn parts(&self, t: f64) -> (f64, f64, f64) {
        let a = (-t / self.eps).exp();
        let b = (-(1.0 - t) / self.eps).exp();
        let d = 1.0 + (-1.0 / self.eps).exp();
        (a, b, d)
    }

    pub fn value(&self, t: f64) -> f64 {
        let (a, b, d) = self.parts(t);
        1.0 - (a + b) / d
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (a, b, d) = self.parts(t);
        (a - b) / (d * self.eps)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let (a, b, d) = self.parts(t);
        -(a + b) / (d * self.eps * self.eps)
    }
}

/// Exact solution `u = X(x) X(y)` of `-ε²Δu + u = f` on `(0,1)²` with
/// `f = X(x) + X(y) - X(x) X(y)`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSolution {
    pub eps: f64,
    pub profile: LayerProfile,
}

pub fn manufactured_layer_solution(eps: f64) -> Result<ManufacturedSolution> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1], got {eps}")));
    }
    Ok(ManufacturedSolution { eps, profile: LayerProfile { eps } })
}

impl ManufacturedSolution {
    pub fn u(&self, x: Point) -> f64 {
        self.profile.value(x[0]) * self.profile.value(x[1])
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let (px, py) = (self.profile.value(x[0]), self.profile.value(x[1]));
        [self.profile.derivative(x[0]) * py, px * self.profile.derivative(x[1])]
    }

    pub fn laplacian(&self, x: Point) -> f64 {
        let (px, py) = (self.profile.value(x[0]), self.profile.value(x[1]));
        self.profile.second_derivative(x[0]) * py + px * self.profile.second_derivative(x[1])
    }

    pub fn f(&self, x: Point) -> f64 {
        let (px, py) = (self.profile.value(x[0]), self.profile.value(x[1]));
        px + py - px * py
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(f: impl Fn(Point) -> f64, x: Point) -> [f64; 2] {
        let h = 1e-6;
        [
            (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h),
            (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h),
        ]
    }

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        let n = a[0].hypot(a[1]).max(1.0);
        (a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-6 * n
    }

    #[test]
    fn boundary_layer_values() {
        let bl = boundary_layer_fn(LayerParams::new(0.01, 1.0, 0.0).unwrap());
        assert_eq!(bl.value([0.3, 0.0]), 1.0);
        assert!((bl.value([0.0, 0.04605]) - 0.0100).abs() < 1e-5);
        assert!((bl.gradient([0.5, 0.0])[1] + 100.0).abs() < 1e-12);
        for k in 0..6 {
            let y: f64 = 0.013;
            let exact = (1.0f64 / 0.01).powi(k) * (-y / 0.01).exp();
            assert!((bl.dy(k as u32, [0.0, y]).abs() - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn corner_singularity_values() {
        let s0 = corner_singularity_fn(0.0).unwrap();
        assert!((s0.value([0.3, 0.4]) - 0.5).abs() < 1e-15);
        let s = corner_singularity_fn(0.5).unwrap();
        assert!((s.value([0.25, 0.0]) - 0.5).abs() < 1e-15);
        let g = s.gradient([1e-4, 0.0]).unwrap();
        assert!((g[0].hypot(g[1]) - 50.0).abs() < 1e-9);
        assert!(matches!(s.gradient([0.0, 0.0]), Err(Error::Singularity)));
        assert!(corner_singularity_fn(1.0).is_err());
    }

    #[test]
    fn corner_layer_values() {
        let c = corner_layer_fn(LayerParams::new(0.2, 1.0, 0.0).unwrap());
        assert!((c.value([0.2, 0.0]) - (-1f64).exp()).abs() < 1e-15);
        let c = corner_layer_fn(LayerParams::new(0.1, 2.0, 0.5).unwrap());
        assert!((c.value([0.0, 0.1]) - (-2f64).exp()).abs() < 1e-15);
        assert!(c.value([1e-12, 0.0]) < 1e-5);
        assert_eq!(c.value([0.0, 0.0]), 0.0);
        assert!(c.gradient([0.0, 0.0]).is_err());
    }

    #[test]
    fn profile_values() {
        let m = manufactured_layer_solution(0.1).unwrap();
        let half = m.profile.value(0.5);
        let expect = 1.0 - 2.0 * (-5f64).exp() / (1.0 + (-10f64).exp());
        assert!((half - expect).abs() < 1e-15);
        assert!((half - 0.986525).abs() < 1e-6);
        assert!((m.u([0.5, 0.5]) - 0.973231).abs() < 1e-6);
        for t in [0.0, 0.3, 1.0] {
            assert!(m.u([0.0, t]).abs() < 1e-15 && m.u([t, 1.0]).abs() < 1e-15);
        }
    }

    #[test]
    fn tiny_eps_is_finite() {
        let m = manufactured_layer_solution(1e-8).unwrap();
        for t in [0.0, 1e-9, 0.5, 1.0] {
            assert!(m.u([t, 0.5]).is_finite());
            assert!(m.gradient([t, 0.5])[0].is_finite());
        }
    }

    #[test]
    fn manufactured_residual_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let m = manufactured_layer_solution(eps).unwrap();
            for _ in 0..10_000 {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                let r = -eps * eps * m.laplacian(x) + m.u(x) - m.f(x);
                assert!(r.abs() < 1e-10, "eps={eps}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bl = boundary_layer_fn(LayerParams::new(0.3, 1.5, 0.0).unwrap());
        let cs = corner_singularity_fn(0.5).unwrap();
        let cl = corner_layer_fn(LayerParams::new(0.5, 1.0, 0.3).unwrap());
        let m = manufactured_layer_solution(0.2).unwrap();
        for _ in 0..200 {
            let x = [0.05 + 0.9 * rng.gen::<f64>(), 0.05 + 0.9 * rng.gen::<f64>()];
            assert!(close(bl.gradient(x), fd_grad(|p| bl.value(p), x)));
            assert!(close(cs.gradient(x).unwrap(), fd_grad(|p| cs.value(p), x)));
            assert!(close(cl.gradient(x).unwrap(), fd_grad(|p| cl.value(p), x)));
            assert!(close(m.gradient(x), fd_grad(|p| m.u(p), x)));
        }
    }
}
