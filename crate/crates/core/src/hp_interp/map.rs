//! Element maps from the reference cells to straight-sided physical cells.

use crate::error::{Error, Result};
use crate::geometry::{Cell, Point};

use super::element::Shape;

/// Affine map of the unit triangle or bilinear map of `[0,1]²`; node order
/// matches [`Shape::reference_vertices`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementMap {
    Affine([Point; 3]),
    Bilinear([Point; 4]),
}

const INVERSE_TOL: f64 = 1e-12;

impl ElementMap {
    pub fn from_cell(cell: &Cell, nodes: &[Point]) -> Self {
        match *cell {
            Cell::Triangle([a, b, c]) => ElementMap::Affine([nodes[a], nodes[b], nodes[c]]),
            Cell::Rectangle([a, b, c, d]) => {
                ElementMap::Bilinear([nodes[a], nodes[b], nodes[c], nodes[d]])
            }
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            ElementMap::Affine(_) => Shape::Triangle,
            ElementMap::Bilinear(_) => Shape::Rectangle,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        match self {
            ElementMap::Affine(p) => p,
            ElementMap::Bilinear(p) => p,
        }
    }

    pub fn apply(&self, xi: Point) -> Point {
        match self {
            ElementMap::Affine([p0, p1, p2]) => [
                p0[0] + (p1[0] - p0[0]) * xi[0] + (p2[0] - p0[0]) * xi[1],
                p0[1] + (p1[1] - p0[1]) * xi[0] + (p2[1] - p0[1]) * xi[1],
            ],
            ElementMap::Bilinear(p) => {
                let (s, t) = (xi[0], xi[1]);
                let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
                let mut x = [0.0; 2];
                for k in 0..4 {
                    x[0] += w[k] * p[k][0];
                    x[1] += w[k] * p[k][1];
                }
                x
            }
        }
    }

    /// `J[i][j] = ∂x_i/∂ξ_j`.
    pub fn jacobian(&self, xi: Point) -> [[f64; 2]; 2] {
        match self {
            ElementMap::Affine([p0, p1, p2]) => [
                [p1[0] - p0[0], p2[0] - p0[0]],
                [p1[1] - p0[1], p2[1] - p0[1]],
            ],
            ElementMap::Bilinear(p) => {
                let (s, t) = (xi[0], xi[1]);
                let ds = [-(1.0 - t), 1.0 - t, t, -t];
                let dt = [-(1.0 - s), -s, s, 1.0 - s];
                let mut j = [[0.0; 2]; 2];
                for k in 0..4 {
                    for i in 0..2 {
                        j[i][0] += ds[k] * p[k][i];
                        j[i][1] += dt[k] * p[k][i];
                    }
                }
                j
            }
        }
    }

    pub fn det(&self, xi: Point) -> f64 {
        let j = self.jacobian(xi);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Physical gradient from a reference gradient: `J^{-T} ĝ`.
    pub fn push_gradient(&self, xi: Point, g: [f64; 2]) -> [f64; 2] {
        let j = self.jacobian(xi);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / det,
        ]
    }

    /// Reference coordinates of `x` by Newton's method (exact for affine maps).
    pub fn inverse(&self, x: Point) -> Result<Point> {
        let scale = crate::geometry::diameter(self.vertices());
        // coordinates far from the origin cannot resolve more than a few ulps
        let floor = 8.0 * f64::EPSILON * x[0].abs().max(x[1].abs());
        let tol = (INVERSE_TOL * scale).max(floor);
        let mut xi = match self {
            ElementMap::Affine(_) => [1.0 / 3.0, 1.0 / 3.0],
            ElementMap::Bilinear(_) => [0.5, 0.5],
        };
        for _ in 0..50 {
            let y = self.apply(xi);
            let r = [x[0] - y[0], x[1] - y[1]];
            if r[0].hypot(r[1]) <= tol {
                return Ok(xi);
            }
            let j = self.jacobian(xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det <= 0.0 {
                return Err(Error::Geometry { element: usize::MAX, det });
            }
            xi[0] += (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            xi[1] += (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        }
        Err(Error::Location { x: x[0], y: x[1] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_round_trip() {
        let m = ElementMap::Affine([[1.0, 1.0], [3.0, 1.5], [1.2, 2.0]]);
        for xi in [[0.1, 0.2], [0.5, 0.5], [0.0, 1.0]] {
            let back = m.inverse(m.apply(xi)).unwrap();
            assert!((back[0] - xi[0]).abs() < 1e-12 && (back[1] - xi[1]).abs() < 1e-12);
        }
        assert!((m.det([0.0, 0.0]) - (2.0 * 1.0 - 0.2 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn bilinear_round_trip_and_gradient() {
        let m = ElementMap::Bilinear([[0.0, 0.0], [2.0, 0.1], [2.5, 1.5], [-0.2, 1.0]]);
        for xi in [[0.1, 0.2], [0.9, 0.7], [0.3, 1.0]] {
            let back = m.inverse(m.apply(xi)).unwrap();
            assert!((back[0] - xi[0]).abs() < 1e-11 && (back[1] - xi[1]).abs() < 1e-11);
        }
        // u(x) = 3x - y pulled back, reference gradient by finite differences
        let u = |p: Point| 3.0 * p[0] - p[1];
        let xi = [0.4, 0.3];
        let h = 1e-7;
        let g = [
            (u(m.apply([xi[0] + h, xi[1]])) - u(m.apply([xi[0] - h, xi[1]]))) / (2.0 * h),
            (u(m.apply([xi[0], xi[1] + h])) - u(m.apply([xi[0], xi[1] - h]))) / (2.0 * h),
        ];
        let p = m.push_gradient(xi, g);
        assert!((p[0] - 3.0).abs() < 1e-6 && (p[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn tiny_element_far_from_origin() {
        let (a, h) = (-0.9999847412109375, 6.103515625e-5);
        let m = ElementMap::Bilinear([[a, -1.0], [a + h, -1.0], [a + h, -1.0 + h / 4.0], [a, -1.0 + h / 4.0]]);
        let xi = m.inverse([-0.99997440206385, -0.999995881429893]).unwrap();
        assert!(Shape::Rectangle.contains(xi, 1e-9));
    }
}
