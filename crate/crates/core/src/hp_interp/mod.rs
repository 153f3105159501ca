//! Gauss-Lobatto machinery and elementwise hp interpolation.

pub mod element;
pub mod lagrange;
pub mod map;
pub mod quadrature;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{Cell, Point};
use crate::patch_catalog::PatchMesh;

pub use element::{interp_square, interp_triangle, sample_grid, PolyOnElement, ReferenceBasis, Shape};
pub use lagrange::{interp_1d, lebesgue_constant, lebesgue_constant_on_grid, Interpolant1d, Lagrange1d};
pub use map::ElementMap;
pub use quadrature::{gauss_legendre, gauss_lobatto_rule, square_rule, triangle_rule, CellRule, GaussLobattoRule};

/// Anything made of straight-sided triangles and quadrilaterals.
pub trait Tessellation: Sync {
    fn nodes(&self) -> &[Point];
    fn cells(&self) -> &[Cell];

    fn element_map(&self, e: usize) -> ElementMap {
        ElementMap::from_cell(&self.cells()[e], self.nodes())
    }
}

/// Plain node and cell lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComplex {
    pub nodes: Vec<Point>,
    pub cells: Vec<Cell>,
}

impl Tessellation for CellComplex {
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    fn cells(&self) -> &[Cell] {
        &self.cells
    }
}

impl Tessellation for PatchMesh {
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    fn cells(&self) -> &[Cell] {
        &self.elements
    }
}

/// Elementwise interpolant `Π̃_q u` over a tessellation.
#[derive(Debug, Clone)]
pub struct PatchInterpolant {
    pub q: usize,
    pub maps: Vec<ElementMap>,
    pub polys: Vec<PolyOnElement>,
}

/// Interpolates `f` elementwise through the element maps.
pub fn elementwise_interp<T, F>(f: F, mesh: &T, q: usize) -> Result<PatchInterpolant>
where
    T: Tessellation + ?Sized,
    F: Fn(Point) -> f64 + Sync,
{
    let maps: Vec<ElementMap> = (0..mesh.cells().len()).map(|e| mesh.element_map(e)).collect();
    let polys = maps
        .par_iter()
        .map(|m| {
            let basis = ReferenceBasis::cached(m.shape(), q)?;
            let values = basis.nodes().iter().map(|&xi| f(m.apply(xi))).collect();
            Ok(PolyOnElement { basis, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchInterpolant { q, maps, polys })
}

/// Sup-norm errors of an interpolant, estimated on sample grids.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupErrors {
    pub value: f64,
    pub gradient: f64,
}

impl PatchInterpolant {
    /// Value and physical gradient at reference point `xi` of element `e`.
    pub fn eval(&self, e: usize, xi: Point) -> (f64, [f64; 2]) {
        let (v, g) = self.polys[e].eval_grad(xi);
        (v, self.maps[e].push_gradient(xi, g))
    }

    /// Largest value on sample grids with `n + 1` points per element side.
    pub fn sup_norm(&self, n: usize) -> f64 {
        self.sup_errors(|_| 0.0, None::<fn(Point) -> [f64; 2]>, n).value
    }

    /// `max |u - Π̃u|` and `max |∇(u - Π̃u)|` on uniform reference grids with
    /// `n + 1` points per side of every element.
    pub fn sup_errors<F, G>(&self, u: F, grad: Option<G>, n: usize) -> SupErrors
    where
        F: Fn(Point) -> f64 + Sync,
        G: Fn(Point) -> [f64; 2] + Sync,
    {
        (0..self.maps.len())
            .into_par_iter()
            .map(|e| {
                let map = &self.maps[e];
                let basis = &self.polys[e].basis;
                let k = basis.len();
                let (mut val, mut gr) = (vec![0.0; k], vec![[0.0; 2]; k]);
                let mut out = SupErrors::default();
                for xi in sample_grid(map.shape(), n) {
                    let x = map.apply(xi);
                    let c = &self.polys[e].values;
                    if let Some(g) = &grad {
                        basis.values_and_gradients(xi, &mut val, &mut gr);
                        let mut rg = [0.0; 2];
                        for m in 0..k {
                            rg[0] += gr[m][0] * c[m];
                            rg[1] += gr[m][1] * c[m];
                        }
                        let pg = map.push_gradient(xi, rg);
                        let ex = g(x);
                        out.gradient = out.gradient.max((ex[0] - pg[0]).hypot(ex[1] - pg[1]));
                    } else {
                        basis.values(xi, &mut val);
                    }
                    let v: f64 = val.iter().zip(c).map(|(a, b)| a * b).sum();
                    out.value = out.value.max((u(x) - v).abs());
                }
                out
            })
            .reduce(SupErrors::default, |a, b| SupErrors {
                value: a.value.max(b.value),
                gradient: a.gradient.max(b.gradient),
            })
    }

    /// Largest jump of the interpolant across interior facets, sampled at
    /// `samples` points per facet.
    pub fn max_trace_jump<T: Tessellation + ?Sized>(&self, mesh: &T, samples: usize) -> f64 {
        let mut owners: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, cell) in mesh.cells().iter().enumerate() {
            for (k, (a, b)) in cell.edges().into_iter().enumerate() {
                owners.entry((a.min(b), a.max(b))).or_default().push((e, k));
            }
        }
        let mut keys: Vec<_> = owners.keys().copied().collect();
        keys.sort_unstable();
        let mut jump: f64 = 0.0;
        for key in keys {
            let own = &owners[&key];
            if own.len() != 2 {
                continue;
            }
            let trace = |(e, k): (usize, usize), t: f64| {
                let cell = &mesh.cells()[e];
                let rv = self.maps[e].shape().reference_vertices();
                let nv = rv.len();
                let (a, b) = (rv[k], rv[(k + 1) % nv]);
                // orient along the global key direction
                let t = if cell.nodes()[k] == key.0 { t } else { 1.0 - t };
                self.polys[e].eval([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            };
            for s in 0..samples {
                let t = (s as f64 + 0.5) / samples as f64;
                jump = jump.max((trace(own[0], t) - trace(own[1], t)).abs());
            }
        }
        jump
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_catalog::{build, PatchKind, PatchParams};

    #[test]
    fn constant_is_reproduced_on_every_pattern() {
        let p = PatchParams::new(0.25, 2, 3).unwrap();
        for kind in [
            PatchKind::Trivial,
            PatchKind::BoundaryLayer,
            PatchKind::Corner,
            PatchKind::Tensor,
            PatchKind::Mixed,
            PatchKind::MixedHalf,
            PatchKind::CornerHalf,
            PatchKind::CornerHalfFlip,
        ] {
            let patch = build(kind, p).unwrap();
            let pi = elementwise_interp(|_| 1.0, &patch, 3).unwrap();
            let err = pi.sup_errors(|_| 1.0, Some(|_| [0.0, 0.0]), 10);
            assert!(err.value < 1e-12 && err.gradient < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn traces_agree_across_facets() {
        let f = |p: Point| (3.0 * p[0]).sin() * (-p[1] / 0.1).exp() + p[0] * p[1];
        for kind in [PatchKind::Mixed, PatchKind::Tensor, PatchKind::Corner] {
            let patch = build(kind, PatchParams::new(0.5, 3, 4).unwrap()).unwrap();
            for q in 1..=6 {
                let pi = elementwise_interp(f, &patch, q).unwrap();
                assert!(pi.max_trace_jump(&patch, 50) < 1e-12, "{kind:?} q={q}");
            }
        }
    }

    #[test]
    fn boundary_layer_error_decays_in_q() {
        let eps = 0.01;
        let patch = build(PatchKind::BoundaryLayer, PatchParams::new(0.25, 4, 4).unwrap()).unwrap();
        let u = |p: Point| (-p[1] / eps).exp();
        let mut last = f64::INFINITY;
        for q in [2, 4, 6, 8, 10] {
            let e = elementwise_interp(u, &patch, q).unwrap().sup_errors(u, None::<fn(Point) -> [f64; 2]>, 60);
            assert!(e.value < last, "q={q}");
            last = e.value;
        }
        assert!(last < 1e-5);
    }
}
