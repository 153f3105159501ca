//! Discrete fields, point location, and energy-type norms.

use std::sync::Arc;

use rayon::prelude::*;
use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use super::DofMap;
use crate::error::{Error, Result};
use crate::geometry::{Cell, Point};
use crate::hp_interp::{square_rule, triangle_rule, CellComplex, CellRule, ElementMap, ReferenceBasis, Shape, Tessellation};

type Boxed = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Finds the element containing a point.
#[derive(Debug, Clone)]
pub struct Locator {
    tree: RTree<Boxed>,
    maps: Vec<ElementMap>,
    slack: f64,
}

const REF_TOL: f64 = 1e-10;

impl Locator {
    pub fn new(maps: &[ElementMap]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let boxes = maps
            .iter()
            .enumerate()
            .map(|(e, m)| {
                let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for v in m.vertices() {
                    for i in 0..2 {
                        a[i] = a[i].min(v[i]);
                        b[i] = b[i].max(v[i]);
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                GeomWithData::new(Rectangle::from_corners(a, b), e)
            })
            .collect();
        let slack = 1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        Locator { tree: RTree::bulk_load(boxes), maps: maps.to_vec(), slack }
    }

    /// Element index and reference coordinates of `x`. Points on shared
    /// facets go to the lowest-numbered containing element.
    pub fn locate(&self, x: Point) -> Result<(usize, Point)> {
        let s = self.slack;
        let env = AABB::from_corners([x[0] - s, x[1] - s], [x[0] + s, x[1] + s]);
        let mut cands: Vec<usize> = self.tree.locate_in_envelope_intersecting(&env).map(|b| b.data).collect();
        cands.sort_unstable();
        let mut best: Option<(f64, usize, Point)> = None;
        for e in cands {
            let map = &self.maps[e];
            let Ok(xi) = map.inverse(x) else { continue };
            let shape = map.shape();
            if shape.contains(xi, REF_TOL) {
                return Ok((e, clamp(shape, xi)));
            }
            let v = violation(shape, xi);
            if best.map_or(true, |b| v < b.0) {
                best = Some((v, e, xi));
            }
        }
        match best {
            Some((v, e, xi)) if v < 1e-8 => Ok((e, clamp(self.maps[e].shape(), xi))),
            _ => Err(Error::Location { x: x[0], y: x[1] }),
        }
    }
}

fn violation(shape: Shape, xi: Point) -> f64 {
    let v = (-xi[0]).max(-xi[1]).max(0.0);
    match shape {
        Shape::Rectangle => v.max(xi[0] - 1.0).max(xi[1] - 1.0),
        Shape::Triangle => v.max(xi[0] + xi[1] - 1.0),
    }
}

fn clamp(shape: Shape, xi: Point) -> Point {
    let mut p = [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)];
    if shape == Shape::Triangle && p[0] + p[1] > 1.0 {
        let d = 0.5 * (p[0] + p[1] - 1.0);
        p = [(p[0] - d).max(0.0), (p[1] - d).max(0.0)];
    }
    p
}

/// A function in `S^q(Ω, T)` stored by its global nodal coefficients.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub mesh: CellComplex,
    pub maps: Vec<ElementMap>,
    pub dofs: DofMap,
    pub coeffs: Vec<f64>,
    bases: [Arc<ReferenceBasis>; 2],
    locator: Arc<Locator>,
}

impl DiscreteField {
    pub fn new<T: Tessellation + ?Sized>(mesh: &T, dofs: DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.n_dofs || dofs.l2g.len() != mesh.cells().len() {
            return Err(Error::Input("coefficient vector does not match the dof map".into()));
        }
        let maps: Vec<ElementMap> = (0..mesh.cells().len()).map(|e| mesh.element_map(e)).collect();
        let bases = [
            ReferenceBasis::cached(Shape::Triangle, dofs.q)?,
            ReferenceBasis::cached(Shape::Rectangle, dofs.q)?,
        ];
        let locator = Arc::new(Locator::new(&maps));
        Ok(DiscreteField {
            mesh: CellComplex { nodes: mesh.nodes().to_vec(), cells: mesh.cells().to_vec() },
            maps,
            dofs,
            coeffs,
            bases,
            locator,
        })
    }

    /// Scatters a solution on the free dofs; Dirichlet dofs are zero.
    pub fn from_free<T: Tessellation + ?Sized>(mesh: &T, dofs: DofMap, x: &[f64]) -> Self {
        let coeffs = dofs.free.iter().map(|f| f.map_or(0.0, |i| x[i])).collect();
        Self::new(mesh, dofs, coeffs).expect("dof map built for this mesh")
    }

    pub fn degree(&self) -> usize {
        self.dofs.q
    }

    pub fn basis(&self, e: usize) -> &ReferenceBasis {
        match self.mesh.cells[e] {
            Cell::Triangle(_) => &self.bases[0],
            Cell::Rectangle(_) => &self.bases[1],
        }
    }

    /// Value and physical gradient at reference point `xi` of element `e`.
    pub fn eval_local(&self, e: usize, xi: Point) -> (f64, [f64; 2]) {
        let basis = self.basis(e);
        let k = basis.len();
        let (mut v, mut g) = (vec![0.0; k], vec![[0.0; 2]; k]);
        basis.values_and_gradients(xi, &mut v, &mut g);
        let (mut val, mut rg) = (0.0, [0.0; 2]);
        for (m, &d) in self.dofs.l2g[e].iter().enumerate() {
            let c = self.coeffs[d];
            val += c * v[m];
            rg[0] += c * g[m][0];
            rg[1] += c * g[m][1];
        }
        (val, self.maps[e].push_gradient(xi, rg))
    }

    pub fn locate(&self, x: Point) -> Result<(usize, Point)> {
        self.locator.locate(x)
    }

    /// Value and gradient at a physical point.
    pub fn eval_at(&self, x: Point) -> Result<(f64, [f64; 2])> {
        let (e, xi) = self.locate(x)?;
        Ok(self.eval_local(e, xi))
    }

    /// Nodal interpolant of `f` in `S^q`.
    pub fn interpolate<T: Tessellation + ?Sized>(mesh: &T, q: usize, f: impl Fn(Point) -> f64) -> Result<Self> {
        let dofs = super::build_dof_map(mesh, q)?;
        let mut coeffs = vec![0.0; dofs.n_dofs];
        for e in 0..mesh.cells().len() {
            let map = mesh.element_map(e);
            let basis = ReferenceBasis::cached(map.shape(), q)?;
            for (m, &xi) in basis.nodes().iter().enumerate() {
                coeffs[dofs.l2g[e][m]] = f(map.apply(xi));
            }
        }
        Self::new(mesh, dofs, coeffs)
    }
}

/// Value of a field at a physical point.
pub fn evaluate_field(field: &DiscreteField, x: Point) -> Result<f64> {
    field.eval_at(x).map(|(v, _)| v)
}

/// A function that can be sampled at quadrature points of some integration
/// mesh; `e` and `xi` identify the point on that mesh, `x` is its image.
pub trait MeshFunction: Sync {
    fn eval(&self, e: usize, xi: Point, x: Point) -> Result<(f64, [f64; 2])>;
}

/// Closed-form value and gradient.
pub struct Analytic<U, G> {
    pub u: U,
    pub grad: G,
}

impl<U, G> MeshFunction for Analytic<U, G>
where
    U: Fn(Point) -> f64 + Sync,
    G: Fn(Point) -> [f64; 2] + Sync,
{
    fn eval(&self, _: usize, _: Point, x: Point) -> Result<(f64, [f64; 2])> {
        Ok(((self.u)(x), (self.grad)(x)))
    }
}

/// Evaluation on the field's own mesh.
impl MeshFunction for DiscreteField {
    fn eval(&self, e: usize, xi: Point, _: Point) -> Result<(f64, [f64; 2])> {
        Ok(self.eval_local(e, xi))
    }
}

/// A field evaluated on a different mesh by point location.
pub struct Foreign<'a>(pub &'a DiscreteField);

impl MeshFunction for Foreign<'_> {
    fn eval(&self, _: usize, _: Point, x: Point) -> Result<(f64, [f64; 2])> {
        self.0.eval_at(x)
    }
}

/// `a - b`.
pub struct Difference<A, B>(pub A, pub B);

impl<A: MeshFunction, B: MeshFunction> MeshFunction for Difference<A, B> {
    fn eval(&self, e: usize, xi: Point, x: Point) -> Result<(f64, [f64; 2])> {
        let (a, ga) = self.0.eval(e, xi, x)?;
        let (b, gb) = self.1.eval(e, xi, x)?;
        Ok((a - b, [ga[0] - gb[0], ga[1] - gb[1]]))
    }
}

impl<F: MeshFunction + ?Sized> MeshFunction for &F {
    fn eval(&self, e: usize, xi: Point, x: Point) -> Result<(f64, [f64; 2])> {
        (**self).eval(e, xi, x)
    }
}

/// `‖v‖²` and `|v|²₁`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormParts {
    pub l2_sq: f64,
    pub h1_semi_sq: f64,
}

impl NormParts {
    /// `(ε²|v|²₁ + ‖v‖²)^{1/2}`.
    pub fn energy(&self, eps: f64) -> f64 {
        (eps * eps * self.h1_semi_sq + self.l2_sq).sqrt()
    }

    /// `(ε|v|²₁ + ‖v‖²)^{1/2}`.
    pub fn balanced(&self, eps: f64) -> f64 {
        (eps * self.h1_semi_sq + self.l2_sq).sqrt()
    }
}

/// Squared `L²` norm and `H¹` seminorm of `v` by tensor Gauss quadrature with
/// `points` nodes per direction on every element of `mesh`.
pub fn norm_parts<T, F>(mesh: &T, v: &F, points: usize) -> Result<NormParts>
where
    T: Tessellation + ?Sized,
    F: MeshFunction + ?Sized,
{
    let rules: [CellRule; 2] = [triangle_rule(points), square_rule(points)];
    (0..mesh.cells().len())
        .into_par_iter()
        .map(|e| {
            let map = mesh.element_map(e);
            let rule = &rules[(map.shape() == Shape::Rectangle) as usize];
            let mut out = NormParts::default();
            for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
                let x = map.apply(xi);
                let (val, g) = v.eval(e, xi, x)?;
                let wd = w * map.det(xi).abs();
                out.l2_sq += wd * val * val;
                out.h1_semi_sq += wd * (g[0] * g[0] + g[1] * g[1]);
            }
            Ok(out)
        })
        .try_reduce(NormParts::default, |a, b| {
            Ok(NormParts { l2_sq: a.l2_sq + b.l2_sq, h1_semi_sq: a.h1_semi_sq + b.h1_semi_sq })
        })
}

pub fn energy_norm<T, F>(mesh: &T, v: &F, eps: f64, points: usize) -> Result<f64>
where
    T: Tessellation + ?Sized,
    F: MeshFunction + ?Sized,
{
    Ok(norm_parts(mesh, v, points)?.energy(eps))
}

pub fn balanced_norm<T, F>(mesh: &T, v: &F, eps: f64, points: usize) -> Result<f64>
where
    T: Tessellation + ?Sized,
    F: MeshFunction + ?Sized,
{
    Ok(norm_parts(mesh, v, points)?.balanced(eps))
}

impl Tessellation for DiscreteField {
    fn nodes(&self) -> &[Point] {
        &self.mesh.nodes
    }

    fn cells(&self) -> &[Cell] {
        &self.mesh.cells
    }

    fn element_map(&self, e: usize) -> ElementMap {
        self.maps[e]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mixed_mesh() -> CellComplex {
        // two rectangles and two triangles covering [0,2]x[0,1]
        CellComplex {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [0.0, 1.0], [1.5, 0.5]],
            cells: vec![
                Cell::Rectangle([0, 1, 4, 5]),
                Cell::Triangle([1, 2, 6]),
                Cell::Triangle([2, 3, 6]),
                Cell::Triangle([3, 4, 6]),
                Cell::Triangle([4, 1, 6]),
            ],
        }
    }

    #[test]
    fn norms_of_simple_functions() {
        let m = mixed_mesh();
        let one = Analytic { u: |_: Point| 1.0, grad: |_: Point| [0.0, 0.0] };
        let p = norm_parts(&m, &one, 4).unwrap();
        assert!((p.l2_sq - 2.0).abs() < 1e-13 && p.h1_semi_sq == 0.0);
        let x = Analytic { u: |p: Point| p[0], grad: |_: Point| [1.0, 0.0] };
        let p = norm_parts(&m, &x, 4).unwrap();
        assert!((p.l2_sq - 8.0 / 3.0).abs() < 1e-13);
        assert!((p.h1_semi_sq - 2.0).abs() < 1e-13);
        let eps = 0.1;
        assert!((p.energy(eps) - (8.0f64 / 3.0 + 0.02).sqrt()).abs() < 1e-13);
        assert!((p.balanced(eps) - (8.0f64 / 3.0 + 0.2).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sine_norm_converges() {
        let m = mixed_mesh();
        let s = Analytic {
            u: |p: Point| (PI * p[0]).sin() * (PI * p[1]).sin(),
            grad: |p: Point| [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()],
        };
        let p = norm_parts(&m, &s, 20).unwrap();
        assert!((p.l2_sq - 0.5).abs() < 1e-12);
        assert!((p.h1_semi_sq - PI * PI).abs() < 1e-10);
    }

    #[test]
    fn interpolant_reproduces_polynomials() {
        let m = mixed_mesh();
        let f = |p: Point| p[0] * p[0] * p[1] - 2.0 * p[1] * p[1] + p[0];
        let field = DiscreteField::interpolate(&m, 3, f).unwrap();
        for x in [[0.3, 0.7], [1.5, 0.5], [1.9, 0.05], [1.0, 0.5], [2.0, 1.0]] {
            assert!((evaluate_field(&field, x).unwrap() - f(x)).abs() < 1e-12, "{x:?}");
        }
        let err = Difference(&field, Analytic { u: f, grad: |p: Point| [2.0 * p[0] * p[1] + 1.0, p[0] * p[0] - 4.0 * p[1]] });
        assert!(norm_parts(&m, &err, 6).unwrap().h1_semi_sq < 1e-20);
        assert!(matches!(evaluate_field(&field, [2.5, 0.5]), Err(Error::Location { .. })));
    }

    #[test]
    fn continuous_across_facets() {
        let m = mixed_mesh();
        let field = DiscreteField::interpolate(&m, 4, |p| (3.0 * p[0]).sin() * (2.0 * p[1]).exp()).unwrap();
        // facet x = 1 between element 0 and element 4
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let a = field.eval_local(0, [1.0, t]).0;
            let xi = field.maps[4].inverse([1.0, t]).unwrap();
            let b = field.eval_local(4, xi).0;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn foreign_field_on_other_mesh() {
        let m = mixed_mesh();
        let f = |p: Point| p[0] * p[1];
        let field = DiscreteField::interpolate(&m, 2, f).unwrap();
        let other = CellComplex {
            nodes: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]],
            cells: vec![Cell::Triangle([0, 1, 2]), Cell::Triangle([0, 2, 3])],
        };
        let d = Difference(Foreign(&field), Analytic { u: f, grad: |p: Point| [p[1], p[0]] });
        let p = norm_parts(&other, &d, 5).unwrap();
        assert!(p.l2_sq < 1e-24 && p.h1_semi_sq < 1e-20);
    }
}
