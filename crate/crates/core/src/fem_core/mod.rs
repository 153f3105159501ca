//! Continuous hp spaces with Gauss-Lobatto nodal bases, Galerkin assembly of
//! `-ε² ∇·(A∇u) + c u = f` with homogeneous Dirichlet data, and CG solves.

pub mod field;
pub mod sparse;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::hp_interp::{square_rule, triangle_rule, CellRule, ElementMap, ReferenceBasis, Shape, Tessellation};

pub use field::{
    balanced_norm, energy_norm, evaluate_field, norm_parts, Analytic, DiscreteField, Difference,
    Foreign, MeshFunction, NormParts,
};
pub use sparse::{conjugate_gradient, CgOutcome, CsrMatrix};

/// Global numbering of the nodal degrees of freedom of `S^q` on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub q: usize,
    pub n_dofs: usize,
    /// Local (reference basis order) to global dof, per element.
    pub l2g: Vec<Vec<usize>>,
    /// Dofs on `∂Ω`.
    pub dirichlet: Vec<bool>,
    /// Position among the free dofs.
    pub free: Vec<Option<usize>>,
    pub n_free: usize,
}

/// Numbers vertex dofs first, then `q - 1` dofs per facet in the direction
/// of increasing node index, then element interiors. Facets owned by a single
/// element are Dirichlet facets.
pub fn build_dof_map<T: Tessellation + ?Sized>(mesh: &T, q: usize) -> Result<DofMap> {
    if q == 0 {
        return Err(Error::Parameter("polynomial degree must be >= 1".into()));
    }
    let cells = mesh.cells();
    let mut facets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut used = vec![false; mesh.nodes().len()];
    for (e, c) in cells.iter().enumerate() {
        for &v in c.nodes() {
            used[v] = true;
        }
        for (a, b) in c.edges() {
            if a == b {
                return Err(Error::Consistency(format!("degenerate facet in element {e}")));
            }
            facets.entry((a.min(b), a.max(b))).or_default().push(e);
        }
    }
    let mut vertex_dof = vec![usize::MAX; used.len()];
    let mut n = 0;
    for (v, &u) in used.iter().enumerate() {
        if u {
            vertex_dof[v] = n;
            n += 1;
        }
    }
    let mut facet_dof: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut dirichlet = vec![false; n];
    let mut boundary_facets = Vec::new();
    for (&key, own) in &facets {
        if own.len() > 2 {
            return Err(Error::Consistency(format!(
                "facet {}-{} shared by {} elements",
                key.0,
                key.1,
                own.len()
            )));
        }
        facet_dof.insert(key, n);
        n += q - 1;
        if own.len() == 1 {
            boundary_facets.push(key);
        }
    }
    dirichlet.resize(n, false);
    for &(a, b) in &boundary_facets {
        dirichlet[vertex_dof[a]] = true;
        dirichlet[vertex_dof[b]] = true;
        let start = facet_dof[&(a, b)];
        for k in 0..q - 1 {
            dirichlet[start + k] = true;
        }
    }
    let mut l2g = Vec::with_capacity(cells.len());
    for c in cells {
        let shape = if c.is_triangle() { Shape::Triangle } else { Shape::Rectangle };
        let basis = ReferenceBasis::cached(shape, q)?;
        let mut g = Vec::with_capacity(basis.len());
        g.extend(c.nodes().iter().map(|&v| vertex_dof[v]));
        for (a, b) in c.edges() {
            let start = facet_dof[&(a.min(b), a.max(b))];
            for m in 1..q {
                g.push(if a < b { start + m - 1 } else { start + q - 1 - m });
            }
        }
        for _ in 0..basis.num_interior() {
            g.push(n);
            n += 1;
        }
        l2g.push(g);
    }
    dirichlet.resize(n, false);
    let mut free = vec![None; n];
    let mut n_free = 0;
    for i in 0..n {
        if !dirichlet[i] {
            free[i] = Some(n_free);
            n_free += 1;
        }
    }
    Ok(DofMap { q, n_dofs: n, l2g, dirichlet, free, n_free })
}

type ScalarFn<'a> = Box<dyn Fn(Point) -> f64 + Sync + 'a>;
type TensorFn<'a> = Box<dyn Fn(Point) -> [[f64; 2]; 2] + Sync + 'a>;

/// Data of `-ε² ∇·(A∇u) + c u = f`.
pub struct Coefficients<'a> {
    pub eps: f64,
    /// `None` means `A = I`.
    pub a: Option<TensorFn<'a>>,
    pub c: ScalarFn<'a>,
    pub f: ScalarFn<'a>,
}

impl<'a> Coefficients<'a> {
    /// `A = I`, `c = 1`.
    pub fn model(eps: f64, f: impl Fn(Point) -> f64 + Sync + 'a) -> Self {
        Coefficients { eps, a: None, c: Box::new(|_| 1.0), f: Box::new(f) }
    }

    pub fn with_diffusion(mut self, a: impl Fn(Point) -> [[f64; 2]; 2] + Sync + 'a) -> Self {
        self.a = Some(Box::new(a));
        self
    }

    pub fn with_reaction(mut self, c: impl Fn(Point) -> f64 + Sync + 'a) -> Self {
        self.c = Box::new(c);
        self
    }
}

/// Basis values and reference gradients at the points of a cell rule.
pub(crate) struct Tables {
    pub basis: Arc<ReferenceBasis>,
    pub rule: CellRule,
    pub val: Vec<Vec<f64>>,
    pub grad: Vec<Vec<[f64; 2]>>,
}

impl Tables {
    pub fn new(shape: Shape, q: usize, points: usize) -> Result<Self> {
        let basis = ReferenceBasis::cached(shape, q)?;
        let rule = match shape {
            Shape::Rectangle => square_rule(points),
            Shape::Triangle => triangle_rule(points),
        };
        let k = basis.len();
        let mut val = Vec::with_capacity(rule.points.len());
        let mut grad = Vec::with_capacity(rule.points.len());
        for &p in &rule.points {
            let (mut v, mut g) = (vec![0.0; k], vec![[0.0; 2]; k]);
            basis.values_and_gradients(p, &mut v, &mut g);
            val.push(v);
            grad.push(g);
        }
        Ok(Tables { basis, rule, val, grad })
    }
}

/// Element matrix and load vector.
pub struct ElementSystem {
    pub matrix: Vec<f64>,
    pub load: Vec<f64>,
}

fn element_system(e: usize, map: &ElementMap, t: &Tables, coeff: &Coefficients) -> Result<ElementSystem> {
    let k = t.basis.len();
    let eps2 = coeff.eps * coeff.eps;
    let mut m = vec![0.0; k * k];
    let mut load = vec![0.0; k];
    let mut pg = vec![[0.0; 2]; k];
    for (qp, (&xi, &w)) in t.rule.points.iter().zip(&t.rule.weights).enumerate() {
        let det = map.det(xi);
        if det <= 0.0 {
            return Err(Error::Geometry { element: e, det });
        }
        let x = map.apply(xi);
        let wd = w * det;
        for i in 0..k {
            pg[i] = map.push_gradient(xi, t.grad[qp][i]);
        }
        let a = match &coeff.a {
            Some(a) => {
                let a = a(x);
                if a[0][1] != a[1][0] || !(a[0][0] > 0.0) || !(a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0) {
                    return Err(Error::Parameter(format!("diffusion matrix not SPD at {x:?}")));
                }
                a
            }
            None => [[1.0, 0.0], [0.0, 1.0]],
        };
        let c = (coeff.c)(x);
        if !(c > 0.0) {
            return Err(Error::Parameter(format!("reaction coefficient {c} not positive at {x:?}")));
        }
        let f = (coeff.f)(x);
        let v = &t.val[qp];
        for i in 0..k {
            let agi = [
                a[0][0] * pg[i][0] + a[0][1] * pg[i][1],
                a[1][0] * pg[i][0] + a[1][1] * pg[i][1],
            ];
            for j in i..k {
                let s = eps2 * (agi[0] * pg[j][0] + agi[1] * pg[j][1]) + c * v[i] * v[j];
                m[i * k + j] += wd * s;
            }
            load[i] += wd * f * v[i];
        }
    }
    for i in 0..k {
        for j in 0..i {
            m[i * k + j] = m[j * k + i];
        }
    }
    Ok(ElementSystem { matrix: m, load })
}

/// Stiffness plus mass matrix and load vector on the free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpdSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    pub n_dofs: usize,
}

/// Quadrature points per direction used by [`assemble`] for degree `q`.
pub fn default_quadrature(q: usize) -> usize {
    q + 2
}

pub fn assemble<T: Tessellation + ?Sized>(mesh: &T, dofs: &DofMap, coeff: &Coefficients) -> Result<SparseSpdSystem> {
    assemble_with(mesh, dofs, coeff, default_quadrature(dofs.q))
}

/// As [`assemble`] with `points` quadrature points per direction.
pub fn assemble_with<T: Tessellation + ?Sized>(
    mesh: &T,
    dofs: &DofMap,
    coeff: &Coefficients,
    points: usize,
) -> Result<SparseSpdSystem> {
    let tri = Tables::new(Shape::Triangle, dofs.q, points)?;
    let rect = Tables::new(Shape::Rectangle, dofs.q, points)?;
    let locals: Vec<ElementSystem> = (0..mesh.cells().len())
        .into_par_iter()
        .map(|e| {
            let map = mesh.element_map(e);
            let t = if map.shape() == Shape::Triangle { &tri } else { &rect };
            element_system(e, &map, t, coeff)
        })
        .collect::<Result<_>>()?;
    let mut triplets = Vec::new();
    let mut load = vec![0.0; dofs.n_free];
    for (e, loc) in locals.iter().enumerate() {
        let g = &dofs.l2g[e];
        let k = g.len();
        for i in 0..k {
            let Some(fi) = dofs.free[g[i]] else { continue };
            load[fi] += loc.load[i];
            for j in 0..k {
                if let Some(fj) = dofs.free[g[j]] {
                    triplets.push((fi, fj, loc.matrix[i * k + j]));
                }
            }
        }
    }
    Ok(SparseSpdSystem {
        matrix: CsrMatrix::from_triplets(dofs.n_free, triplets),
        load,
        n_dofs: dofs.n_free,
    })
}

pub const CG_TOL: f64 = 1e-12;

/// CG solve of the assembled system; Dirichlet entries of the result are zero.
pub fn solve_cg(system: &SparseSpdSystem, tol: f64) -> Result<CgOutcome> {
    conjugate_gradient(&system.matrix, &system.load, tol)
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: DiscreteField,
    pub iterations: usize,
    pub residual: f64,
}

/// Builds the dof map, assembles, and solves.
pub fn solve<T: Tessellation + ?Sized>(mesh: &T, q: usize, coeff: &Coefficients) -> Result<Solution> {
    let dofs = build_dof_map(mesh, q)?;
    let system = assemble(mesh, &dofs, coeff)?;
    let out = solve_cg(&system, CG_TOL)?;
    let field = DiscreteField::from_free(mesh, dofs, &out.x);
    Ok(Solution { field, iterations: out.iterations, residual: out.residual })
}
