//! Polygons, quadrilateral macro triangulations and the geometric boundary
//! layer meshes obtained by transplanting reference patterns into them.
//!
//! A macro quad is stored by its four vertex ids in counterclockwise order.
//! A [`QuadPattern`] picks a reference pattern and one of the eight
//! symmetries of the square: reference corner `j` of `S̃` (counterclockwise
//! from the origin) is sent to quad corner `start + j·d`, `d = ±1`. Physical
//! elements are straight sided; they are the images of the pattern nodes.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ccw_angle, dist, on_segment, signed_area, sub, Cell, Point};
use crate::hp_interp::{ElementMap, Tessellation};
use crate::patch_catalog::{build_pattern, cells_to_svg, cells_to_text, PatchKind, PatchMesh, PatchParams};

const GEOM_TOL: f64 = 1e-12;

/// Straight-sided polygon given by closed vertex loops (outer loop
/// counterclockwise). A slit appears twice in its loop, once per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub loops: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(loops: Vec<Vec<Point>>) -> Result<Self> {
        if loops.is_empty() || loops.iter().any(|l| l.len() < 3) {
            return Err(Error::Input("polygon loops need at least 3 vertices".into()));
        }
        let p = Polygon { loops };
        if p.area() <= 0.0 {
            return Err(Error::Input("polygon must be oriented counterclockwise".into()));
        }
        Ok(p)
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.loops
            .iter()
            .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
    }

    pub fn area(&self) -> f64 {
        self.loops.iter().map(|l| signed_area(l)).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    fn scale(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in self.loops.iter().flatten() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    pub fn is_vertex(&self, p: Point) -> bool {
        let tol = GEOM_TOL * self.scale();
        self.loops.iter().flatten().any(|v| dist(*v, p) <= tol)
    }

    /// True if the segment `ab` lies on one polygon side.
    pub fn contains_segment(&self, a: Point, b: Point) -> bool {
        let tol = GEOM_TOL * self.scale();
        self.segments()
            .any(|(s, t)| on_segment(a, s, t, tol) && on_segment(b, s, t, tol))
    }
}

/// Conforming partition of a polygon into convex quadrilaterals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroTriangulation {
    pub vertices: Vec<Point>,
    /// Vertex ids, counterclockwise.
    pub quads: Vec<[usize; 4]>,
}

/// Edge key `(min id, max id)` → list of `(quad, local edge)`.
fn edge_owners(quads: &[[usize; 4]]) -> BTreeMap<(usize, usize), Vec<(usize, usize)>> {
    let mut m: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (q, c) in quads.iter().enumerate() {
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            m.entry((a.min(b), a.max(b))).or_default().push((q, k));
        }
    }
    m
}

impl MacroTriangulation {
    pub fn corners(&self, q: usize) -> [Point; 4] {
        self.quads[q].map(|i| self.vertices[i])
    }

    /// Checks positivity of every patch map, edge sharing, and that unshared
    /// edges lie on `poly`.
    pub fn check(&self, poly: &Polygon) -> Result<()> {
        for (q, c) in self.quads.iter().enumerate() {
            if c.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::Input(format!("macro quad {q} refers to a missing vertex")));
            }
            let p = self.corners(q);
            let map = ElementMap::Bilinear(p);
            for r in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
                let det = map.det(r);
                if det <= 0.0 {
                    return Err(Error::Geometry { element: q, det });
                }
            }
        }
        for ((a, b), own) in edge_owners(&self.quads) {
            match own.len() {
                1 => {
                    if !poly.contains_segment(self.vertices[a], self.vertices[b]) {
                        return Err(Error::Input(format!(
                            "macro edge {a}-{b} is unshared but not on the boundary"
                        )));
                    }
                }
                2 => {}
                n => {
                    return Err(Error::Input(format!("macro edge {a}-{b} is shared by {n} quads")));
                }
            }
        }
        let area: f64 = (0..self.quads.len()).map(|q| signed_area(&self.corners(q))).sum();
        if (area - poly.area()).abs() > 1e-10 * poly.area() {
            return Err(Error::Input(format!(
                "macro quads cover area {area}, polygon has {}",
                poly.area()
            )));
        }
        Ok(())
    }
}

/// Pattern and orientation for one macro quad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadPattern {
    pub kind: PatchKind,
    /// Quad corner receiving the reference origin.
    pub start: usize,
    /// Walk the quad clockwise instead of counterclockwise.
    #[serde(default)]
    pub reflected: bool,
    /// Corner pattern at a boundary point that is not a polygon vertex; it
    /// uses `L` instead of `n` layers.
    #[serde(default)]
    pub point_contact: bool,
}

impl QuadPattern {
    pub fn trivial() -> Self {
        QuadPattern { kind: PatchKind::Trivial, start: 0, reflected: false, point_contact: false }
    }

    /// Quad corner receiving reference corner `j`.
    pub fn corner(&self, j: usize) -> usize {
        if self.reflected {
            (self.start + 4 - j % 4) % 4
        } else {
            (self.start + j) % 4
        }
    }

    pub fn params(&self, params: PatchParams) -> PatchParams {
        if self.point_contact {
            PatchParams { n: params.l, ..params }
        } else {
            params
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternAssignment {
    pub patterns: Vec<QuadPattern>,
}

/// Boundary incidence of the macro triangulation.
struct Incidence {
    boundary_edge: HashMap<(usize, usize), bool>,
    boundary_vertex: Vec<bool>,
}

fn incidence(macro_t: &MacroTriangulation) -> Incidence {
    let mut boundary_edge = HashMap::new();
    let mut boundary_vertex = vec![false; macro_t.vertices.len()];
    for ((a, b), own) in edge_owners(&macro_t.quads) {
        let on = own.len() == 1;
        boundary_edge.insert((a, b), on);
        if on {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
    }
    Incidence { boundary_edge, boundary_vertex }
}

/// Classifies every macro quad by how its closure meets `∂Ω`.
pub fn assign_refinement_patterns(
    macro_t: &MacroTriangulation,
    poly: &Polygon,
) -> Result<PatternAssignment> {
    let inc = incidence(macro_t);
    let is_vertex = |i: usize| inc.boundary_vertex[i] && poly.is_vertex(macro_t.vertices[i]);
    let mut patterns = Vec::with_capacity(macro_t.quads.len());
    for (q, c) in macro_t.quads.iter().enumerate() {
        let on_edge: Vec<usize> = (0..4)
            .filter(|&k| {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                inc.boundary_edge[&(a.min(b), a.max(b))]
            })
            .collect();
        let err = |reason: &str| Error::Classification { quad: q, reason: reason.to_string() };
        let pattern = match on_edge.as_slice() {
            [] => {
                let touching: Vec<usize> = (0..4).filter(|&k| inc.boundary_vertex[c[k]]).collect();
                match touching.as_slice() {
                    [] => QuadPattern::trivial(),
                    [k] => QuadPattern {
                        kind: PatchKind::Corner,
                        start: *k,
                        reflected: false,
                        point_contact: !is_vertex(c[*k]),
                    },
                    _ => return Err(err("closure meets the boundary in several isolated points")),
                }
            }
            [k] => {
                let k = *k;
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if inc.boundary_vertex[c[(k + 2) % 4]] || inc.boundary_vertex[c[(k + 3) % 4]] {
                    return Err(err("boundary contact beyond a single edge"));
                }
                match (is_vertex(a), is_vertex(b)) {
                    (false, false) => QuadPattern {
                        kind: PatchKind::BoundaryLayer,
                        start: k,
                        reflected: false,
                        point_contact: false,
                    },
                    (true, false) => QuadPattern {
                        kind: PatchKind::Mixed,
                        start: k,
                        reflected: false,
                        point_contact: false,
                    },
                    (false, true) => QuadPattern {
                        kind: PatchKind::Mixed,
                        start: (k + 1) % 4,
                        reflected: true,
                        point_contact: false,
                    },
                    (true, true) => return Err(err("boundary edge joins two polygon vertices")),
                }
            }
            [k0, k1] => {
                // the shared corner is the end of one edge and the start of the other
                let shared = if (k0 + 1) % 4 == *k1 {
                    *k1
                } else if (k1 + 1) % 4 == *k0 {
                    *k0
                } else {
                    return Err(err("two opposite edges on the boundary"));
                };
                if !is_vertex(c[shared]) {
                    return Err(err("two boundary edges meet away from a polygon vertex"));
                }
                QuadPattern { kind: PatchKind::Tensor, start: shared, reflected: false, point_contact: false }
            }
            _ => return Err(err("three or more edges on the boundary")),
        };
        patterns.push(pattern);
    }
    Ok(PatternAssignment { patterns })
}

/// Input triangulation for [`macro_from_triangulation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl Triangulation {
    fn check(&self, poly: &Polygon) -> Result<()> {
        for (t, c) in self.triangles.iter().enumerate() {
            if c.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::Input(format!("triangle {t} refers to a missing vertex")));
            }
        }
        let mut owners: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for c in &self.triangles {
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                *owners.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for ((a, b), n) in owners {
            if n > 2 || (n == 1 && !poly.contains_segment(self.vertices[a], self.vertices[b])) {
                return Err(Error::Input(format!("triangulation is not conforming at edge {a}-{b}")));
            }
        }
        let area: f64 = self
            .triangles
            .iter()
            .map(|c| signed_area(&c.map(|i| self.vertices[i])))
            .sum();
        if (area - poly.area()).abs() > 1e-10 * poly.area() {
            return Err(Error::Input("triangulation does not cover the polygon".into()));
        }
        Ok(())
    }
}

/// Interior angle at vertex `v` of a conforming, counterclockwise mesh given by
/// its boundary edges `a → v → b`, together with the outgoing direction.
fn boundary_angle(v: Point, incoming_from: Point, outgoing_to: Point) -> (f64, Point) {
    let d_out = sub(outgoing_to, v);
    let mut w = ccw_angle(d_out, sub(incoming_from, v));
    if w <= 1e-14 {
        w = 2.0 * PI;
    }
    (w, d_out)
}

/// True if a line leaving `v` in direction `dir` splits the interior angle
/// `omega` (measured counterclockwise from `d_out`) into two angles below `π`.
fn splits_angle(omega: f64, d_out: Point, dir: Point) -> bool {
    let mut theta = ccw_angle(d_out, dir);
    if theta > omega + 1e-12 {
        return false;
    }
    if theta > omega {
        theta = omega;
    }
    theta < PI - 1e-12 && omega - theta < PI - 1e-12
}

/// Boundary edges of a counterclockwise cell complex, as `outgoing[v] = w`
/// and `incoming[v] = u` for edges `v → w` and `u → v`.
fn boundary_links(cells: &[Vec<usize>]) -> (HashMap<usize, Vec<usize>>, HashMap<usize, Vec<usize>>) {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for c in cells {
        for k in 0..c.len() {
            let (a, b) = (c[k], c[(k + 1) % c.len()]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut incoming: HashMap<usize, Vec<usize>> = HashMap::new();
    for c in cells {
        for k in 0..c.len() {
            let (a, b) = (c[k], c[(k + 1) % c.len()]);
            if count[&(a.min(b), a.max(b))] == 1 {
                outgoing.entry(a).or_default().push(b);
                incoming.entry(b).or_default().push(a);
            }
        }
    }
    (outgoing, incoming)
}

/// The three-step construction: make sure every polygon vertex has a meshline
/// splitting its angle into two angles below `π` (bisecting an incident
/// triangle and closing the mesh across the opposite edge where necessary),
/// then cut every triangle into three quads through the edge midpoints and
/// the barycenter.
pub fn macro_from_triangulation(tri: &Triangulation, poly: &Polygon) -> Result<MacroTriangulation> {
    tri.check(poly)?;
    let mut verts = tri.vertices.clone();
    let mut tris: Vec<[usize; 3]> = tri
        .triangles
        .iter()
        .map(|&[a, b, c]| {
            if signed_area(&[verts[a], verts[b], verts[c]]) < 0.0 {
                [a, c, b]
            } else {
                [a, b, c]
            }
        })
        .collect();

    let poly_vertices: Vec<usize> = (0..verts.len()).filter(|&i| poly.is_vertex(verts[i])).collect();
    for v in poly_vertices {
        let cells: Vec<Vec<usize>> = tris.iter().map(|t| t.to_vec()).collect();
        let (out, inc) = boundary_links(&cells);
        let (Some(o), Some(i)) = (out.get(&v), inc.get(&v)) else {
            continue;
        };
        if o.len() != 1 || i.len() != 1 {
            // several boundary passes through v (slit tips and the like)
            continue;
        }
        let (omega, d_out) = boundary_angle(verts[v], verts[i[0]], verts[o[0]]);
        if omega >= 2.0 * PI - 1e-12 {
            continue;
        }
        let ok = tris.iter().filter(|t| t.contains(&v)).any(|t| {
            t.iter()
                .filter(|&&w| w != v)
                .any(|&w| splits_angle(omega, d_out, sub(verts[w], verts[v])))
        });
        if ok {
            continue;
        }
        // triangle containing the bisector
        let half = omega / 2.0;
        let bis = [
            d_out[0] * half.cos() - d_out[1] * half.sin(),
            d_out[0] * half.sin() + d_out[1] * half.cos(),
        ];
        let (ti, b, c) = tris
            .iter()
            .enumerate()
            .filter_map(|(ti, t)| {
                let k = t.iter().position(|&w| w == v)?;
                let (b, c) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let tb = ccw_angle(d_out, sub(verts[b], verts[v]));
                let tc = ccw_angle(d_out, sub(verts[c], verts[v]));
                (tb <= half && half <= tc).then_some((ti, b, c))
            })
            .next()
            .ok_or_else(|| Error::Consistency(format!("no triangle contains the bisector at vertex {v}")))?;
        // intersection of the bisector with bc
        let (pv, pb, pc) = (verts[v], verts[b], verts[c]);
        let e = sub(pc, pb);
        let den = bis[0] * e[1] - bis[1] * e[0];
        let r = sub(pb, pv);
        let s = (r[0] * bis[1] - r[1] * bis[0]) / den;
        let p = [pb[0] + s * e[0], pb[1] + s * e[1]];
        verts.push(p);
        let m = verts.len() - 1;
        tris[ti] = [v, b, m];
        tris.push([v, m, c]);
        // close across bc
        if let Some(nj) = tris.iter().position(|t| {
            let k = t.iter().position(|&w| w == c);
            k.is_some_and(|k| t[(k + 1) % 3] == b)
        }) {
            let t = tris[nj];
            let k = t.iter().position(|&w| w == c).unwrap();
            let d = t[(k + 2) % 3];
            tris[nj] = [c, m, d];
            tris.push([m, b, d]);
        }
    }

    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut quads = Vec::with_capacity(3 * tris.len());
    let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let (p, q) = (verts[a.min(b)], verts[a.max(b)]);
            verts.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            verts.len() - 1
        })
    };
    for &[a, b, c] in &tris {
        let mab = midpoint(a, b, &mut verts);
        let mbc = midpoint(b, c, &mut verts);
        let mca = midpoint(c, a, &mut verts);
        let (pa, pb, pc) = (verts[a], verts[b], verts[c]);
        verts.push([(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]);
        let g = verts.len() - 1;
        quads.push([a, mab, g, mca]);
        quads.push([b, mbc, g, mab]);
        quads.push([c, mca, g, mbc]);
    }
    let m = MacroTriangulation { vertices: verts, quads };
    m.check(poly)?;
    Ok(m)
}

/// Smallest `L` with `σ^L ≤ c₁ ε`.
pub fn scale_resolution_l(sigma: f64, eps: f64, c1: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma < 1.0) || !(eps > 0.0) || !(c1 > 0.0) {
        return Err(Error::Parameter(format!(
            "need sigma in (0,1), eps > 0, c1 > 0; got {sigma}, {eps}, {c1}"
        )));
    }
    let target = c1 * eps;
    let (mut l, mut s) = (0usize, 1.0f64);
    while s > target {
        s *= sigma;
        l += 1;
    }
    Ok(l)
}

/// Physical geometric boundary layer mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Counterclockwise cells.
    pub elements: Vec<Cell>,
    /// Owning macro quad per element.
    pub owner: Vec<usize>,
    /// Pattern coordinates of each element's nodes, in element node order.
    pub reference: Vec<Vec<Point>>,
    /// Oriented patch map corners per macro quad: reference corner `j` ↦ `quad_maps[q][j]`.
    pub quad_maps: Vec<[Point; 4]>,
    pub patterns: Vec<QuadPattern>,
    pub params: PatchParams,
}

impl Tessellation for Mesh {
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    fn cells(&self) -> &[Cell] {
        &self.elements
    }
}

/// Facet key `(min, max)` → owning elements.
pub fn facet_owners(cells: &[Cell]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut m: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (e, c) in cells.iter().enumerate() {
        for (a, b) in c.edges() {
            m.entry((a.min(b), a.max(b))).or_default().push(e);
        }
    }
    m
}

impl Mesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Facets owned by exactly one element.
    pub fn boundary_facets(&self) -> Vec<(usize, usize)> {
        facet_owners(&self.elements)
            .into_iter()
            .filter(|(_, own)| own.len() == 1)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.elements
            .iter()
            .map(|c| signed_area(&c.nodes().iter().map(|&i| self.nodes[i]).collect::<Vec<_>>()))
            .sum()
    }

    pub fn to_text(&self) -> String {
        cells_to_text(&self.nodes, &self.elements)
    }

    pub fn to_svg(&self, size: f64) -> String {
        let b: Vec<(Point, Point)> = self
            .boundary_facets()
            .into_iter()
            .map(|(a, c)| (self.nodes[a], self.nodes[c]))
            .collect();
        cells_to_svg(&self.nodes, &self.elements, &b, size)
    }
}

fn bilinear(p: &[Point; 4], x: Point) -> Point {
    ElementMap::Bilinear(*p).apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NodeKey {
    Vertex(usize),
    Edge(usize, usize, usize),
    Interior(usize, usize),
}

/// Reference edge `j` (from corner `j` to corner `j+1`) and position on it.
fn reference_edge(x: Point) -> Option<(usize, f64)> {
    if x[1] == 0.0 {
        Some((0, x[0]))
    } else if x[0] == 1.0 {
        Some((1, x[1]))
    } else if x[1] == 1.0 {
        Some((2, 1.0 - x[0]))
    } else if x[0] == 0.0 {
        Some((3, 1.0 - x[1]))
    } else {
        None
    }
}

fn reference_corner(x: Point) -> Option<usize> {
    match (x[0], x[1]) {
        (a, b) if a == 0.0 && b == 0.0 => Some(0),
        (a, b) if a == 1.0 && b == 0.0 => Some(1),
        (a, b) if a == 1.0 && b == 1.0 => Some(2),
        (a, b) if a == 0.0 && b == 1.0 => Some(3),
        _ => None,
    }
}

/// Transplants the assigned patterns into the macro quads and merges
/// interface nodes by macro edge and trace index.
pub fn build_geo_bl_mesh(
    macro_t: &MacroTriangulation,
    assign: &PatternAssignment,
    params: PatchParams,
) -> Result<Mesh> {
    params.validate()?;
    if assign.patterns.len() != macro_t.quads.len() {
        return Err(Error::Input(format!(
            "{} patterns for {} macro quads",
            assign.patterns.len(),
            macro_t.quads.len()
        )));
    }
    let mut cache: HashMap<(PatchKind, usize), PatchMesh> = HashMap::new();
    let mut traces: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut index: HashMap<NodeKey, usize> = HashMap::new();
    let mut mesh = Mesh {
        nodes: Vec::new(),
        elements: Vec::new(),
        owner: Vec::new(),
        reference: Vec::new(),
        quad_maps: Vec::new(),
        patterns: assign.patterns.clone(),
        params,
    };
    for (q, (quad, pat)) in macro_t.quads.iter().zip(&assign.patterns).enumerate() {
        if pat.kind.is_half() {
            return Err(Error::Input(format!("macro quad {q}: half-patches cannot be assigned")));
        }
        let pp = pat.params(params);
        if !cache.contains_key(&(pat.kind, pp.n)) {
            cache.insert((pat.kind, pp.n), build_pattern(pat.kind, pp)?);
        }
        let patch = &cache[&(pat.kind, pp.n)];
        let ids: [usize; 4] = std::array::from_fn(|j| quad[pat.corner(j)]);
        let corners = ids.map(|i| macro_t.vertices[i]);
        mesh.quad_maps.push(corners);

        // canonical traces on the four macro edges
        let mut local: BTreeMap<usize, Vec<f64>> = (0..4).map(|j| (j, Vec::new())).collect();
        for x in &patch.nodes {
            if reference_corner(*x).is_some() {
                continue;
            }
            if let Some((j, t)) = reference_edge(*x) {
                let (a, b) = (ids[j], ids[(j + 1) % 4]);
                local.entry(j).or_default().push(if a < b { t } else { 1.0 - t });
            }
        }
        let mut slot: HashMap<(usize, u64), usize> = HashMap::new();
        for (j, mut ts) in local {
            ts.sort_by(f64::total_cmp);
            let (a, b) = (ids[j], ids[(j + 1) % 4]);
            let key = (a.min(b), a.max(b));
            match traces.get(&key) {
                Some(prev) => {
                    let same = prev.len() == ts.len()
                        && prev.iter().zip(&ts).all(|(u, v)| (u - v).abs() <= GEOM_TOL);
                    if !same {
                        return Err(Error::Consistency(format!(
                            "trace mismatch on macro edge {}-{} (quad {q})",
                            key.0, key.1
                        )));
                    }
                }
                None => {
                    traces.insert(key, ts.clone());
                }
            }
            for (k, t) in ts.iter().enumerate() {
                slot.insert((j, t.to_bits()), k);
            }
        }

        let mut node_map = Vec::with_capacity(patch.nodes.len());
        for (li, x) in patch.nodes.iter().enumerate() {
            let key = if let Some(j) = reference_corner(*x) {
                NodeKey::Vertex(ids[j])
            } else if let Some((j, t)) = reference_edge(*x) {
                let (a, b) = (ids[j], ids[(j + 1) % 4]);
                let tc = if a < b { t } else { 1.0 - t };
                NodeKey::Edge(a.min(b), a.max(b), slot[&(j, tc.to_bits())])
            } else {
                NodeKey::Interior(q, li)
            };
            let id = *index.entry(key).or_insert_with(|| {
                mesh.nodes.push(match key {
                    NodeKey::Vertex(v) => macro_t.vertices[v],
                    _ => bilinear(&corners, *x),
                });
                mesh.nodes.len() - 1
            });
            node_map.push(id);
        }
        for cell in &patch.elements {
            let (c, refs) = if pat.reflected {
                let r = cell.reversed();
                (r.map_nodes(|i| node_map[i]), r)
            } else {
                (cell.map_nodes(|i| node_map[i]), *cell)
            };
            mesh.elements.push(c);
            mesh.owner.push(q);
            mesh.reference.push(refs.nodes().iter().map(|&i| patch.nodes[i]).collect());
        }
    }
    Ok(mesh)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A facet used by more than two elements.
    FacetOverused { facet: (usize, usize), count: usize },
    /// An unshared facet inside the domain, i.e. a hanging node or a gap.
    InteriorFacetUnmatched { facet: (usize, usize) },
    NonPositiveJacobian { element: usize, det: f64 },
    BoundaryLength { mesh: f64, polygon: f64 },
    AreaMismatch { mesh: f64, polygon: f64 },
    /// No meshline at a polygon vertex splits the interior angle into two
    /// angles below `π`.
    MissingMeshline { vertex: Point, angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn clean(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn validate_mesh(mesh: &Mesh, poly: &Polygon) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let owners = facet_owners(&mesh.elements);
    let mut blen = 0.0;
    for (&(a, b), own) in &owners {
        match own.len() {
            1 => {
                if poly.contains_segment(mesh.nodes[a], mesh.nodes[b]) {
                    blen += dist(mesh.nodes[a], mesh.nodes[b]);
                } else {
                    rep.errors.push(Violation::InteriorFacetUnmatched { facet: (a, b) });
                }
            }
            2 => {}
            n => rep.errors.push(Violation::FacetOverused { facet: (a, b), count: n }),
        }
    }
    for e in 0..mesh.elements.len() {
        let map = mesh.element_map(e);
        let dets: Vec<f64> = match map {
            ElementMap::Affine(_) => vec![map.det([0.0, 0.0])],
            ElementMap::Bilinear(_) => [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
                .iter()
                .map(|&r| map.det(r))
                .collect(),
        };
        if let Some(&det) = dets.iter().find(|&&d| d <= 0.0) {
            rep.errors.push(Violation::NonPositiveJacobian { element: e, det });
        }
    }
    let per = poly.perimeter();
    if (blen - per).abs() > 1e-10 * per {
        rep.errors.push(Violation::BoundaryLength { mesh: blen, polygon: per });
    }
    let (ma, pa) = (mesh.area(), poly.area());
    if (ma - pa).abs() > 1e-10 * pa {
        rep.errors.push(Violation::AreaMismatch { mesh: ma, polygon: pa });
    }

    let cells: Vec<Vec<usize>> = mesh.elements.iter().map(|c| c.nodes().to_vec()).collect();
    let (out, inc) = boundary_links(&cells);
    let mut neighbours: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in owners.keys() {
        neighbours.entry(a).or_default().push(b);
        neighbours.entry(b).or_default().push(a);
    }
    let mut vertices: Vec<usize> = out.keys().copied().filter(|&v| poly.is_vertex(mesh.nodes[v])).collect();
    vertices.sort_unstable();
    for v in vertices {
        let (Some(o), Some(i)) = (out.get(&v), inc.get(&v)) else {
            continue;
        };
        let pv = mesh.nodes[v];
        for (&w_out, &w_in) in o.iter().zip(i) {
            let (omega, d_out) = boundary_angle(pv, mesh.nodes[w_in], mesh.nodes[w_out]);
            let ok = neighbours[&v]
                .iter()
                .any(|&w| splits_angle(omega, d_out, sub(mesh.nodes[w], pv)));
            if !ok {
                rep.warnings.push(Violation::MissingMeshline { vertex: pv, angle: omega });
            }
        }
    }
    rep
}

/// The three test domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Square,
    Lshape,
    Slit,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::Lshape => "lshape",
            Domain::Slit => "slit",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Domain::Square),
            "lshape" => Ok(Domain::Lshape),
            "slit" => Ok(Domain::Slit),
            _ => Err(Error::Input(format!("unknown domain '{s}'"))),
        }
    }
}

/// Tensor grid of macro quads on the lines `xs × ys`, keeping cells whose
/// center passes `keep`. Vertices on `slit` (a predicate on points) are
/// duplicated: cells below the slit get their own copies.
fn grid_layout(
    xs: &[f64],
    ys: &[f64],
    keep: impl Fn(Point) -> bool,
    slit: impl Fn(Point) -> bool,
) -> MacroTriangulation {
    let mut vertices = Vec::new();
    let mut ids: HashMap<(usize, usize, bool), usize> = HashMap::new();
    let mut quads = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let center = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            if !keep(center) {
                continue;
            }
            let below = center[1] < 0.0;
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let quad = corners.map(|(a, b)| {
                let p = [xs[a], ys[b]];
                let lower = below && slit(p);
                *ids.entry((a, b, lower)).or_insert_with(|| {
                    vertices.push(p);
                    vertices.len() - 1
                })
            });
            quads.push(quad);
        }
    }
    MacroTriangulation { vertices, quads }
}

const LINES: [f64; 7] = [-1.0, -0.75, -0.25, 0.0, 0.25, 0.75, 1.0];

/// Polygon and macro triangulation of a built-in domain:
/// `(0,1)²` as 2×2 quads; the L-shape `(-1,1)² ∖ [0,1)×(-1,0]` as 27 quads;
/// the slit square `(-1,1)² ∖ (-1,0]×{0}` as 36 quads with the slit doubled.
pub fn builtin_layout(domain: Domain) -> (Polygon, MacroTriangulation) {
    match domain {
        Domain::Square => (
            Polygon { loops: vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]] },
            grid_layout(&[0.0, 0.5, 1.0], &[0.0, 0.5, 1.0], |_| true, |_| false),
        ),
        Domain::Lshape => (
            Polygon {
                loops: vec![vec![
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [1.0, 1.0],
                    [-1.0, 1.0],
                    [-1.0, -1.0],
                    [0.0, -1.0],
                ]],
            },
            grid_layout(&LINES, &LINES, |c| !(c[0] > 0.0 && c[1] < 0.0), |_| false),
        ),
        Domain::Slit => (
            Polygon {
                loops: vec![vec![
                    [-1.0, 0.0],
                    [-1.0, -1.0],
                    [1.0, -1.0],
                    [1.0, 1.0],
                    [-1.0, 1.0],
                    [-1.0, 0.0],
                    [0.0, 0.0],
                ]],
            },
            grid_layout(&LINES, &LINES, |_| true, |p| p[1] == 0.0 && p[0] < 0.0),
        ),
    }
}

/// Builds and classifies the mesh of a built-in domain.
pub fn builtin_mesh(domain: Domain, params: PatchParams) -> Result<(Polygon, Mesh)> {
    let (poly, m) = builtin_layout(domain);
    m.check(&poly)?;
    let assign = assign_refinement_patterns(&m, &poly)?;
    let mesh = build_geo_bl_mesh(&m, &assign, params)?;
    Ok((poly, mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_catalog::build;

    fn unit_square() -> Polygon {
        Polygon::new(vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]).unwrap()
    }

    #[test]
    fn scale_resolution() {
        assert_eq!(scale_resolution_l(0.25, 1.0, 1.0).unwrap(), 0);
        assert_eq!(scale_resolution_l(0.25, 1e-2, 1.0).unwrap(), 4);
        assert_eq!(scale_resolution_l(0.25, 1e-4, 1.0).unwrap(), 7);
        assert!(scale_resolution_l(1.0, 1e-4, 1.0).is_err());
    }

    #[test]
    fn square_is_four_tensor_patches() {
        let (poly, m) = builtin_layout(Domain::Square);
        let a = assign_refinement_patterns(&m, &poly).unwrap();
        assert!(a.patterns.iter().all(|p| p.kind == PatchKind::Tensor));
        // the origin of every pattern sits at a corner of the square
        for (q, p) in a.patterns.iter().enumerate() {
            let c = m.vertices[m.quads[q][p.corner(0)]];
            assert!(c.iter().all(|&x| x == 0.0 || x == 1.0));
        }
        let params = PatchParams::new(0.25, 2, 2).unwrap();
        let mesh = build_geo_bl_mesh(&m, &a, params).unwrap();
        let tensor = build(PatchKind::Tensor, params).unwrap();
        assert_eq!(mesh.num_elements(), 4 * tensor.elements.len());
        // nodes: 4 copies minus the shared interface nodes
        let on_half = |x: f64| x == 0.5;
        let interface = mesh.nodes.iter().filter(|p| on_half(p[0]) || on_half(p[1])).count();
        let per_edge = tensor.nodes.iter().filter(|p| p[0] == 1.0).count();
        assert_eq!(interface, 4 * per_edge - 3);
        assert_eq!(mesh.nodes.len(), 4 * tensor.nodes.len() - (4 * per_edge - 1));
        let rep = validate_mesh(&mesh, &poly);
        assert!(rep.clean() && rep.warnings.is_empty(), "{rep:?}");
    }

    #[test]
    fn all_trivial_two_by_two() {
        let (poly, m) = builtin_layout(Domain::Square);
        let a = PatternAssignment { patterns: vec![QuadPattern::trivial(); 4] };
        let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.5, 1, 1).unwrap()).unwrap();
        assert_eq!(mesh.num_elements(), 4);
        assert_eq!(mesh.nodes.len(), 9);
        assert!(validate_mesh(&mesh, &poly).clean());
    }

    #[test]
    fn adjacent_boundary_layers_share_their_trace() {
        // (0,2)×(0,1) as two quads; boundary layer at the bottom of each
        let poly = Polygon::new(vec![vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]]).unwrap();
        let m = MacroTriangulation {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [0.0, 1.0]],
            quads: vec![[0, 1, 4, 5], [1, 2, 3, 4]],
        };
        let bl = QuadPattern { kind: PatchKind::BoundaryLayer, start: 0, reflected: false, point_contact: false };
        let a = PatternAssignment { patterns: vec![bl, bl] };
        let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.5, 3, 3).unwrap()).unwrap();
        let mut ys: Vec<f64> = mesh.nodes.iter().filter(|p| p[0] == 1.0).map(|p| p[1]).collect();
        ys.sort_by(f64::total_cmp);
        assert_eq!(ys, vec![0.0, 0.125, 0.25, 0.5, 1.0]);
        assert_eq!(mesh.nodes.len(), 3 * 5);
        assert!(validate_mesh(&mesh, &poly).clean());
    }

    #[test]
    fn mismatched_traces_are_rejected() {
        let m = MacroTriangulation {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [0.0, 1.0]],
            quads: vec![[0, 1, 4, 5], [1, 2, 3, 4]],
        };
        let bl = QuadPattern { kind: PatchKind::BoundaryLayer, start: 0, reflected: false, point_contact: false };
        let a = PatternAssignment { patterns: vec![bl, QuadPattern::trivial()] };
        let r = build_geo_bl_mesh(&m, &a, PatchParams::new(0.5, 3, 3).unwrap());
        assert!(matches!(r, Err(Error::Consistency(_))));
    }

    #[test]
    fn unmerged_interface_node_is_flagged() {
        let (poly, mesh) = builtin_mesh(Domain::Square, PatchParams::new(0.25, 2, 2).unwrap()).unwrap();
        let mut broken = mesh.clone();
        // detach one element from the interface node at the center
        let center = broken.nodes.iter().position(|p| *p == [0.5, 0.5]).unwrap();
        broken.nodes.push([0.5, 0.5]);
        let copy = broken.nodes.len() - 1;
        let e = broken.elements.iter().position(|c| c.nodes().contains(&center)).unwrap();
        broken.elements[e] = broken.elements[e].map_nodes(|i| if i == center { copy } else { i });
        let rep = validate_mesh(&broken, &poly);
        assert!(rep
            .errors
            .iter()
            .any(|v| matches!(v, Violation::InteriorFacetUnmatched { .. })));
    }

    #[test]
    fn lshape_layout_matches_the_pattern_picture() {
        let (poly, m) = builtin_layout(Domain::Lshape);
        assert_eq!(m.quads.len(), 27);
        let a = assign_refinement_patterns(&m, &poly).unwrap();
        let count = |k: PatchKind| a.patterns.iter().filter(|p| p.kind == k).count();
        // five convex corners, the reentrant corner with 2 mixed + 1 corner
        assert_eq!(count(PatchKind::Tensor), 5);
        assert_eq!(count(PatchKind::Mixed), 2);
        assert_eq!(count(PatchKind::Corner), 1);
        assert_eq!(count(PatchKind::BoundaryLayer), 12);
        assert_eq!(count(PatchKind::Trivial), 7);
        for p in 1..=4 {
            let params = PatchParams::new(0.25, p, p).unwrap();
            let mesh = build_geo_bl_mesh(&m, &a, params).unwrap();
            let rep = validate_mesh(&mesh, &poly);
            assert!(rep.clean() && rep.warnings.is_empty(), "p={p}: {rep:?}");
        }
    }

    #[test]
    fn slit_layout_and_tip_warning() {
        let (poly, m) = builtin_layout(Domain::Slit);
        assert_eq!(m.quads.len(), 36);
        m.check(&poly).unwrap();
        let a = assign_refinement_patterns(&m, &poly).unwrap();
        let count = |k: PatchKind| a.patterns.iter().filter(|p| p.kind == k).count();
        // corners (±1,±1) and both sides of (-1,0) are tensor patches
        assert_eq!(count(PatchKind::Tensor), 6);
        assert_eq!(count(PatchKind::Mixed), 2);
        assert_eq!(count(PatchKind::Corner), 2);
        let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.25, 3, 3).unwrap()).unwrap();
        let rep = validate_mesh(&mesh, &poly);
        assert!(rep.clean(), "{rep:?}");
        // the tip angle is 2π; no line can split it into two angles below π
        assert_eq!(rep.warnings.len(), 1);
        assert!(matches!(rep.warnings[0], Violation::MissingMeshline { vertex, .. } if vertex == [0.0, 0.0]));
        // no node is shared across the slit away from the tip
        let slit_nodes = mesh.nodes.iter().filter(|p| p[1] == 0.0 && p[0] < 0.0).count();
        let distinct = {
            let mut v: Vec<u64> = mesh
                .nodes
                .iter()
                .filter(|p| p[1] == 0.0 && p[0] < 0.0)
                .map(|p| p[0].to_bits())
                .collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        assert_eq!(slit_nodes, 2 * distinct);
    }

    #[test]
    fn trivial_lshape_lacks_meshline() {
        let poly = Polygon::new(vec![vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
            [0.0, -1.0],
        ]])
        .unwrap();
        let m = grid_layout(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0], |c| !(c[0] > 0.0 && c[1] < 0.0), |_| false);
        let a = PatternAssignment { patterns: vec![QuadPattern::trivial(); 3] };
        let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.5, 1, 1).unwrap()).unwrap();
        let rep = validate_mesh(&mesh, &poly);
        assert!(rep.clean());
        assert!(rep
            .warnings
            .iter()
            .any(|v| matches!(v, Violation::MissingMeshline { vertex, .. } if *vertex == [0.0, 0.0])));
    }

    #[test]
    fn classification_errors() {
        // a single quad covering the square has four boundary edges
        let m = MacroTriangulation {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            quads: vec![[0, 1, 2, 3]],
        };
        assert!(matches!(
            assign_refinement_patterns(&m, &unit_square()),
            Err(Error::Classification { .. })
        ));
    }

    #[test]
    fn single_triangle_gives_three_quads() {
        let poly = Polygon::new(vec![vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]).unwrap();
        let tri = Triangulation { vertices: poly.loops[0].clone(), triangles: vec![[0, 1, 2]] };
        let m = macro_from_triangulation(&tri, &poly).unwrap();
        assert_eq!(m.quads.len(), 3);
        let q0 = m.corners(0);
        let expect = [[0.0, 0.0], [0.5, 0.0], [1.0 / 3.0, 1.0 / 3.0], [0.0, 0.5]];
        for (a, b) in q0.iter().zip(expect) {
            assert!(dist(*a, b) < 1e-15);
        }
        let a = assign_refinement_patterns(&m, &poly).unwrap();
        assert!(a.patterns.iter().all(|p| p.kind == PatchKind::Tensor));
        let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.5, 2, 3).unwrap()).unwrap();
        assert!(validate_mesh(&mesh, &poly).clean());
    }

    #[test]
    fn reentrant_vertex_gets_split() {
        // L-shape, reentrant vertex at the origin with three right-angle triangles
        let poly = Polygon::new(vec![vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
            [0.0, -1.0],
        ]])
        .unwrap();
        let vertices = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 0.0],
            [-1.0, -1.0],
            [0.0, -1.0],
        ];
        let triangles = vec![[0, 1, 2], [0, 2, 3], [0, 3, 5], [3, 4, 5], [0, 5, 7], [5, 6, 7]];
        let tri = Triangulation { vertices, triangles };
        let m = macro_from_triangulation(&tri, &poly).unwrap();
        // one split plus closure: 6 + 2 triangles
        assert_eq!(m.quads.len(), 3 * 8);
        let a = assign_refinement_patterns(&m, &poly).unwrap();
        for p in 1..=3 {
            let mesh = build_geo_bl_mesh(&m, &a, PatchParams::new(0.25, p, p).unwrap()).unwrap();
            let rep = validate_mesh(&mesh, &poly);
            assert!(rep.clean() && rep.warnings.is_empty(), "{rep:?}");
        }
    }

    #[test]
    fn nonconforming_triangulation_is_rejected() {
        let poly = unit_square();
        let tri = Triangulation {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
            triangles: vec![[0, 1, 2], [0, 4, 3], [4, 2, 3]],
        };
        assert!(matches!(macro_from_triangulation(&tri, &poly), Err(Error::Input(_))));
    }
}
