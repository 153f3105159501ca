//! Reference refinement patterns on the unit square `S̃ = (0,1)²` and the
//! half-patches on the triangle `T̃ = {0 < ỹ < x̃ < 1}`.
//!
//! Every pattern is built from the coordinates `0` and `σ^i`, with the powers
//! computed by repeated multiplication so that the same coordinate is always
//! the same bit pattern. Corner rings are split as follows: the innermost
//! square `(0, σ^n)²` is cut by the diagonal into two triangles and every
//! L-shaped ring `σ^{i+1} < max(x̃, ỹ) < σ^i` is cut by the diagonal into two
//! trapezoids of two triangles each.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{
    centroid, diameter, dist, point_convex_polygon_dist, signed_area, Cell, Point,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PatchKind {
    Trivial,
    BoundaryLayer,
    Corner,
    Tensor,
    Mixed,
    MixedHalf,
    CornerHalf,
    CornerHalfFlip,
}

impl PatchKind {
    pub fn is_half(self) -> bool {
        matches!(
            self,
            PatchKind::MixedHalf | PatchKind::CornerHalf | PatchKind::CornerHalfFlip
        )
    }

    /// Pull-back of the part of the patch boundary that is mapped to `∂Ω`.
    pub fn boundary_trace(self) -> BoundaryTrace {
        match self {
            PatchKind::Trivial => BoundaryTrace::None,
            PatchKind::Corner | PatchKind::CornerHalf | PatchKind::CornerHalfFlip => {
                BoundaryTrace::Origin
            }
            PatchKind::BoundaryLayer | PatchKind::Mixed | PatchKind::MixedHalf => {
                BoundaryTrace::BottomEdge
            }
            PatchKind::Tensor => BoundaryTrace::BottomAndLeft,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            PatchKind::Trivial => "trivial",
            PatchKind::BoundaryLayer => "bl",
            PatchKind::Corner => "corner",
            PatchKind::Tensor => "tensor",
            PatchKind::Mixed => "mixed",
            PatchKind::MixedHalf => "mixed-half",
            PatchKind::CornerHalf => "corner-half",
            PatchKind::CornerHalfFlip => "corner-half-flip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTrace {
    /// Trivial patch: nothing is mapped to the boundary.
    None,
    /// The vertex `0`.
    Origin,
    /// The edge `{ỹ = 0}`.
    BottomEdge,
    /// `{ỹ = 0} ∪ {x̃ = 0}`.
    BottomAndLeft,
}

impl BoundaryTrace {
    /// Distance from a convex polygon to the trace, `None` for the empty trace.
    pub fn distance(self, pts: &[Point]) -> Option<f64> {
        let min_x = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let min_y = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        match self {
            BoundaryTrace::None => None,
            BoundaryTrace::Origin => Some(point_convex_polygon_dist([0.0, 0.0], pts)),
            BoundaryTrace::BottomEdge => Some(min_y),
            BoundaryTrace::BottomAndLeft => Some(min_x.min(min_y)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PatchParams {
    pub sigma: f64,
    /// Layers of anisotropic refinement towards edges.
    pub l: usize,
    /// Layers of isotropic refinement towards vertices.
    pub n: usize,
}

impl PatchParams {
    pub fn new(sigma: f64, l: usize, n: usize) -> Result<Self> {
        let p = PatchParams { sigma, l, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Parameter(format!(
                "sigma must lie in (0,1), got {}",
                self.sigma
            )));
        }
        if self.n < self.l {
            return Err(Error::Parameter(format!(
                "need n >= L, got L = {}, n = {}",
                self.l, self.n
            )));
        }
        Ok(())
    }

    /// `[1, σ, σ², …, σ^k]` by repeated multiplication.
    pub fn powers(&self, k: usize) -> Vec<f64> {
        sigma_powers(self.sigma, k)
    }
}

pub fn sigma_powers(sigma: f64, k: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(k + 1);
    let mut s = 1.0;
    for _ in 0..=k {
        p.push(s);
        s *= sigma;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchMesh {
    pub kind: PatchKind,
    pub params: PatchParams,
    pub nodes: Vec<Point>,
    pub elements: Vec<Cell>,
    pub boundary_trace: BoundaryTrace,
}

impl PatchMesh {
    pub fn element_points(&self, e: usize) -> Vec<Point> {
        self.elements[e]
            .nodes()
            .iter()
            .map(|&i| self.nodes[i])
            .collect()
    }

    /// Area of the region the pattern covers.
    pub fn region_area(&self) -> f64 {
        if self.kind.is_half() {
            0.5
        } else {
            1.0
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.elements.iter().filter(|c| c.is_triangle()).count()
    }

    pub fn num_rectangles(&self) -> usize {
        self.elements.len() - self.num_triangles()
    }

    /// Line based dump: `v x y` per node, `t i j k` / `r i j k l` per element.
    pub fn to_text(&self) -> String {
        cells_to_text(&self.nodes, &self.elements)
    }

    pub fn to_svg(&self, size: f64) -> String {
        let boundary: Vec<(Point, Point)> = match self.boundary_trace {
            BoundaryTrace::None | BoundaryTrace::Origin => Vec::new(),
            BoundaryTrace::BottomEdge => vec![([0.0, 0.0], [1.0, 0.0])],
            BoundaryTrace::BottomAndLeft => {
                vec![([0.0, 0.0], [1.0, 0.0]), ([0.0, 0.0], [0.0, 1.0])]
            }
        };
        cells_to_svg(&self.nodes, &self.elements, &boundary, size)
    }
}

pub(crate) fn cells_to_text(nodes: &[Point], cells: &[Cell]) -> String {
    let mut s = String::new();
    for p in nodes {
        let _ = writeln!(s, "v {:?} {:?}", p[0], p[1]);
    }
    for c in cells {
        match c {
            Cell::Triangle([a, b, d]) => {
                let _ = writeln!(s, "t {a} {b} {d}");
            }
            Cell::Rectangle([a, b, d, e]) => {
                let _ = writeln!(s, "r {a} {b} {d} {e}");
            }
        }
    }
    s
}

pub(crate) fn cells_to_svg(
    nodes: &[Point],
    cells: &[Cell],
    boundary: &[(Point, Point)],
    size: f64,
) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in nodes {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let ext = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let margin = 10.0;
    let scale = (size - 2.0 * margin) / ext;
    let tx = |p: Point| {
        (
            margin + (p[0] - lo[0]) * scale,
            size - margin - (p[1] - lo[1]) * scale,
        )
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for c in cells {
        let pts: Vec<String> = c
            .nodes()
            .iter()
            .map(|&i| {
                let (x, y) = tx(nodes[i]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let fill = if c.is_triangle() { "#dde8f5" } else { "#f5ecd6" };
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"0.3\"/>",
            pts.join(" ")
        );
    }
    for (a, b) in boundary {
        let (x1, y1) = tx(*a);
        let (x2, y2) = tx(*b);
        let _ = writeln!(
            s,
            "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"red\" stroke-width=\"2\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Accumulates nodes (deduplicated on exact coordinates) and cells.
struct Builder {
    nodes: Vec<Point>,
    index: HashMap<(u64, u64), usize>,
    elements: Vec<Cell>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            nodes: Vec::new(),
            index: HashMap::new(),
            elements: Vec::new(),
        }
    }

    fn node(&mut self, x: f64, y: f64) -> usize {
        let key = (x.to_bits(), y.to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.nodes.push([x, y]);
        self.index.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn tri(&mut self, a: Point, b: Point, c: Point) {
        let (ia, mut ib, mut ic) = (self.node(a[0], a[1]), self.node(b[0], b[1]), self.node(c[0], c[1]));
        if signed_area(&[a, b, c]) < 0.0 {
            std::mem::swap(&mut ib, &mut ic);
        }
        self.elements.push(Cell::Triangle([ia, ib, ic]));
    }

    fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64) {
        let a = self.node(x0, y0);
        let b = self.node(x1, y0);
        let c = self.node(x1, y1);
        let d = self.node(x0, y1);
        self.elements.push(Cell::Rectangle([a, b, c, d]));
    }

    /// Square `(0, pw[start])²` refined towards the origin with rings
    /// `start..end` and the innermost square `(0, pw[end])²`.
    fn corner_region(&mut self, pw: &[f64], start: usize, end: usize) {
        for i in start..end {
            let (o, s) = (pw[i], pw[i + 1]);
            // below the diagonal
            self.tri([s, 0.0], [o, 0.0], [s, s]);
            self.tri([o, 0.0], [o, o], [s, s]);
            // above the diagonal (mirror image)
            self.tri([0.0, s], [s, s], [0.0, o]);
            self.tri([0.0, o], [s, s], [o, o]);
        }
        let s = pw[end];
        self.tri([0.0, 0.0], [s, 0.0], [s, s]);
        self.tri([0.0, 0.0], [s, s], [0.0, s]);
    }

    fn finish(self, kind: PatchKind, params: PatchParams) -> PatchMesh {
        PatchMesh {
            kind,
            params,
            nodes: self.nodes,
            elements: self.elements,
            boundary_trace: kind.boundary_trace(),
        }
    }
}

/// Builds one of the five full reference patterns on `(0,1)²`.
pub fn build_pattern(kind: PatchKind, params: PatchParams) -> Result<PatchMesh> {
    params.validate()?;
    let (l, n) = (params.l, params.n);
    let pw = params.powers(n.max(l));
    let mut b = Builder::new();
    match kind {
        PatchKind::Trivial => b.rect(0.0, 1.0, 0.0, 1.0),
        PatchKind::BoundaryLayer => {
            b.rect(0.0, 1.0, 0.0, pw[l]);
            for i in (0..l).rev() {
                b.rect(0.0, 1.0, pw[i + 1], pw[i]);
            }
        }
        PatchKind::Corner => b.corner_region(&pw, 0, n),
        PatchKind::Tensor => {
            b.corner_region(&pw, l, n);
            // grid lines 0, σ^L, …, σ, 1
            let lines: Vec<f64> = std::iter::once(0.0).chain((0..=l).rev().map(|i| pw[i])).collect();
            for row in 0..=l {
                for col in 0..=l {
                    if row == 0 && col == 0 {
                        continue;
                    }
                    let (x0, x1, y0, y1) = (lines[col], lines[col + 1], lines[row], lines[row + 1]);
                    if row == col {
                        b.tri([x0, y0], [x1, y0], [x1, y1]);
                        b.tri([x0, y0], [x1, y1], [x0, y1]);
                    } else {
                        b.rect(x0, x1, y0, y1);
                    }
                }
            }
        }
        PatchKind::Mixed => {
            b.corner_region(&pw, l, n);
            for i in (0..l).rev() {
                let (x0, x1) = (pw[i + 1], pw[i]);
                // S̃₂: staircase column below the diagonal
                b.rect(x0, x1, 0.0, pw[l]);
                for j in ((i + 1)..l).rev() {
                    b.rect(x0, x1, pw[j + 1], pw[j]);
                }
                b.tri([x0, x0], [x1, x0], [x1, x1]);
                // S̃₃: triangles above the diagonal
                b.tri([0.0, x0], [x0, x0], [0.0, x1]);
                b.tri([0.0, x1], [x0, x0], [x1, x1]);
            }
        }
        _ => {
            return Err(Error::Parameter(format!(
                "{kind:?} is a half-patch; use build_half_patch"
            )))
        }
    }
    Ok(b.finish(kind, params))
}

/// Builds a half-patch by restricting the parent pattern to `T̃`
/// (and reflecting at the diagonal for the flipped corner half-patch).
pub fn build_half_patch(kind: PatchKind, params: PatchParams) -> Result<PatchMesh> {
    let parent = match kind {
        PatchKind::MixedHalf => build_pattern(PatchKind::Mixed, params)?,
        PatchKind::CornerHalf | PatchKind::CornerHalfFlip => {
            build_pattern(PatchKind::Corner, params)?
        }
        _ => {
            return Err(Error::Parameter(format!(
                "{kind:?} is not a half-patch kind"
            )))
        }
    };
    let flip = kind == PatchKind::CornerHalfFlip;
    let mut b = Builder::new();
    for (e, cell) in parent.elements.iter().enumerate() {
        let pts = parent.element_points(e);
        let c = centroid(&pts);
        if c[1] >= c[0] {
            continue;
        }
        let pts: Vec<Point> = if flip {
            pts.iter().map(|p| [p[1], p[0]]).collect()
        } else {
            pts
        };
        match cell {
            Cell::Triangle(_) => b.tri(pts[0], pts[1], pts[2]),
            Cell::Rectangle(_) => {
                // rectangles are axis aligned; the flip never applies to them
                let xs = pts.iter().map(|p| p[0]);
                let ys = pts.iter().map(|p| p[1]);
                let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
                let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
                b.rect(x0, x1, y0, y1);
            }
        }
    }
    Ok(b.finish(kind, params))
}

/// Builds either a full pattern or a half-patch.
pub fn build(kind: PatchKind, params: PatchParams) -> Result<PatchMesh> {
    if kind.is_half() {
        build_half_patch(kind, params)
    } else {
        build_pattern(kind, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMetrics {
    pub is_triangle: bool,
    /// Diameter.
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// `None` when the patch has no boundary trace.
    pub dist_to_gamma: Option<f64>,
    pub dist_to_origin: f64,
}

pub fn patch_metrics(patch: &PatchMesh) -> Vec<ElementMetrics> {
    (0..patch.elements.len())
        .map(|e| {
            let pts = patch.element_points(e);
            let h = diameter(&pts);
            let (h_min, h_max) = match patch.elements[e] {
                Cell::Rectangle(_) => {
                    let hx = dist(pts[0], pts[1]);
                    let hy = dist(pts[1], pts[2]);
                    (hx.min(hy), hx.max(hy))
                }
                Cell::Triangle(_) => (h, h),
            };
            ElementMetrics {
                is_triangle: patch.elements[e].is_triangle(),
                h,
                h_min,
                h_max,
                dist_to_gamma: patch.boundary_trace.distance(&pts),
                dist_to_origin: point_convex_polygon_dist([0.0, 0.0], &pts),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatchSums {
    /// `Σ h^δ` over triangles not abutting the origin.
    pub triangle_sum: f64,
    /// `Σ (h_min/h_max) h_max^δ` over rectangles.
    pub rect_sum: f64,
    /// `Σ (h/ε)^δ e^{-α h/ε}` over triangles not abutting the origin.
    pub triangle_exp_sum: f64,
    /// `Σ (h_min/h_max) (h_max/ε)^δ e^{-α h_max/ε}` over rectangles.
    pub rect_exp_sum: f64,
}

pub fn patch_sums(patch: &PatchMesh, delta: f64, alpha: f64, eps: f64) -> PatchSums {
    let mut s = PatchSums::default();
    for m in patch_metrics(patch) {
        if m.is_triangle {
            if m.dist_to_origin > 0.0 {
                s.triangle_sum += m.h.powf(delta);
                s.triangle_exp_sum += (m.h / eps).powf(delta) * (-alpha * m.h / eps).exp();
            }
        } else {
            let ratio = m.h_min / m.h_max;
            s.rect_sum += ratio * m.h_max.powf(delta);
            s.rect_exp_sum +=
                ratio * (m.h_max / eps).powf(delta) * (-alpha * m.h_max / eps).exp();
        }
    }
    s
}

/// Sum of element areas minus the area of the covered region.
pub fn area_defect(patch: &PatchMesh) -> f64 {
    let total: f64 = (0..patch.elements.len())
        .map(|e| signed_area(&patch.element_points(e)))
        .sum();
    total - patch.region_area()
}

/// Checks that every interior facet is a full facet of exactly two elements
/// and every other facet lies on the boundary of the covered region.
pub fn is_conforming(patch: &PatchMesh) -> bool {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for c in &patch.elements {
        for (a, b) in c.edges() {
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let half = patch.kind.is_half();
    let flip = patch.kind == PatchKind::CornerHalfFlip;
    let on_region_boundary = |p: Point, q: Point| -> bool {
        let same = |a: f64, b: f64| a == b;
        let axis = |k: usize, v: f64| same(p[k], v) && same(q[k], v);
        if half {
            let diag = p[0] == p[1] && q[0] == q[1];
            if flip {
                axis(0, 0.0) || axis(1, 1.0) || diag
            } else {
                axis(1, 0.0) || axis(0, 1.0) || diag
            }
        } else {
            axis(0, 0.0) || axis(0, 1.0) || axis(1, 0.0) || axis(1, 1.0)
        }
    };
    count.iter().all(|(&(a, b), &k)| match k {
        2 => true,
        1 => on_region_boundary(patch.nodes[a], patch.nodes[b]),
        _ => false,
    })
}

/// Smallest interior angle over all triangles (radians).
pub fn min_triangle_angle(patch: &PatchMesh) -> f64 {
    let mut min = std::f64::consts::PI;
    for (e, c) in patch.elements.iter().enumerate() {
        if !c.is_triangle() {
            continue;
        }
        let p = patch.element_points(e);
        for i in 0..3 {
            let a = crate::geometry::sub(p[(i + 1) % 3], p[i]);
            let b = crate::geometry::sub(p[(i + 2) % 3], p[i]);
            let ang = crate::geometry::cross(a, b)
                .abs()
                .atan2(a[0] * b[0] + a[1] * b[1]);
            min = min.min(ang);
        }
    }
    min
}
