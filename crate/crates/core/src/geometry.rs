//! Small planar geometry helpers shared by the mesh modules.

pub type Point = [f64; 2];

/// A mesh cell given by node indices in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Triangle([usize; 3]),
    Rectangle([usize; 4]),
}

impl Cell {
    pub fn nodes(&self) -> &[usize] {
        match self {
            Cell::Triangle(n) => n,
            Cell::Rectangle(n) => n,
        }
    }

    pub fn is_triangle(&self) -> bool {
        matches!(self, Cell::Triangle(_))
    }

    /// Local edges as (start, end) node indices, counterclockwise.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.nodes();
        (0..n.len()).map(|i| (n[i], n[(i + 1) % n.len()])).collect()
    }

    /// Same cell with the node order reversed, keeping the first node.
    pub fn reversed(&self) -> Cell {
        match *self {
            Cell::Triangle([a, b, c]) => Cell::Triangle([a, c, b]),
            Cell::Rectangle([a, b, c, d]) => Cell::Rectangle([a, d, c, b]),
        }
    }

    pub fn map_nodes(&self, f: impl Fn(usize) -> usize) -> Cell {
        match *self {
            Cell::Triangle([a, b, c]) => Cell::Triangle([f(a), f(b), f(c)]),
            Cell::Rectangle([a, b, c, d]) => Cell::Rectangle([f(a), f(b), f(c), f(d)]),
        }
    }
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Signed area of a polygon (positive when counterclockwise).
pub fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| cross(pts[i], pts[(i + 1) % n]))
        .sum::<f64>()
}

pub fn diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(dist(*a, *b));
        }
    }
    d
}

pub fn centroid(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    let s = pts.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Distance from a point to a closed convex polygon (zero if inside).
pub fn point_convex_polygon_dist(p: Point, pts: &[Point]) -> f64 {
    let n = pts.len();
    let inside = (0..n).all(|i| cross(sub(pts[(i + 1) % n], pts[i]), sub(p, pts[i])) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| point_segment_dist(p, pts[i], pts[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Counterclockwise angle from direction `from` to direction `to`, in [0, 2π).
pub fn ccw_angle(from: Point, to: Point) -> f64 {
    let a = cross(from, to).atan2(from[0] * to[0] + from[1] * to[1]);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// True if `p` lies on segment `ab` within `tol`.
pub fn on_segment(p: Point, a: Point, b: Point, tol: f64) -> bool {
    point_segment_dist(p, a, b) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angles() {
        assert!((ccw_angle([1.0, 0.0], [0.0, 1.0]) - PI / 2.0).abs() < 1e-15);
        assert!((ccw_angle([1.0, 0.0], [0.0, -1.0]) - 1.5 * PI).abs() < 1e-15);
        assert_eq!(ccw_angle([-1.0, 0.0], [-1.0, 0.0]), 0.0);
    }

    #[test]
    fn convex_distance() {
        let sq = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]];
        assert!((point_convex_polygon_dist([0.0, 0.0], &sq) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(point_convex_polygon_dist([1.5, 1.5], &sq), 0.0);
        assert!((signed_area(&sq) - 1.0).abs() < 1e-15);
    }
}
