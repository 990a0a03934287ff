use serde::{Deserialize, Serialize};

use super::Vec2;

/// Penetration below this depth counts as touching, not overlapping.
pub const OVERLAP_EPS: f64 = 1e-7;

const COLLINEAR_EPS: f64 = 1e-9;

/// Axis-aligned bounding box in the plan plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb2 {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb2 {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// True when the interiors overlap by more than `eps` on both axes.
    pub fn overlaps(&self, other: &Aabb2, eps: f64) -> bool {
        self.max.x.min(other.max.x) - self.min.x.max(other.min.x) > eps
            && self.max.y.min(other.max.y) - self.min.y.max(other.min.y) > eps
    }
}

/// One way of pushing a shape out of another along a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Push {
    pub direction: Vec2,
    pub distance: f64,
}

impl Push {
    pub fn vector(&self) -> Vec2 {
        self.direction * self.distance
    }
}

/// A convex polygon with counter-clockwise vertices, starting at the
/// lexicographically smallest vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    /// Convex hull of a point set (Andrew's monotone chain). Collinear
    /// points are dropped.
    pub fn hull(points: impl IntoIterator<Item = Vec2>) -> Polygon {
        let mut pts: Vec<Vec2> = points.into_iter().collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Polygon { vertices: pts };
        }
        let cross = |o: &Vec2, a: &Vec2, b: &Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
        let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= COLLINEAR_EPS {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= COLLINEAR_EPS {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Polygon { vertices: lower }
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Polygon {
        Polygon { vertices: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)] }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        let a = self.area();
        if a.abs() < 1e-12 {
            let n = self.vertices.len().max(1) as f64;
            return self.vertices.iter().sum::<Vec2>() / n;
        }
        let mut c = Vec2::zeros();
        for (p, q) in self.edges() {
            let w = p.x * q.y - q.x * p.y;
            c += (p + q) * w;
        }
        c / (6.0 * a)
    }

    pub fn bbox(&self) -> Aabb2 {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        Aabb2 { min, max }
    }

    pub fn translated(&self, by: Vec2) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| v + by).collect() }
    }

    /// Rotates by `quarter_turns` × 90° counter-clockwise about the origin.
    /// Exact: only coordinate swaps and sign flips.
    pub fn rotated_quarter(&self, quarter_turns: u8) -> Polygon {
        let rot = |v: &Vec2| match quarter_turns % 4 {
            0 => *v,
            1 => Vec2::new(-v.y, v.x),
            2 => Vec2::new(-v.x, -v.y),
            _ => Vec2::new(v.y, -v.x),
        };
        Polygon::hull(self.vertices.iter().map(rot))
    }

    /// Translates so the bounding box minimum sits at the origin.
    pub fn normalized(&self) -> Polygon {
        let b = self.bbox();
        self.translated(-b.min)
    }

    /// Four vertices, every edge parallel to an axis.
    pub fn is_axis_rectangle(&self) -> bool {
        self.vertices.len() == 4 && self.edges().all(|(a, b)| a.x == b.x || a.y == b.y)
    }

    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            let len = e.norm();
            len == 0.0 || (e.x * (p.y - a.y) - e.y * (p.x - a.x)) / len >= -eps
        })
    }

    /// Outward offset by `distance` with mitered corners. The offset edge
    /// lines sit exactly `distance` outside the originals.
    pub fn offset(&self, distance: f64) -> Polygon {
        if distance == 0.0 || self.vertices.len() < 3 {
            return self.clone();
        }
        let n = self.vertices.len();
        let lines: Vec<(Vec2, f64)> = self
            .edges()
            .map(|(a, b)| {
                let e = b - a;
                let normal = Vec2::new(e.y, -e.x) / e.norm();
                (normal, normal.dot(&a) + distance)
            })
            .collect();
        let vertices = (0..n)
            .map(|i| {
                let (n1, c1) = lines[(i + n - 1) % n];
                let (n2, c2) = lines[i];
                let det = n1.x * n2.y - n1.y * n2.x;
                if det.abs() < 1e-12 {
                    self.vertices[i] + n2 * distance
                } else {
                    Vec2::new((c1 * n2.y - c2 * n1.y) / det, (n1.x * c2 - n2.x * c1) / det)
                }
            })
            .collect();
        Polygon { vertices }
    }

    fn axes(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.edges().filter_map(|(a, b)| {
            let e = b - a;
            let len = e.norm();
            (len > 0.0).then(|| Vec2::new(e.y, -e.x) / len)
        })
    }

    fn project(&self, axis: &Vec2) -> (f64, f64) {
        self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let d = axis.dot(v);
            (lo.min(d), hi.max(d))
        })
    }

    /// Separating-axis test. `None` when the shapes are disjoint or only
    /// touch; otherwise every axis push that would move `other` clear of
    /// `self`, shortest first.
    pub fn pushes_out(&self, other: &Polygon) -> Option<Vec<Push>> {
        let mut pushes = Vec::new();
        for axis in self.axes().chain(other.axes()) {
            let (a_lo, a_hi) = self.project(&axis);
            let (b_lo, b_hi) = other.project(&axis);
            let forward = a_hi - b_lo;
            let backward = b_hi - a_lo;
            if forward <= OVERLAP_EPS || backward <= OVERLAP_EPS {
                return None;
            }
            pushes.push(Push { direction: axis, distance: forward });
            pushes.push(Push { direction: -axis, distance: backward });
        }
        pushes.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        Some(pushes)
    }

    /// Minimum translation that moves `other` out of `self`, if they overlap.
    pub fn penetration(&self, other: &Polygon) -> Option<Push> {
        self.pushes_out(other).and_then(|p| p.first().copied())
    }

    pub fn overlaps(&self, other: &Polygon) -> bool {
        self.pushes_out(other).is_some()
    }

    /// Intersection with an axis-aligned rectangle (Sutherland–Hodgman).
    pub fn clip_to_rect(&self, min: Vec2, max: Vec2) -> Polygon {
        let mut pts = self.vertices.clone();
        let planes: [(Vec2, f64); 4] = [
            (Vec2::new(1.0, 0.0), min.x),
            (Vec2::new(-1.0, 0.0), -max.x),
            (Vec2::new(0.0, 1.0), min.y),
            (Vec2::new(0.0, -1.0), -max.y),
        ];
        for (n, c) in planes {
            if pts.is_empty() {
                break;
            }
            let mut out = Vec::with_capacity(pts.len() + 1);
            for i in 0..pts.len() {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                let da = n.dot(&a) - c;
                let db = n.dot(&b) - c;
                if da >= 0.0 {
                    out.push(a);
                }
                if (da >= 0.0) != (db >= 0.0) {
                    let t = da / (da - db);
                    out.push(a + (b - a) * t);
                }
            }
            pts = out;
        }
        Polygon::hull(pts)
    }
}
