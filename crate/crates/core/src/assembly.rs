//! World-space arrangement: poses, rotation snapping, scene meshes and
//! collision resolution for grabbed parts.

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{arr3, newell_normal, v3, Contact, ConvexSolid, Vec3};

pub const ROTATION_SNAP_DEG: f64 = 15.0;
/// Penetration up to this depth counts as contact.
pub const CONTACT_TOL_MM: f64 = 1e-3;
pub const MAX_RESOLVE_ITERATIONS: usize = 32;
pub const SNAP_DISTANCE_MM: f64 = 10.0;
pub const SNAP_ANGLE_DEG: f64 = 5.0;
/// Scene triangles collide as prisms extruded this far behind their surface.
pub const SCENE_SLAB_DEPTH_MM: f64 = 1000.0;
const MIN_TRIANGLE_AREA_MM2: f64 = 1e-6;

/// Rigid placement of a part in the world frame. Rotation rows are stored
/// explicitly so files stay readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: [f64; 3],
    pub rotation: [[f64; 3]; 3],
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Pose {
        Pose { translation: [0.0; 3], rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn at(translation: [f64; 3]) -> Pose {
        Pose { translation, ..Pose::identity() }
    }

    /// Pose from Euler angles in degrees, applied about x, then y, then z
    /// (R = Rz·Ry·Rx).
    pub fn from_euler(translation: [f64; 3], euler_deg: [f64; 3]) -> Pose {
        let [(sx, cx), (sy, cy), (sz, cz)] = euler_deg.map(sin_cos_deg);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
        let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
        let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
        Pose::from_matrix(translation, &(rz * ry * rx))
    }

    fn from_matrix(translation: [f64; 3], m: &Matrix3<f64>) -> Pose {
        let mut rotation = [[0.0; 3]; 3];
        for (r, row) in rotation.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        Pose { translation, rotation }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2])
    }

    pub fn translation_vec(&self) -> Vec3 {
        v3(self.translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.matrix() * p + self.translation_vec()
    }

    pub fn translated(&self, by: &Vec3) -> Pose {
        Pose { translation: arr3(&(self.translation_vec() + by)), rotation: self.rotation }
    }

    /// Rotates the pose about a world point.
    pub fn rotated_about(&self, rot: &Matrix3<f64>, pivot: &Vec3) -> Pose {
        let m = rot * self.matrix();
        let t = rot * (self.translation_vec() - pivot) + pivot;
        Pose::from_matrix(arr3(&t), &m)
    }

    /// Largest deviation of RᵀR from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.matrix();
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }

    pub fn transform_solid(&self, local: &ConvexSolid) -> ConvexSolid {
        let m = self.matrix();
        ConvexSolid {
            vertices: local.vertices.iter().map(|v| self.apply(v)).collect(),
            face_normals: local.face_normals.iter().map(|n| m * n).collect(),
            edge_dirs: local.edge_dirs.iter().map(|e| m * e).collect(),
        }
    }
}

/// Sine and cosine of an angle in degrees. Multiples of 15° use closed
/// forms built from square roots so they are identical on every platform.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let steps = deg / ROTATION_SNAP_DEG;
    if steps.fract() == 0.0 && steps.abs() < 1e6 {
        let k = (steps as i64).rem_euclid(24) as usize;
        let s6 = 6f64.sqrt();
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        // sin of 0°, 15°, …, 90°
        let q = [0.0, (s6 - s2) / 4.0, 0.5, s2 / 2.0, s3 / 2.0, (s6 + s2) / 4.0, 1.0];
        let sin_k = |k: usize| -> f64 {
            match k {
                0..=6 => q[k],
                7..=12 => q[12 - k],
                13..=18 => -q[k - 12],
                _ => -q[24 - k],
            }
        };
        (sin_k(k), sin_k((k + 6) % 24))
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Rounds each angle to the nearest multiple of 15°; exact ties round away
/// from zero.
pub fn snap_rotation(euler_deg: [f64; 3]) -> [f64; 3] {
    euler_deg.map(|a| {
        let s = (a / ROTATION_SNAP_DEG).round() * ROTATION_SNAP_DEG;
        if s == 0.0 {
            0.0
        } else {
            s
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTriangle {
    /// Counter-clockwise seen from the free side; the normal points there.
    pub vertices: [[f64; 3]; 3],
    #[serde(default)]
    pub tag: Option<String>,
}

impl SceneTriangle {
    pub fn normal(&self) -> Vec3 {
        let [a, b, c] = self.vertices.map(v3);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices.map(v3);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// The triangle extruded backwards into a convex slab.
    pub fn slab(&self) -> ConvexSolid {
        let [a, b, c] = self.vertices.map(v3);
        let n = self.normal();
        let back = -n * SCENE_SLAB_DEPTH_MM;
        let edges = [b - a, c - b, a - c];
        let mut face_normals = vec![n, -n];
        face_normals.extend(edges.iter().map(|e| e.cross(&n).normalize()));
        let mut edge_dirs: Vec<Vec3> = edges.iter().map(|e| e.normalize()).collect();
        edge_dirs.push(n);
        ConvexSolid { vertices: vec![a, b, c, a + back, b + back, c + back], face_normals, edge_dirs }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneMesh {
    pub triangles: Vec<SceneTriangle>,
}

impl SceneMesh {
    pub fn new(triangles: Vec<SceneTriangle>) -> Result<SceneMesh> {
        for (i, t) in triangles.iter().enumerate() {
            if !(t.area() > MIN_TRIANGLE_AREA_MM2) || t.vertices.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateTriangle(i));
            }
        }
        Ok(SceneMesh { triangles })
    }

    /// Axis-aligned box room seen from inside: 12 triangles with normals
    /// facing the interior.
    pub fn box_room(size: [f64; 3]) -> SceneMesh {
        let [x, y, z] = size;
        let p = |i: usize| {
            [if i & 1 != 0 { x } else { 0.0 }, if i & 2 != 0 { y } else { 0.0 }, if i & 4 != 0 { z } else { 0.0 }]
        };
        // quads listed counter-clockwise as seen from inside the room
        let quads: [([usize; 4], &str); 6] = [
            ([0, 1, 3, 2], "floor"),
            ([4, 6, 7, 5], "ceiling"),
            ([0, 4, 5, 1], "wall"),
            ([2, 3, 7, 6], "wall"),
            ([0, 2, 6, 4], "wall"),
            ([1, 5, 7, 3], "wall"),
        ];
        let mut triangles = Vec::with_capacity(12);
        for (q, tag) in quads {
            let tag = Some(tag.to_string());
            triangles.push(SceneTriangle { vertices: [p(q[0]), p(q[1]), p(q[2])], tag: tag.clone() });
            triangles.push(SceneTriangle { vertices: [p(q[0]), p(q[2]), p(q[3])], tag });
        }
        SceneMesh { triangles }
    }
}

/// An obstacle a grabbed part can be pushed out of.
pub enum Obstacle<'a> {
    Solid(&'a ConvexSolid),
    Surface(&'a SceneTriangle),
}

/// Penetration of `moving` into an obstacle, as a push for `moving`.
/// Scene surfaces always push along their normal, far enough to clear the
/// slab behind them.
pub fn obstacle_contact(obstacle: &Obstacle<'_>, moving: &ConvexSolid) -> Contact {
    match obstacle {
        Obstacle::Solid(s) => s.contact(moving),
        Obstacle::Surface(t) => match t.slab().contact(moving) {
            Contact::Disjoint => Contact::Disjoint,
            Contact::Penetration { .. } => {
                let n = t.normal();
                let plane = n.dot(&v3(t.vertices[0]));
                let lowest = moving.vertices.iter().map(|v| n.dot(v)).fold(f64::INFINITY, f64::min);
                let depth = plane - lowest;
                if depth > 0.0 {
                    Contact::Penetration { depth, axis: n }
                } else {
                    Contact::Disjoint
                }
            }
        },
    }
}

/// Outcome of resolving a grabbed part against obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub translation: Vec3,
    pub iterations: usize,
}

/// Pushes `moving` out of every obstacle along the deepest contact's
/// translation, repeating up to [`MAX_RESOLVE_ITERATIONS`] times. Returns
/// the total translation, or `None` when penetration remains.
pub fn resolve(moving: &ConvexSolid, obstacles: &[Obstacle<'_>]) -> Option<Resolution> {
    let mut offset = Vec3::zeros();
    for iteration in 0..=MAX_RESOLVE_ITERATIONS {
        let current = moving.translated(&offset);
        let mut deepest: Option<(f64, Vec3)> = None;
        for ob in obstacles {
            if let Contact::Penetration { depth, axis } = obstacle_contact(ob, &current) {
                if depth > CONTACT_TOL_MM && deepest.is_none_or(|(d, _)| depth > d) {
                    deepest = Some((depth, axis));
                }
            }
        }
        match deepest {
            None => return Some(Resolution { translation: offset, iterations: iteration }),
            Some(_) if iteration == MAX_RESOLVE_ITERATIONS => break,
            Some((depth, axis)) => offset += axis * depth,
        }
    }
    None
}

/// A planar surface a part face can be snapped onto.
#[derive(Debug, Clone)]
pub struct SnapSurface {
    pub normal: Vec3,
    pub polygon: Vec<Vec3>,
}

impl SnapSurface {
    pub fn from_triangle(t: &SceneTriangle) -> SnapSurface {
        SnapSurface { normal: t.normal(), polygon: t.vertices.map(v3).to_vec() }
    }

    pub fn from_loop(points: Vec<Vec3>) -> SnapSurface {
        SnapSurface { normal: newell_normal(&points).normalize(), polygon: points }
    }

    fn contains_projection(&self, p: &Vec3) -> bool {
        let n = &self.normal;
        let m = self.polygon.len();
        (0..m).all(|i| {
            let u = &self.polygon[i];
            let v = &self.polygon[(i + 1) % m];
            (v - u).cross(&(p - u)).dot(n) >= -1e-6 * (v - u).norm()
        })
    }
}

/// Chosen snap: candidate index, signed gap and the rigid motion.
#[derive(Debug, Clone)]
pub struct SnapMotion {
    pub candidate: usize,
    pub gap: f64,
    pub rotation: Matrix3<f64>,
    pub pivot: Vec3,
    pub translation: Vec3,
}

/// Picks the nearest surface facing the given part face (within
/// [`SNAP_DISTANCE_MM`] and [`SNAP_ANGLE_DEG`]) and the minimal rotation
/// plus translation that lays the face flat against it. Ties go to the
/// lower candidate index.
pub fn plan_snap(face_normal: &Vec3, face_centroid: &Vec3, candidates: &[SnapSurface]) -> Option<SnapMotion> {
    let cos_limit = SNAP_ANGLE_DEG.to_radians().cos();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in candidates.iter().enumerate() {
        if face_normal.dot(&-s.normal) < cos_limit {
            continue;
        }
        let gap = s.normal.dot(&(face_centroid - s.polygon[0]));
        if gap.abs() > SNAP_DISTANCE_MM {
            continue;
        }
        let projected = face_centroid - s.normal * gap;
        if !s.contains_projection(&projected) {
            continue;
        }
        if best.is_none_or(|(_, g)| gap.abs() < g.abs()) {
            best = Some((i, gap));
        }
    }
    let (candidate, gap) = best?;
    let target = -candidates[candidate].normal;
    let rotation = Rotation3::rotation_between(face_normal, &target)
        .unwrap_or_else(|| {
            Rotation3::from_axis_angle(&Unit::new_normalize(face_normal.cross(&Vec3::x())), std::f64::consts::PI)
        })
        .into_inner();
    Some(SnapMotion {
        candidate,
        gap,
        rotation,
        pivot: *face_centroid,
        translation: -candidates[candidate].normal * gap,
    })
}

pub fn measure(a: [f64; 3], b: [f64; 3]) -> f64 {
    (v3(b) - v3(a)).norm()
}
