//! Geometry primitives shared by the planar and spatial modules.

pub mod convex3;
pub mod polygon;

pub use convex3::{Contact, ConvexSolid};
pub use polygon::{Aabb2, Polygon, Push};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

pub(crate) fn v3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

pub(crate) fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Newell normal of a planar (or nearly planar) loop; magnitude is twice the area.
pub(crate) fn newell_normal(loop_: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    for (i, a) in loop_.iter().enumerate() {
        let b = &loop_[(i + 1) % loop_.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}
