//! Eight-cornered parts and the face/edge edits that shape them.
//!
//! Corners are indexed by a 3-bit code: bit 0 selects the +x side, bit 1
//! the +y side, bit 2 the +z side of the base box. The x axis runs along
//! the source scrap's length, y along its width and z through its
//! thickness. Edits translate stored corners and are then validated; an
//! edit that breaks planarity, convexity or minimum extent is rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::Pose;
use crate::error::{Error, Result};
use crate::geom::{newell_normal, v3, ConvexSolid, Polygon, Vec2, Vec3};
use crate::ids::{GroupId, PartId, ScrapId};

/// Edge offsets at or below this snap back to square.
pub const SQUARE_SNAP_TOL_MM: f64 = 1.0;
/// Allowed deviation when checking a bevel against half a joint angle.
pub const MITER_TOL_DEG: f64 = 0.5;
/// Smallest allowed extent between opposite faces.
pub const MIN_EXTENT_MM: f64 = 0.1;
pub const PLANARITY_TOL_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-z")]
    NegZ,
    #[serde(rename = "+z")]
    PosZ,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::NegX, Face::PosX, Face::NegY, Face::PosY, Face::NegZ, Face::PosZ];

    pub fn axis(self) -> usize {
        match self {
            Face::NegX | Face::PosX => 0,
            Face::NegY | Face::PosY => 1,
            Face::NegZ | Face::PosZ => 2,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Face::PosX | Face::PosY | Face::PosZ)
    }

    /// Outward normal of this face on the unedited box.
    pub fn base_normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = if self.is_positive() { 1.0 } else { -1.0 };
        n
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::NegX => "-x",
            Face::PosX => "+x",
            Face::NegY => "-y",
            Face::PosY => "+y",
            Face::NegZ => "-z",
            Face::PosZ => "+z",
        }
    }

    /// Corner codes in counter-clockwise order seen from outside.
    pub fn corners(self) -> [usize; 4] {
        let a = self.axis();
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let code = |u: usize, w: usize| {
            let side = usize::from(self.is_positive());
            (side << a) | (u << b) | (w << c)
        };
        if self.is_positive() {
            [code(0, 0), code(1, 0), code(1, 1), code(0, 1)]
        } else {
            [code(0, 0), code(0, 1), code(1, 1), code(1, 0)]
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Face::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown face {s:?}")))
    }
}

/// An edge, named by its two adjacent faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge(pub Face, pub Face);

impl Edge {
    pub fn new(a: Face, b: Face) -> Result<Edge> {
        let e = Edge(a, b);
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        if self.0.axis() == self.1.axis() {
            return Err(Error::InvalidEdge(format!("{} and {} are not adjacent", self.0, self.1)));
        }
        Ok(())
    }

    /// The twelve edges in a fixed order.
    pub fn all() -> Vec<Edge> {
        let mut out = Vec::with_capacity(12);
        for (i, a) in Face::ALL.iter().enumerate() {
            for b in &Face::ALL[i + 1..] {
                if a.axis() != b.axis() {
                    out.push(Edge(*a, *b));
                }
            }
        }
        out
    }

    /// The two corner codes on this edge.
    pub fn corners(&self) -> [usize; 2] {
        let (f, g) = (self.0, self.1);
        let free = 3 - f.axis() - g.axis();
        let base = (usize::from(f.is_positive()) << f.axis()) | (usize::from(g.is_positive()) << g.axis());
        [base, base | (1 << free)]
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0, self.1)
    }
}

/// Eight stored corner coordinates in part-local millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hexahedron {
    corners: [[f64; 3]; 8],
}

impl Hexahedron {
    /// Axis-aligned box with one corner at the origin.
    pub fn cuboid(dims: [f64; 3]) -> Hexahedron {
        let mut corners = [[0.0; 3]; 8];
        for (i, c) in corners.iter_mut().enumerate() {
            for axis in 0..3 {
                if i & (1 << axis) != 0 {
                    c[axis] = dims[axis];
                }
            }
        }
        Hexahedron { corners }
    }

    pub fn from_corners(corners: [[f64; 3]; 8]) -> Hexahedron {
        Hexahedron { corners }
    }

    pub fn corners(&self) -> &[[f64; 3]; 8] {
        &self.corners
    }

    pub fn corner(&self, i: usize) -> Vec3 {
        v3(self.corners[i])
    }

    fn face_loop(&self, face: Face) -> [Vec3; 4] {
        face.corners().map(|i| self.corner(i))
    }

    /// Current outward unit normal of a face.
    pub fn face_normal(&self, face: Face) -> Vec3 {
        newell_normal(&self.face_loop(face)).normalize()
    }

    pub fn face_centroid(&self, face: Face) -> Vec3 {
        self.face_loop(face).iter().sum::<Vec3>() / 4.0
    }

    /// Axis-aligned extents (length, width, thickness) in the local frame.
    pub fn extents(&self) -> [f64; 3] {
        let (lo, hi) = self.bounds();
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }

    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &self.corners {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, hi)
    }

    pub fn volume(&self) -> f64 {
        // divergence theorem over the triangulated faces
        let mut six_v = 0.0;
        for f in Face::ALL {
            let [a, b, c, d] = self.face_loop(f);
            six_v += a.dot(&b.cross(&c)) + a.dot(&c.cross(&d));
        }
        six_v / 6.0
    }

    /// Checks every solid invariant: minimum extent between opposite faces,
    /// planar faces, convexity and positive volume.
    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            for lo in (0..8).filter(|i| i & (1 << axis) == 0) {
                let hi = lo | (1 << axis);
                let extent = self.corners[hi][axis] - self.corners[lo][axis];
                if !(extent > MIN_EXTENT_MM) {
                    return Err(Error::DegenerateGeometry(format!(
                        "extent {extent} mm along axis {axis} at corners {lo}-{hi}"
                    )));
                }
            }
        }
        let mut planes = Vec::with_capacity(6);
        for face in Face::ALL {
            let lp = self.face_loop(face);
            let n = newell_normal(&lp);
            let len = n.norm();
            if !(len > 1e-12) {
                return Err(Error::DegenerateGeometry(format!("face {face} has no area")));
            }
            let n = n / len;
            let c = lp.iter().sum::<Vec3>() / 4.0;
            let d = n.dot(&c);
            if lp.iter().any(|p| (n.dot(p) - d).abs() > PLANARITY_TOL_MM) {
                return Err(Error::DegenerateGeometry(format!("face {face} is not planar")));
            }
            planes.push((face, n, d));
        }
        for (face, n, d) in &planes {
            if (0..8).any(|i| n.dot(&self.corner(i)) - d > PLANARITY_TOL_MM) {
                return Err(Error::NonConvex(format!("corner outside face {face}")));
            }
        }
        if !(self.volume() > 0.0) {
            return Err(Error::DegenerateGeometry("non-positive volume".into()));
        }
        Ok(())
    }

    /// Translates the face's four corners by `delta_mm` along its current
    /// outward normal (positive pulls outward). Not validated.
    pub fn push_pull(&self, face: Face, delta_mm: f64) -> Hexahedron {
        let shift = self.face_normal(face) * delta_mm;
        let mut out = self.clone();
        for i in face.corners() {
            for a in 0..3 {
                out.corners[i][a] += shift[a];
            }
        }
        out
    }

    /// Signed offset of each edge corner along `tilt`'s axis relative to the
    /// corner across the tilting face. Zero means square.
    fn edge_offsets(&self, edge: Edge, tilt: Face) -> [f64; 2] {
        let other = if edge.0 == tilt { edge.1 } else { edge.0 };
        let axis = tilt.axis();
        edge.corners().map(|i| {
            let partner = i ^ (1 << other.axis());
            self.corners[i][axis] - self.corners[partner][axis]
        })
    }

    /// Moves the edge's two corners by `delta_mm` along the base normal of
    /// `tilt` (one of the edge's faces; that face tilts while the other stays
    /// in its plane). Snaps back to square when both resulting offsets are
    /// within [`SQUARE_SNAP_TOL_MM`]. Not validated.
    pub fn move_edge(&self, edge: Edge, tilt: Face, delta_mm: f64) -> Result<Hexahedron> {
        edge.check()?;
        if tilt != edge.0 && tilt != edge.1 {
            return Err(Error::InvalidEdge(format!("{tilt} is not adjacent to edge {edge}")));
        }
        let axis = tilt.axis();
        let sign = if tilt.is_positive() { 1.0 } else { -1.0 };
        let mut out = self.clone();
        for i in edge.corners() {
            out.corners[i][axis] += sign * delta_mm;
        }
        let offsets = out.edge_offsets(edge, tilt);
        if offsets.iter().all(|o| o.abs() <= SQUARE_SNAP_TOL_MM) {
            let other = if edge.0 == tilt { edge.1 } else { edge.0 };
            for i in edge.corners() {
                let partner = i ^ (1 << other.axis());
                out.corners[i][axis] = out.corners[partner][axis];
            }
        }
        Ok(out)
    }

    /// Deviation of the edge's interior dihedral angle from 90°, in degrees.
    pub fn bevel_deg(&self, edge: Edge) -> f64 {
        let n1 = self.face_normal(edge.0);
        let n2 = self.face_normal(edge.1);
        let between = n1.dot(&n2).clamp(-1.0, 1.0).acos().to_degrees();
        (90.0 - between).abs()
    }

    /// Interior dihedral angle at the edge, in degrees.
    pub fn interior_angle_deg(&self, edge: Edge) -> f64 {
        let n1 = self.face_normal(edge.0);
        let n2 = self.face_normal(edge.1);
        180.0 - n1.dot(&n2).clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// Convex hull of the corners projected along z.
    pub fn footprint(&self) -> Polygon {
        Polygon::hull(self.corners.iter().map(|c| Vec2::new(c[0], c[1])))
    }

    /// Local-frame solid for collision queries.
    pub fn solid(&self) -> ConvexSolid {
        let vertices: Vec<Vec3> = (0..8).map(|i| self.corner(i)).collect();
        let face_normals = Face::ALL.iter().map(|f| self.face_normal(*f)).collect();
        let edge_dirs = Edge::all()
            .into_iter()
            .filter_map(|e| {
                let [a, b] = e.corners();
                let d = self.corner(b) - self.corner(a);
                (d.norm() > 0.0).then(|| d.normalize())
            })
            .collect();
        ConvexSolid { vertices, face_normals, edge_dirs }
    }
}

/// Where a part's material comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Scrap(ScrapId),
    Unassigned,
}

impl Source {
    pub fn scrap(&self) -> Option<ScrapId> {
        match self {
            Source::Scrap(s) => Some(*s),
            Source::Unassigned => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub id: PartId,
    pub source: Source,
    pub vertices: Hexahedron,
    pub link_group: Option<GroupId>,
    pub pose: Pose,
    /// Name of the assembly this part belongs to, used for usage totals.
    #[serde(default)]
    pub assembly: Option<String>,
    /// Informational only; edits are not blocked.
    #[serde(default)]
    pub fabricated: bool,
}

impl Part {
    pub fn world_solid(&self) -> ConvexSolid {
        self.pose.transform_solid(&self.vertices.solid())
    }

    /// Thickness-axis extent of the part.
    pub fn z_extent(&self) -> f64 {
        self.vertices.extents()[2]
    }
}

/// Result of checking a bevel against half of a joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiterCheck {
    pub matches: bool,
    pub bevel_deg: f64,
    pub deviation_deg: f64,
}

pub fn miter_check(shape: &Hexahedron, edge: Edge, target_joint_deg: f64) -> Result<MiterCheck> {
    edge.check()?;
    let bevel = shape.bevel_deg(edge);
    let deviation = (bevel - target_joint_deg / 2.0).abs();
    Ok(MiterCheck { matches: deviation <= MITER_TOL_DEG, bevel_deg: bevel, deviation_deg: deviation })
}
