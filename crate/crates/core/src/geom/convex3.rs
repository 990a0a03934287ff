use super::Vec3;

const AXIS_EPS: f64 = 1e-9;

/// A convex polyhedron described by what the separating-axis test needs:
/// its vertices, outward face normals and edge directions.
#[derive(Debug, Clone)]
pub struct ConvexSolid {
    pub vertices: Vec<Vec3>,
    pub face_normals: Vec<Vec3>,
    pub edge_dirs: Vec<Vec3>,
}

/// Outcome of a separating-axis query between two convex solids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contact {
    Disjoint,
    /// `axis` is the unit direction along which the second solid must move
    /// by `depth` to separate from the first.
    Penetration {
        depth: f64,
        axis: Vec3,
    },
}

impl Contact {
    pub fn depth(&self) -> f64 {
        match self {
            Contact::Disjoint => 0.0,
            Contact::Penetration { depth, .. } => *depth,
        }
    }
}

impl ConvexSolid {
    pub fn translated(&self, by: &Vec3) -> ConvexSolid {
        ConvexSolid {
            vertices: self.vertices.iter().map(|v| v + by).collect(),
            face_normals: self.face_normals.clone(),
            edge_dirs: self.edge_dirs.clone(),
        }
    }

    fn project(&self, axis: &Vec3) -> (f64, f64) {
        self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let d = axis.dot(v);
            (lo.min(d), hi.max(d))
        })
    }

    /// Exact separating-axis test over both face-normal sets and all
    /// edge-pair cross products. Depth is the smallest overlap over all
    /// axes; touching solids are `Disjoint`.
    pub fn contact(&self, other: &ConvexSolid) -> Contact {
        let mut best: Option<(f64, Vec3)> = None;
        let mut consider = |axis: Vec3| -> bool {
            let (a_lo, a_hi) = self.project(&axis);
            let (b_lo, b_hi) = other.project(&axis);
            let forward = a_hi - b_lo;
            let backward = b_hi - a_lo;
            if forward <= 0.0 || backward <= 0.0 {
                return false;
            }
            let (d, dir) = if forward <= backward { (forward, axis) } else { (backward, -axis) };
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, dir));
            }
            true
        };
        for n in self.face_normals.iter().chain(other.face_normals.iter()) {
            if !consider(*n) {
                return Contact::Disjoint;
            }
        }
        for ea in &self.edge_dirs {
            for eb in &other.edge_dirs {
                let c = ea.cross(eb);
                let len = c.norm();
                if len > AXIS_EPS * ea.norm() * eb.norm() && !consider(c / len) {
                    return Contact::Disjoint;
                }
            }
        }
        match best {
            Some((depth, axis)) => Contact::Penetration { depth, axis },
            None => Contact::Disjoint,
        }
    }
}
