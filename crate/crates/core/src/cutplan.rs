//! Per-scrap 2D cut plans: kerf dilation, bottom-left-fill placement,
//! overlap separation, violation detection and grain alignment.
//!
//! Positions refer to the bounding-box minimum of the rotated footprint,
//! in the scrap-plan frame (origin at a scrap corner, x along the length).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::polygon::OVERLAP_EPS;
use crate::geom::{Aabb2, Polygon, Vec2};
use crate::ids::{PartId, ScrapId};

pub const DEFAULT_KERF_MM: f64 = 3.0;
pub const EDGE_SNAP_TOL_MM: f64 = 5.0;
pub const MAX_RESOLVE_ITERATIONS: usize = 64;
/// Pushes a cut may receive before auto_resolve relocates it instead.
pub const MAX_PUSHES_PER_CUT: usize = 2;
/// Plan rotations are restricted to multiples of this step.
pub const PLAN_ROTATION_STEP_DEG: u16 = 90;
/// Grain misalignment above this angle raises a warning.
pub const GRAIN_WARNING_DEG: f64 = 45.0;
const BOUNDS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PackingMode {
    #[default]
    AutoResolve,
    Manual,
}

/// Quarter-turn rotation of a footprint on the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct QuarterTurn(u8);

impl QuarterTurn {
    pub const ALL: [QuarterTurn; 4] = [QuarterTurn(0), QuarterTurn(1), QuarterTurn(2), QuarterTurn(3)];

    pub fn from_degrees(deg: u16) -> Option<QuarterTurn> {
        (deg % PLAN_ROTATION_STEP_DEG == 0 && deg < 360).then(|| QuarterTurn((deg / PLAN_ROTATION_STEP_DEG) as u8))
    }

    pub fn degrees(self) -> u16 {
        self.0 as u16 * PLAN_ROTATION_STEP_DEG
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn next(self) -> QuarterTurn {
        QuarterTurn((self.0 + 1) % 4)
    }
}

impl TryFrom<u16> for QuarterTurn {
    type Error = String;

    fn try_from(deg: u16) -> Result<Self, Self::Error> {
        QuarterTurn::from_degrees(deg).ok_or_else(|| format!("plan rotation must be 0, 90, 180 or 270, got {deg}"))
    }
}

impl From<QuarterTurn> for u16 {
    fn from(q: QuarterTurn) -> u16 {
        q.degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub part: PartId,
    pub scrap: ScrapId,
    pub position_mm: [f64; 2],
    pub rotation_deg: QuarterTurn,
    pub pinned: bool,
}

impl Placement {
    /// The footprint as it sits on the plan.
    pub fn place(&self, footprint: &Polygon) -> Polygon {
        oriented(footprint, self.rotation_deg).translated(Vec2::new(self.position_mm[0], self.position_mm[1]))
    }
}

/// Rotated footprint with its bounding-box minimum at the origin.
pub fn oriented(footprint: &Polygon, rotation: QuarterTurn) -> Polygon {
    footprint.rotated_quarter(rotation.index()).normalized()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPlan {
    pub scrap: ScrapId,
    pub mode: PackingMode,
    pub kerf_blade_mm: f64,
    pub placements: BTreeMap<PartId, Placement>,
}

impl CutPlan {
    pub fn new(scrap: ScrapId, kerf_blade_mm: f64) -> CutPlan {
        CutPlan { scrap, mode: PackingMode::AutoResolve, kerf_blade_mm, placements: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    OutOfBounds,
    Overlap2D,
    ResawViolation,
    InvalidGeometry,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::OutOfBounds => "OutOfBounds",
            ViolationKind::Overlap2D => "Overlap2D",
            ViolationKind::ResawViolation => "ResawViolation",
            ViolationKind::InvalidGeometry => "InvalidGeometry",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub parts: Vec<PartId>,
    pub scrap: Option<ScrapId>,
    pub detail: String,
}

/// The plan rectangle of a scrap face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sheet {
    pub length: f64,
    pub width: f64,
}

impl Sheet {
    pub fn contains(&self, b: &Aabb2) -> bool {
        b.min.x >= -BOUNDS_EPS
            && b.min.y >= -BOUNDS_EPS
            && b.max.x <= self.length + BOUNDS_EPS
            && b.max.y <= self.width + BOUNDS_EPS
    }

    /// Translation that brings a box inside the sheet, favouring the
    /// minimum edges when the box is larger than the sheet.
    fn clamp_offset(&self, b: &Aabb2) -> Vec2 {
        let axis = |lo: f64, hi: f64, limit: f64| {
            if lo < 0.0 {
                -lo
            } else if hi > limit {
                (limit - hi).max(-lo)
            } else {
                0.0
            }
        };
        Vec2::new(axis(b.min.x, b.max.x, self.length), axis(b.min.y, b.max.y, self.width))
    }
}

/// Outward offset by half the blade width, mitered corners.
pub fn kerf_dilate(outline: &Polygon, blade_mm: f64) -> Polygon {
    outline.offset(blade_mm / 2.0)
}

/// A cut on a plan: the part's local footprint and where it sits.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCut {
    pub part: PartId,
    pub footprint: Polygon,
    pub placement: Placement,
}

impl PlanCut {
    pub fn outline(&self) -> Polygon {
        self.placement.place(&self.footprint)
    }
}

/// Result of the bottom-left-fill search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoPlacement {
    pub position_mm: [f64; 2],
    pub rotation_deg: QuarterTurn,
    pub fits: bool,
}

struct Obstacle {
    outline: Polygon,
    bbox: Aabb2,
    rect: bool,
}

impl Obstacle {
    fn new(outline: Polygon) -> Obstacle {
        Obstacle { bbox: outline.bbox(), rect: outline.is_axis_rectangle(), outline }
    }
}

/// Bottom-left-fill: scans integer millimeter positions ordered by
/// (y, x, rotation index) and returns the first one where the footprint is
/// inside the sheet and its kerf-dilated outline is disjoint from every
/// dilated obstacle. Falls back to the origin, unrotated, with `fits`
/// false.
pub fn place_auto(sheet: Sheet, kerf_mm: f64, obstacles: &[Polygon], footprint: &Polygon) -> AutoPlacement {
    let obstacles: Vec<Obstacle> = obstacles.iter().map(|o| Obstacle::new(kerf_dilate(o, kerf_mm))).collect();
    let candidates: Vec<(QuarterTurn, Obstacle, i64, i64)> = QuarterTurn::ALL
        .iter()
        .filter_map(|&rot| {
            let shape = oriented(footprint, rot);
            let b = shape.bbox();
            let max_x = (sheet.length - b.width() + BOUNDS_EPS).floor();
            let max_y = (sheet.width - b.height() + BOUNDS_EPS).floor();
            (max_x >= 0.0 && max_y >= 0.0)
                .then(|| (rot, Obstacle::new(kerf_dilate(&shape, kerf_mm)), max_x as i64, max_y as i64))
        })
        .collect();
    let y_limit = candidates.iter().map(|c| c.3).max().unwrap_or(-1);
    for y in 0..=y_limit {
        let mut best: Option<(i64, QuarterTurn)> = None;
        for (rot, shape, max_x, max_y) in &candidates {
            if y > *max_y {
                continue;
            }
            let x_cap = best.map_or(*max_x, |(bx, _)| (*max_x).min(bx - 1));
            if let Some(x) = first_free_x(shape, &obstacles, y, x_cap) {
                best = Some((x, *rot));
            }
        }
        if let Some((x, rot)) = best {
            return AutoPlacement { position_mm: [x as f64, y as f64], rotation_deg: rot, fits: true };
        }
    }
    AutoPlacement { position_mm: [0.0, 0.0], rotation_deg: QuarterTurn(0), fits: false }
}

fn first_free_x(shape: &Obstacle, obstacles: &[Obstacle], y: i64, max_x: i64) -> Option<i64> {
    let mut x = 0i64;
    'scan: while x <= max_x {
        let offset = Vec2::new(x as f64, y as f64);
        let bbox = Aabb2 { min: shape.bbox.min + offset, max: shape.bbox.max + offset };
        for ob in obstacles {
            if !bbox.overlaps(&ob.bbox, OVERLAP_EPS) {
                continue;
            }
            if shape.rect && ob.rect {
                // every x before the obstacle's far edge collides as well
                let clear = (ob.bbox.max.x - shape.bbox.min.x - OVERLAP_EPS).ceil() as i64;
                x = clear.max(x + 1);
                continue 'scan;
            }
            if ob.outline.overlaps(&shape.outline.translated(offset)) {
                x += 1;
                continue 'scan;
            }
        }
        return Some(x);
    }
    None
}

/// Kerf-dilated overlap between two placed outlines, as a push for `b`.
pub fn dilated_penetration(a: &Polygon, b: &Polygon, kerf_mm: f64) -> Option<f64> {
    kerf_dilate(a, kerf_mm).penetration(&kerf_dilate(b, kerf_mm)).map(|p| p.distance)
}

/// OutOfBounds (undilated footprint vs. sheet) and pairwise Overlap2D
/// (dilated footprints), recomputed from scratch.
pub fn plan_violations(scrap: ScrapId, sheet: Sheet, kerf_mm: f64, cuts: &[PlanCut]) -> Vec<Violation> {
    let outlines: Vec<Polygon> = cuts.iter().map(PlanCut::outline).collect();
    let dilated: Vec<Polygon> = outlines.iter().map(|o| kerf_dilate(o, kerf_mm)).collect();
    let mut out = Vec::new();
    for (cut, outline) in cuts.iter().zip(&outlines) {
        if !sheet.contains(&outline.bbox()) {
            out.push(Violation {
                kind: ViolationKind::OutOfBounds,
                parts: vec![cut.part],
                scrap: Some(scrap),
                detail: format!("{} exceeds scrap #{} ({}×{} mm)", cut.part, scrap, sheet.length, sheet.width),
            });
        }
    }
    for i in 0..cuts.len() {
        for j in i + 1..cuts.len() {
            if dilated[i].overlaps(&dilated[j]) {
                let (a, b) = (cuts[i].part.min(cuts[j].part), cuts[i].part.max(cuts[j].part));
                out.push(Violation {
                    kind: ViolationKind::Overlap2D,
                    parts: vec![a, b],
                    scrap: Some(scrap),
                    detail: format!("{a} and {b} are closer than the {kerf_mm} mm kerf on scrap #{scrap}"),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveReport {
    pub iterations: usize,
    pub moved: Vec<PartId>,
    pub residual_overlaps: usize,
}

/// Iterative separation of overlapping dilated footprints.
///
/// Each iteration takes the overlapping pair with the deepest penetration
/// (ties: lowest part ids), moves its non-pinned member (the higher id when
/// neither is pinned; pairs of pinned cuts are skipped) by the shortest axis
/// push that keeps it on the sheet, or by the minimum translation clamped
/// into bounds when no push fits. A mover that cannot make progress, or has
/// already been pushed [`MAX_PUSHES_PER_CUT`] times, is relocated by the
/// bottom-left-fill search. When no spot is free the whole
/// plan is repacked around its pinned cuts; if that fails too the pair is
/// left as a residual overlap.
pub fn auto_resolve(sheet: Sheet, kerf_mm: f64, cuts: &mut [PlanCut]) -> ResolveReport {
    cuts.sort_by_key(|c| c.part);
    let mut iterations = 0;
    let mut moved = Vec::new();
    let mut stuck: Vec<(PartId, PartId)> = Vec::new();
    let mut pushes_so_far: Vec<PartId> = Vec::new();
    while iterations < MAX_RESOLVE_ITERATIONS {
        let dilated: Vec<Polygon> = cuts.iter().map(|c| kerf_dilate(&c.outline(), kerf_mm)).collect();
        let mut deepest: Option<(f64, usize, usize)> = None;
        for i in 0..cuts.len() {
            for j in i + 1..cuts.len() {
                if cuts[i].placement.pinned && cuts[j].placement.pinned {
                    continue;
                }
                if stuck.contains(&(cuts[i].part, cuts[j].part)) {
                    continue;
                }
                if let Some(p) = dilated[i].penetration(&dilated[j]) {
                    if deepest.is_none_or(|(d, _, _)| p.distance > d) {
                        deepest = Some((p.distance, i, j));
                    }
                }
            }
        }
        let Some((_, i, j)) = deepest else { break };
        iterations += 1;
        // cuts are sorted by id, so j holds the higher id
        let (fixed, mover) = if cuts[j].placement.pinned { (j, i) } else { (i, j) };
        let outline = cuts[mover].outline();
        let bbox = outline.bbox();
        let pushes = dilated[fixed].pushes_out(&dilated[mover]).unwrap_or_default();
        let step = pushes
            .iter()
            .map(|p| p.vector())
            .find(|v| sheet.contains(&Aabb2 { min: bbox.min + v, max: bbox.max + v }))
            .unwrap_or_else(|| {
                let v = pushes.first().map_or(Vec2::zeros(), |p| p.vector());
                v + sheet.clamp_offset(&Aabb2 { min: bbox.min + v, max: bbox.max + v })
            });
        let pushed = pushes_so_far.iter().filter(|p| **p == cuts[mover].part).count();
        let mut resolved = step.norm() > BOUNDS_EPS && pushed < MAX_PUSHES_PER_CUT;
        if resolved {
            pushes_so_far.push(cuts[mover].part);
            let pos = &mut cuts[mover].placement.position_mm;
            pos[0] += step.x;
            pos[1] += step.y;
            let now = kerf_dilate(&cuts[mover].outline(), kerf_mm);
            resolved = !dilated[fixed].overlaps(&now);
        }
        if !resolved {
            let others: Vec<Polygon> =
                cuts.iter().enumerate().filter(|(k, _)| *k != mover).map(|(_, c)| c.outline()).collect();
            let found = place_auto(sheet, kerf_mm, &others, &cuts[mover].footprint);
            if found.fits {
                cuts[mover].placement.position_mm = found.position_mm;
                cuts[mover].placement.rotation_deg = found.rotation_deg;
            } else if let Some(packed) = repack(sheet, kerf_mm, cuts) {
                for (c, placement) in cuts.iter_mut().zip(packed) {
                    if c.placement != placement {
                        c.placement = placement;
                        if !moved.contains(&c.part) {
                            moved.push(c.part);
                        }
                    }
                }
                continue;
            } else {
                stuck.push((cuts[i].part, cuts[j].part));
            }
        }
        if !moved.contains(&cuts[mover].part) {
            moved.push(cuts[mover].part);
        }
    }
    let residual_overlaps = {
        let dilated: Vec<Polygon> = cuts.iter().map(|c| kerf_dilate(&c.outline(), kerf_mm)).collect();
        (0..cuts.len())
            .flat_map(|i| (i + 1..cuts.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| dilated[i].overlaps(&dilated[j]))
            .count()
    };
    moved.sort();
    ResolveReport { iterations, moved, residual_overlaps }
}

/// Bottom-left-fill of every unpinned cut around the pinned ones, first in
/// id order and then largest first. `None` when neither order fits all.
fn repack(sheet: Sheet, kerf_mm: f64, cuts: &[PlanCut]) -> Option<Vec<Placement>> {
    let pinned: Vec<Polygon> = cuts.iter().filter(|c| c.placement.pinned).map(PlanCut::outline).collect();
    let mut by_id: Vec<usize> = (0..cuts.len()).filter(|&k| !cuts[k].placement.pinned).collect();
    by_id.sort_by_key(|&k| cuts[k].part);
    let mut by_area = by_id.clone();
    by_area.sort_by(|&a, &b| {
        cuts[b].footprint.area().total_cmp(&cuts[a].footprint.area()).then(cuts[a].part.cmp(&cuts[b].part))
    });
    'order: for order in [by_id, by_area] {
        let mut obstacles = pinned.clone();
        let mut out: Vec<Placement> = cuts.iter().map(|c| c.placement.clone()).collect();
        for k in order {
            let found = place_auto(sheet, kerf_mm, &obstacles, &cuts[k].footprint);
            if !found.fits {
                continue 'order;
            }
            out[k].position_mm = found.position_mm;
            out[k].rotation_deg = found.rotation_deg;
            obstacles.push(out[k].place(&cuts[k].footprint));
        }
        return Some(out);
    }
    None
}

/// Moves a footprint flush to any sheet edge within [`EDGE_SNAP_TOL_MM`].
pub fn snap_to_edges(sheet: Sheet, oriented_footprint: &Polygon, position: [f64; 2]) -> [f64; 2] {
    let b = oriented_footprint.bbox();
    let snap = |p: f64, size: f64, limit: f64| {
        if p.abs() <= EDGE_SNAP_TOL_MM {
            0.0
        } else if (limit - (p + size)).abs() <= EDGE_SNAP_TOL_MM {
            limit - size
        } else {
            p
        }
    };
    [snap(position[0], b.width(), sheet.length), snap(position[1], b.height(), sheet.width)]
}

/// Angle between the scrap grain and the part's long footprint axis,
/// folded into [0, 90].
pub fn grain_angle(grain_axis_deg: f64, rotation: QuarterTurn, long_axis_deg: f64) -> f64 {
    let relative = (grain_axis_deg - rotation.degrees() as f64).rem_euclid(180.0);
    let d = (relative - long_axis_deg).abs().rem_euclid(180.0);
    if d > 90.0 {
        180.0 - d
    } else {
        d
    }
}

/// Direction of a footprint's longer bounding side in its own frame: 0 for
/// x, 90 for y.
pub fn long_axis_deg(footprint: &Polygon) -> f64 {
    let b = footprint.bbox();
    if b.width() >= b.height() {
        0.0
    } else {
        90.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainAlignment {
    pub part: PartId,
    pub angle_deg: f64,
    pub warning: bool,
}

pub fn grain_alignment(
    part: PartId,
    grain_axis_deg: f64,
    rotation: QuarterTurn,
    footprint: &Polygon,
) -> GrainAlignment {
    let angle_deg = grain_angle(grain_axis_deg, rotation, long_axis_deg(footprint));
    GrainAlignment { part, angle_deg, warning: angle_deg > GRAIN_WARNING_DEG }
}

/// Per-scrap fit preview for reassigning a part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub scrap: ScrapId,
    pub fits: bool,
    pub position_mm: Option<[f64; 2]>,
    pub rotation_deg: Option<QuarterTurn>,
}

/// Side view of one placement within the scrap thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessSpan {
    pub part: PartId,
    pub z_min_mm: f64,
    pub z_max_mm: f64,
}
