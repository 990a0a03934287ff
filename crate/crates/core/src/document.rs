//! The design document: inventory, parts, cut plans and scene, plus every
//! operation that edits them. Each mutating method either succeeds and
//! leaves all derived state (placements, violations, grain warnings)
//! consistent, or fails without changing anything.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assembly::{self, plan_snap, snap_rotation, Obstacle, Pose, SceneMesh, SceneTriangle, SnapSurface};
use crate::cutplan::{
    self, auto_resolve, grain_alignment, place_auto, plan_violations, snap_to_edges, CutPlan, FitReport,
    GrainAlignment, PackingMode, Placement, PlanCut, ResolveReport, Sheet, ThicknessSpan, Violation, ViolationKind,
    DEFAULT_KERF_MM,
};
use crate::error::{Error, Result};
use crate::geom::{Contact, Polygon};
use crate::ids::{GroupId, PartId, ScrapId};
use crate::inventory::{
    self, Inventory, InventoryEntry, InventoryFilter, NewScrap, Scrap, ScrapPatch, UsageReport, UsedCut,
};
use crate::part::{miter_check, Edge, Face, Hexahedron, MiterCheck, Part, Source};

pub const DOCUMENT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub kerf_blade_mm: f64,
    pub resaw_allowed: bool,
    pub rotation_snap: bool,
    pub scene_collision: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { kerf_blade_mm: DEFAULT_KERF_MM, resaw_allowed: false, rotation_snap: true, scene_collision: true }
    }
}

/// Arguments for creating a part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpawnSpec {
    /// Source scrap; `None` creates an unassigned part.
    #[serde(default)]
    pub scrap: Option<ScrapId>,
    /// Box size (length, width, thickness) in the scrap frame. Defaults to
    /// the whole scrap; required for unassigned parts.
    #[serde(default)]
    pub dims: Option<[f64; 3]>,
    /// Initial world position.
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub assembly: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub version: u64,
    pub settings: Settings,
    pub inventory: Inventory,
    pub parts: BTreeMap<PartId, Part>,
    pub plans: BTreeMap<ScrapId, CutPlan>,
    pub scene: Option<SceneMesh>,
    next_part_id: u64,
    next_group_id: u64,
    /// Derived; always equal to [`Document::detect_violations`].
    pub violations: Vec<Violation>,
    /// Derived; placements whose grain runs across the part.
    pub grain_warnings: Vec<GrainAlignment>,
}

impl Default for Document {
    fn default() -> Self {
        Document::new(Settings::default())
    }
}

impl Document {
    pub fn new(settings: Settings) -> Document {
        Document {
            version: DOCUMENT_VERSION,
            settings,
            inventory: Inventory::default(),
            parts: BTreeMap::new(),
            plans: BTreeMap::new(),
            scene: None,
            next_part_id: 1,
            next_group_id: 1,
            violations: Vec::new(),
            grain_warnings: Vec::new(),
        }
    }

    // ----- lookups -------------------------------------------------------

    pub fn part(&self, id: PartId) -> Result<&Part> {
        self.parts.get(&id).ok_or(Error::UnknownPart(id))
    }

    pub fn scrap(&self, id: ScrapId) -> Result<&Scrap> {
        self.inventory.get(id)
    }

    pub fn placement(&self, id: PartId) -> Result<&Placement> {
        let part = self.part(id)?;
        let scrap = part.source.scrap().ok_or(Error::UnknownPlacement(id))?;
        self.plans.get(&scrap).and_then(|p| p.placements.get(&id)).ok_or(Error::UnknownPlacement(id))
    }

    fn sheet(&self, scrap: ScrapId) -> Result<Sheet> {
        let s = self.scrap(scrap)?;
        Ok(Sheet { length: s.length_mm, width: s.width_mm })
    }

    pub fn footprint(&self, id: PartId) -> Result<Polygon> {
        Ok(self.part(id)?.vertices.footprint())
    }

    /// Footprint as placed on its scrap plan, without kerf.
    pub fn placed_outline(&self, id: PartId) -> Result<Polygon> {
        let placement = self.placement(id)?;
        Ok(placement.place(&self.footprint(id)?))
    }

    pub fn group_members(&self, group: GroupId) -> Vec<PartId> {
        self.parts.values().filter(|p| p.link_group == Some(group)).map(|p| p.id).collect()
    }

    /// Every link group with its members, in id order.
    pub fn link_groups(&self) -> BTreeMap<GroupId, Vec<PartId>> {
        let mut out: BTreeMap<GroupId, Vec<PartId>> = BTreeMap::new();
        for p in self.parts.values() {
            if let Some(g) = p.link_group {
                out.entry(g).or_default().push(p.id);
            }
        }
        out
    }

    pub fn plan_cuts(&self, scrap: ScrapId) -> Vec<PlanCut> {
        let Some(plan) = self.plans.get(&scrap) else { return Vec::new() };
        plan.placements
            .values()
            .filter_map(|pl| {
                let part = self.parts.get(&pl.part)?;
                Some(PlanCut { part: pl.part, footprint: part.vertices.footprint(), placement: pl.clone() })
            })
            .collect()
    }

    fn placed_outlines_except(&self, scrap: ScrapId, skip: Option<PartId>) -> Vec<Polygon> {
        self.plan_cuts(scrap).iter().filter(|c| Some(c.part) != skip).map(PlanCut::outline).collect()
    }

    // ----- inventory -----------------------------------------------------

    pub fn register_scrap(&mut self, new: NewScrap) -> Result<ScrapId> {
        let id = self.inventory.register(new)?.id;
        self.plans.insert(id, CutPlan::new(id, self.settings.kerf_blade_mm));
        self.settle(&BTreeSet::new());
        Ok(id)
    }

    /// Part geometry never changes here; affected parts only gain or lose
    /// derived flags.
    pub fn update_scrap(&mut self, id: ScrapId, patch: &ScrapPatch) -> Result<&Scrap> {
        self.inventory.update(id, patch)?;
        self.settle(&BTreeSet::from([id]));
        self.inventory.get(id)
    }

    /// Removes a scrap; its parts become unassigned.
    pub fn delete_scrap(&mut self, id: ScrapId) -> Result<()> {
        self.inventory.remove(id)?;
        self.plans.remove(&id);
        for p in self.parts.values_mut() {
            if p.source == Source::Scrap(id) {
                p.source = Source::Unassigned;
            }
        }
        self.settle(&BTreeSet::new());
        Ok(())
    }

    pub fn query_inventory(&self, filter: &InventoryFilter) -> Vec<InventoryEntry> {
        self.inventory
            .iter()
            .filter(|s| filter.matches(s))
            .map(|s| {
                let used: f64 = self.plan_cuts(s.id).iter().map(|c| inventory::used_area(s, &c.outline())).sum();
                InventoryEntry { scrap: s.clone(), free_area_mm2: (s.face_area() - used).max(0.0) }
            })
            .collect()
    }

    pub fn usage_report(&self) -> UsageReport {
        let cuts = self.plans.values().flat_map(|plan| {
            self.plan_cuts(plan.scrap).into_iter().map(|c| UsedCut {
                scrap: plan.scrap,
                outline: c.outline(),
                assembly: self.parts.get(&c.part).and_then(|p| p.assembly.as_deref()),
            })
        });
        inventory::usage_report(&self.inventory, cuts.collect::<Vec<_>>())
    }

    // ----- parts ---------------------------------------------------------

    fn alloc_part_id(&mut self) -> PartId {
        let id = PartId(self.next_part_id);
        self.next_part_id += 1;
        id
    }

    fn check_resaw(&self, id: PartId, source: Source, shape: &Hexahedron) -> Result<()> {
        if self.settings.resaw_allowed {
            return Ok(());
        }
        if let Source::Scrap(s) = source {
            if shape.extents()[2] != self.scrap(s)?.thickness_mm {
                return Err(Error::ResawViolation(id));
            }
        }
        Ok(())
    }

    pub fn spawn_part(&mut self, spec: SpawnSpec) -> Result<PartId> {
        let (source, dims) = match spec.scrap {
            Some(s) => {
                let scrap = self.scrap(s)?;
                (Source::Scrap(s), spec.dims.unwrap_or(scrap.dims()))
            }
            None => {
                let dims =
                    spec.dims.ok_or_else(|| Error::InvalidParameter("unassigned parts need dimensions".into()))?;
                (Source::Unassigned, dims)
            }
        };
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::NonPositiveDimension(dims));
        }
        let shape = Hexahedron::cuboid(dims);
        shape.validate()?;
        let id = PartId(self.next_part_id);
        self.check_resaw(id, source, &shape)?;
        self.alloc_part_id();
        let part = Part {
            id,
            source,
            vertices: shape,
            link_group: None,
            pose: Pose::at(spec.position.unwrap_or([0.0; 3])),
            assembly: spec.assembly,
            fabricated: false,
        };
        self.parts.insert(id, part);
        self.place_new(id)?;
        self.settle(&self.scraps_of(&[id]));
        Ok(id)
    }

    /// Gives a freshly assigned part a bottom-left-fill placement.
    fn place_new(&mut self, id: PartId) -> Result<()> {
        let part = self.part(id)?;
        let Some(scrap) = part.source.scrap() else { return Ok(()) };
        let footprint = part.vertices.footprint();
        let found = place_auto(
            self.sheet(scrap)?,
            self.plan(scrap)?.kerf_blade_mm,
            &self.placed_outlines_except(scrap, Some(id)),
            &footprint,
        );
        let placement = Placement {
            part: id,
            scrap,
            position_mm: found.position_mm,
            rotation_deg: found.rotation_deg,
            pinned: false,
        };
        self.plan_mut(scrap)?.placements.insert(id, placement);
        Ok(())
    }

    fn plan(&self, scrap: ScrapId) -> Result<&CutPlan> {
        self.plans.get(&scrap).ok_or(Error::UnknownScrap(scrap))
    }

    fn plan_mut(&mut self, scrap: ScrapId) -> Result<&mut CutPlan> {
        self.plans.get_mut(&scrap).ok_or(Error::UnknownScrap(scrap))
    }

    fn scraps_of(&self, ids: &[PartId]) -> BTreeSet<ScrapId> {
        ids.iter().filter_map(|id| self.parts.get(id)?.source.scrap()).collect()
    }

    /// Replaces the shape of a part and every member of its link group,
    /// after checking each member against its own scrap.
    fn reshape(&mut self, id: PartId, shape: Hexahedron) -> Result<()> {
        shape.validate()?;
        let members = match self.part(id)?.link_group {
            Some(g) => self.group_members(g),
            None => vec![id],
        };
        for m in &members {
            let p = self.part(*m)?;
            self.check_resaw(*m, p.source, &shape)?;
        }
        for m in &members {
            self.parts.get_mut(m).expect("member exists").vertices = shape.clone();
        }
        self.settle(&self.scraps_of(&members));
        Ok(())
    }

    /// Moves a face along its outward normal; positive `delta_mm` pulls
    /// outward, negative pushes inward.
    pub fn push_pull_face(&mut self, id: PartId, face: Face, delta_mm: f64) -> Result<&Part> {
        let part = self.part(id)?;
        if !delta_mm.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        if face.axis() == 2 && !self.settings.resaw_allowed && part.source.scrap().is_some() {
            return Err(Error::ResawViolation(id));
        }
        let shape = part.vertices.push_pull(face, delta_mm);
        self.reshape(id, shape)?;
        self.part(id)
    }

    /// Moves an edge along the base normal of `tilt`, one of its two faces.
    pub fn move_edge(&mut self, id: PartId, edge: Edge, tilt: Face, delta_mm: f64) -> Result<&Part> {
        if !delta_mm.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        let shape = self.part(id)?.vertices.move_edge(edge, tilt, delta_mm)?;
        self.reshape(id, shape)?;
        self.part(id)
    }

    pub fn miter_check(&self, id: PartId, edge: Edge, target_joint_deg: f64) -> Result<MiterCheck> {
        miter_check(&self.part(id)?.vertices, edge, target_joint_deg)
    }

    pub fn duplicate_part(&mut self, id: PartId, link: bool) -> Result<PartId> {
        let original = self.part(id)?.clone();
        let new_id = self.alloc_part_id();
        let group = if link {
            Some(match original.link_group {
                Some(g) => g,
                None => {
                    let g = GroupId(self.next_group_id);
                    self.next_group_id += 1;
                    self.parts.get_mut(&id).expect("exists").link_group = Some(g);
                    g
                }
            })
        } else {
            None
        };
        let copy = Part { id: new_id, link_group: group, fabricated: false, ..original };
        self.parts.insert(new_id, copy);
        self.place_new(new_id)?;
        self.settle(&self.scraps_of(&[new_id]));
        Ok(new_id)
    }

    /// Links congruent parts so later edits apply to all of them. Parts
    /// leave any previous group; groups left with one member dissolve.
    pub fn link_parts(&mut self, ids: &[PartId]) -> Result<GroupId> {
        let mut ids: Vec<PartId> = ids.to_vec();
        ids.sort();
        ids.dedup();
        if ids.len() < 2 {
            return Err(Error::InvalidParameter("linking needs at least two parts".into()));
        }
        let first = self.part(ids[0])?;
        for other in &ids[1..] {
            if self.part(*other)?.vertices != first.vertices {
                return Err(Error::IncongruentParts(ids[0], *other));
            }
        }
        let group = GroupId(self.next_group_id);
        self.next_group_id += 1;
        for id in &ids {
            self.parts.get_mut(id).expect("checked").link_group = Some(group);
        }
        self.dissolve_singletons();
        self.settle(&BTreeSet::new());
        Ok(group)
    }

    pub fn unlink_part(&mut self, id: PartId) -> Result<()> {
        self.parts.get_mut(&id).ok_or(Error::UnknownPart(id))?.link_group = None;
        self.dissolve_singletons();
        self.settle(&BTreeSet::new());
        Ok(())
    }

    fn dissolve_singletons(&mut self) {
        for (_, members) in self.link_groups() {
            if members.len() < 2 {
                for m in members {
                    self.parts.get_mut(&m).expect("member").link_group = None;
                }
            }
        }
    }

    pub fn delete_part(&mut self, id: PartId) -> Result<()> {
        let part = self.parts.remove(&id).ok_or(Error::UnknownPart(id))?;
        if let Some(s) = part.source.scrap() {
            if let Some(plan) = self.plans.get_mut(&s) {
                plan.placements.remove(&id);
            }
        }
        self.dissolve_singletons();
        self.settle(&part.source.scrap().into_iter().collect());
        Ok(())
    }

    pub fn set_part_assembly(&mut self, id: PartId, assembly: Option<String>) -> Result<()> {
        self.parts.get_mut(&id).ok_or(Error::UnknownPart(id))?.assembly = assembly.filter(|a| !a.is_empty());
        Ok(())
    }

    pub fn set_fabricated(&mut self, id: PartId, fabricated: bool) -> Result<()> {
        self.parts.get_mut(&id).ok_or(Error::UnknownPart(id))?.fabricated = fabricated;
        Ok(())
    }

    // ----- cut plans -----------------------------------------------------

    /// Moves a cut on its plan, snapping to scrap edges within tolerance.
    /// The cut becomes pinned.
    pub fn move_cut(&mut self, id: PartId, position_mm: [f64; 2]) -> Result<&Placement> {
        if position_mm.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("position must be finite".into()));
        }
        let placement = self.placement(id)?.clone();
        let sheet = self.sheet(placement.scrap)?;
        let shape = cutplan::oriented(&self.footprint(id)?, placement.rotation_deg);
        let snapped = snap_to_edges(sheet, &shape, position_mm);
        let pl = self.plan_mut(placement.scrap)?.placements.get_mut(&id).expect("placement exists");
        pl.position_mm = snapped;
        pl.pinned = true;
        self.settle(&BTreeSet::from([placement.scrap]));
        self.placement(id)
    }

    /// Turns a cut a further 90° about its bounding-box minimum corner.
    pub fn rotate_cut(&mut self, id: PartId) -> Result<&Placement> {
        let placement = self.placement(id)?.clone();
        let pl = self.plan_mut(placement.scrap)?.placements.get_mut(&id).expect("placement exists");
        pl.rotation_deg = pl.rotation_deg.next();
        pl.pinned = true;
        self.settle(&BTreeSet::from([placement.scrap]));
        self.placement(id)
    }

    pub fn set_plan_mode(&mut self, scrap: ScrapId, mode: PackingMode) -> Result<()> {
        self.plan_mut(scrap)?.mode = mode;
        self.settle(&BTreeSet::from([scrap]));
        Ok(())
    }

    /// Runs overlap separation once, whatever the plan's mode.
    pub fn resolve_plan(&mut self, scrap: ScrapId) -> Result<ResolveReport> {
        let report = self.resolve_scrap(scrap)?;
        self.settle(&BTreeSet::new());
        Ok(report)
    }

    fn resolve_scrap(&mut self, scrap: ScrapId) -> Result<ResolveReport> {
        let sheet = self.sheet(scrap)?;
        let kerf = self.plan(scrap)?.kerf_blade_mm;
        let mut cuts = self.plan_cuts(scrap);
        let report = auto_resolve(sheet, kerf, &mut cuts);
        let plan = self.plan_mut(scrap)?;
        for c in cuts {
            plan.placements.insert(c.part, c.placement);
        }
        Ok(report)
    }

    /// Where the part would land on each candidate scrap. Nothing changes.
    pub fn reassign_preview(&self, id: PartId, candidates: &[ScrapId]) -> Result<Vec<FitReport>> {
        let footprint = self.footprint(id)?;
        candidates
            .iter()
            .map(|&s| {
                let found = place_auto(
                    self.sheet(s)?,
                    self.plan(s)?.kerf_blade_mm,
                    &self.placed_outlines_except(s, Some(id)),
                    &footprint,
                );
                Ok(FitReport {
                    scrap: s,
                    fits: found.fits,
                    position_mm: found.fits.then_some(found.position_mm),
                    rotation_deg: found.fits.then_some(found.rotation_deg),
                })
            })
            .collect()
    }

    /// Moves a part to another scrap (or to no scrap). A thickness mismatch
    /// is reported as a violation rather than rejected.
    pub fn reassign(&mut self, id: PartId, target: Option<ScrapId>) -> Result<Option<&Placement>> {
        let part = self.part(id)?;
        if let Some(t) = target {
            self.scrap(t)?;
        }
        let old = part.source.scrap();
        if let Some(s) = old {
            if let Some(plan) = self.plans.get_mut(&s) {
                plan.placements.remove(&id);
            }
        }
        let part = self.parts.get_mut(&id).expect("exists");
        part.source = target.map_or(Source::Unassigned, Source::Scrap);
        self.place_new(id)?;
        let touched: BTreeSet<ScrapId> = old.into_iter().chain(target).collect();
        self.settle(&touched);
        Ok(target.and_then(|t| self.plans.get(&t)?.placements.get(&id)))
    }

    pub fn grain_alignment(&self, id: PartId) -> Result<GrainAlignment> {
        let part = self.part(id)?;
        let scrap = part.source.scrap().ok_or(Error::UnassignedPart(id))?;
        let placement = self.placement(id)?;
        Ok(grain_alignment(id, self.scrap(scrap)?.grain.axis_deg, placement.rotation_deg, &part.vertices.footprint()))
    }

    pub fn thickness_view(&self, scrap: ScrapId) -> Result<Vec<ThicknessSpan>> {
        self.plan(scrap)?;
        Ok(self
            .plan_cuts(scrap)
            .iter()
            .map(|c| {
                let (lo, hi) = self.parts[&c.part].vertices.bounds();
                ThicknessSpan { part: c.part, z_min_mm: lo[2], z_max_mm: hi[2] }
            })
            .collect())
    }

    // ----- settings ------------------------------------------------------

    pub fn set_kerf(&mut self, blade_mm: f64) -> Result<()> {
        if !(blade_mm > 0.0) || !blade_mm.is_finite() {
            return Err(Error::InvalidParameter(format!("kerf must be positive, got {blade_mm}")));
        }
        self.settings.kerf_blade_mm = blade_mm;
        for plan in self.plans.values_mut() {
            plan.kerf_blade_mm = blade_mm;
        }
        let all: BTreeSet<ScrapId> = self.plans.keys().copied().collect();
        self.settle(&all);
        Ok(())
    }

    pub fn set_resaw_allowed(&mut self, allowed: bool) {
        self.settings.resaw_allowed = allowed;
        self.settle(&BTreeSet::new());
    }

    pub fn set_rotation_snap(&mut self, enabled: bool) {
        self.settings.rotation_snap = enabled;
    }

    pub fn set_scene_collision(&mut self, enabled: bool) {
        self.settings.scene_collision = enabled;
    }

    // ----- assembly ------------------------------------------------------

    /// Replaces the scene mesh. Existing poses are not re-checked.
    pub fn load_scene_mesh(&mut self, triangles: Vec<SceneTriangle>) -> Result<usize> {
        let mesh = SceneMesh::new(triangles)?;
        let n = mesh.triangles.len();
        self.scene = Some(mesh);
        Ok(n)
    }

    pub fn clear_scene_mesh(&mut self) {
        self.scene = None;
    }

    fn with_obstacles<T>(&self, moving: PartId, f: impl FnOnce(&[Obstacle<'_>]) -> T) -> T {
        let solids: Vec<_> = self.parts.values().filter(|p| p.id != moving).map(Part::world_solid).collect();
        let mut obstacles: Vec<Obstacle<'_>> = solids.iter().map(Obstacle::Solid).collect();
        if self.settings.scene_collision {
            if let Some(scene) = &self.scene {
                obstacles.extend(scene.triangles.iter().map(Obstacle::Surface));
            }
        }
        f(&obstacles)
    }

    fn settle_pose(&mut self, id: PartId, target: Pose) -> Result<&Pose> {
        let local = self.part(id)?.vertices.solid();
        let moving = target.transform_solid(&local);
        let resolution = self
            .with_obstacles(id, |obs| assembly::resolve(&moving, obs))
            .ok_or(Error::UnresolvedCollision(id, assembly::MAX_RESOLVE_ITERATIONS))?;
        let part = self.parts.get_mut(&id).expect("exists");
        part.pose = target.translated(&resolution.translation);
        Ok(&part.pose)
    }

    /// Grab-and-release: the part goes to the target pose and is pushed out
    /// of anything it penetrates. Only this part moves.
    pub fn propose_move(&mut self, id: PartId, translation: [f64; 3], euler_deg: [f64; 3]) -> Result<&Pose> {
        self.part(id)?;
        if translation.iter().chain(euler_deg.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("pose must be finite".into()));
        }
        let euler = if self.settings.rotation_snap { snap_rotation(euler_deg) } else { euler_deg };
        self.settle_pose(id, Pose::from_euler(translation, euler))
    }

    /// Lays a part face flat against the nearest facing scene triangle or
    /// other part face.
    pub fn snap_to_surface(&mut self, id: PartId, face: Face) -> Result<&Pose> {
        let part = self.part(id)?;
        let pose = part.pose.clone();
        let normal = pose.matrix() * part.vertices.face_normal(face);
        let centroid = pose.apply(&part.vertices.face_centroid(face));
        let mut candidates: Vec<SnapSurface> = Vec::new();
        if let Some(scene) = &self.scene {
            candidates.extend(scene.triangles.iter().map(SnapSurface::from_triangle));
        }
        for other in self.parts.values().filter(|p| p.id != id) {
            for f in Face::ALL {
                let pts = f.corners().iter().map(|&i| other.pose.apply(&other.vertices.corner(i))).collect();
                candidates.push(SnapSurface::from_loop(pts));
            }
        }
        let motion = plan_snap(&normal, &centroid, &candidates).ok_or(Error::NoSnapTarget(id))?;
        let target = pose.rotated_about(&motion.rotation, &motion.pivot).translated(&motion.translation);
        self.settle_pose(id, target)
    }

    /// Oriented bounding dimensions from local geometry.
    pub fn measure_part(&self, id: PartId) -> Result<[f64; 3]> {
        Ok(self.part(id)?.vertices.extents())
    }

    pub fn intersection_test(&self, a: PartId, b: PartId) -> Result<Contact> {
        Ok(self.part(a)?.world_solid().contact(&self.part(b)?.world_solid()))
    }

    // ----- derived state -------------------------------------------------

    /// Runs auto-resolve on touched plans in auto mode, then recomputes all
    /// derived state.
    fn settle(&mut self, touched: &BTreeSet<ScrapId>) {
        for s in touched {
            if self.plans.get(s).is_some_and(|p| p.mode == PackingMode::AutoResolve) {
                let _ = self.resolve_scrap(*s);
            }
        }
        self.violations = self.detect_violations();
        self.grain_warnings = self.detect_grain_warnings();
    }

    /// Every violation, recomputed from scratch and sorted.
    pub fn detect_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for p in self.parts.values() {
            if let Err(e) = p.vertices.validate() {
                out.push(Violation {
                    kind: ViolationKind::InvalidGeometry,
                    parts: vec![p.id],
                    scrap: p.source.scrap(),
                    detail: e.to_string(),
                });
            }
            let Some(s) = p.source.scrap() else { continue };
            let Ok(scrap) = self.scrap(s) else { continue };
            let (lo, hi) = p.vertices.bounds();
            if !self.settings.resaw_allowed && hi[2] - lo[2] != scrap.thickness_mm {
                out.push(Violation {
                    kind: ViolationKind::ResawViolation,
                    parts: vec![p.id],
                    scrap: Some(s),
                    detail: format!("{} is {} mm thick on a {} mm scrap", p.id, hi[2] - lo[2], scrap.thickness_mm),
                });
            } else if self.settings.resaw_allowed && hi[2] - lo[2] > scrap.thickness_mm {
                out.push(Violation {
                    kind: ViolationKind::OutOfBounds,
                    parts: vec![p.id],
                    scrap: Some(s),
                    detail: format!("{} is thicker than scrap #{}", p.id, s),
                });
            }
        }
        for plan in self.plans.values() {
            let Ok(sheet) = self.sheet(plan.scrap) else { continue };
            out.extend(plan_violations(plan.scrap, sheet, plan.kerf_blade_mm, &self.plan_cuts(plan.scrap)));
        }
        out.sort();
        out.dedup();
        out
    }

    fn detect_grain_warnings(&self) -> Vec<GrainAlignment> {
        self.plans
            .values()
            .flat_map(|plan| plan.placements.keys())
            .filter_map(|id| self.grain_alignment(*id).ok())
            .filter(|g| g.warning)
            .collect()
    }

    /// Recomputes derived fields, e.g. after loading.
    pub fn refresh_derived(&mut self) {
        self.violations = self.detect_violations();
        self.grain_warnings = self.detect_grain_warnings();
    }

    /// Structural checks for documents read from disk.
    pub fn check_integrity(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SchemaViolation(m));
        if self.version != DOCUMENT_VERSION {
            return bad(format!("unsupported document version {}", self.version));
        }
        for (id, p) in &self.parts {
            if p.id != *id {
                return bad(format!("part key {id} holds part {}", p.id));
            }
            if p.id.0 >= self.next_part_id {
                return bad(format!("part {} beyond id counter", p.id));
            }
            if let Some(s) = p.source.scrap() {
                if !self.inventory.contains(s) {
                    return bad(format!("{} references missing scrap #{s}", p.id));
                }
                if !self.plans.get(&s).is_some_and(|pl| pl.placements.contains_key(id)) {
                    return bad(format!("{} has no placement", p.id));
                }
            }
            if p.pose.orthonormality_error() > 1e-9 {
                return bad(format!("{} has a non-orthonormal rotation", p.id));
            }
        }
        for s in self.inventory.iter() {
            if s.id.0 >= self.inventory.next_id().0 {
                return bad(format!("scrap #{} beyond id counter", s.id));
            }
            if !(s.length_mm >= s.width_mm && s.width_mm >= s.thickness_mm && s.thickness_mm > 0.0) {
                return bad(format!("scrap #{} dimensions are not canonical", s.id));
            }
            if !self.plans.contains_key(&s.id) {
                return bad(format!("scrap #{} has no cut plan", s.id));
            }
        }
        for (sid, plan) in &self.plans {
            if plan.scrap != *sid || !self.inventory.contains(*sid) {
                return bad(format!("plan for missing scrap #{sid}"));
            }
            if !(plan.kerf_blade_mm > 0.0) {
                return bad(format!("plan #{sid} has non-positive kerf"));
            }
            for (pid, pl) in &plan.placements {
                if pl.part != *pid || pl.scrap != *sid {
                    return bad(format!("placement key mismatch for {pid}"));
                }
                if self.parts.get(pid).and_then(|p| p.source.scrap()) != Some(*sid) {
                    return bad(format!("placement for {pid} on #{sid} does not match its part"));
                }
            }
        }
        if let Some(scene) = &self.scene {
            SceneMesh::new(scene.triangles.clone()).map_err(|e| Error::SchemaViolation(e.to_string()))?;
        }
        Ok(())
    }
}

/// Separating-axis test between two parts at arbitrary poses.
pub fn intersection_test(a: &Part, pose_a: &Pose, b: &Part, pose_b: &Pose) -> Contact {
    pose_a.transform_solid(&a.vertices.solid()).contact(&pose_b.transform_solid(&b.vertices.solid()))
}
