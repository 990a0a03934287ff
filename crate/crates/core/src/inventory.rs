//! Registered scrap boards and material-usage accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Polygon, Vec2};
use crate::ids::ScrapId;

/// Procedural grain texture parameters. Only `axis_deg` affects engine
/// semantics; the rest is stored for the renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainSpec {
    /// Grain direction in the length×width face, 0 = along the length.
    pub axis_deg: f64,
    pub size: f64,
    pub wobble: f64,
    pub seed: i64,
}

impl Default for GrainSpec {
    fn default() -> Self {
        GrainSpec { axis_deg: 0.0, size: 1.0, wobble: 0.25, seed: 0 }
    }
}

impl GrainSpec {
    fn normalized(mut self) -> Result<Self> {
        if !self.axis_deg.is_finite() {
            return Err(Error::InvalidParameter("grain axis must be finite".into()));
        }
        if !(self.size > 0.0) || !(self.wobble > 0.0) {
            return Err(Error::InvalidParameter("grain size and wobble must be positive".into()));
        }
        self.axis_deg = normalize_half_turn(self.axis_deg);
        Ok(self)
    }
}

/// Folds an angle into [0, 180).
pub fn normalize_half_turn(deg: f64) -> f64 {
    let a = deg.rem_euclid(180.0);
    if a >= 180.0 {
        0.0
    } else {
        a
    }
}

/// Virtual twin of a physical scrap board. Dimensions are canonical:
/// length ≥ width ≥ thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scrap {
    pub id: ScrapId,
    pub length_mm: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
    pub material_kind: String,
    pub tag: Option<String>,
    pub grain: GrainSpec,
    pub color_rgb: [f64; 3],
    pub retired: bool,
}

impl Scrap {
    pub fn face_area(&self) -> f64 {
        self.length_mm * self.width_mm
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.length_mm, self.width_mm, self.thickness_mm]
    }
}

/// Sorts dimensions so length ≥ width ≥ thickness, rejecting non-positive input.
pub fn canonical_dims(dims: [f64; 3]) -> Result<[f64; 3]> {
    if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::NonPositiveDimension(dims));
    }
    let mut d = dims;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

fn check_color(c: [f64; 3]) -> Result<[f64; 3]> {
    if c.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(c)
    } else {
        Err(Error::InvalidParameter(format!("color components must lie in [0,1], got {c:?}")))
    }
}

/// Registration input for a new scrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewScrap {
    pub dims: [f64; 3],
    pub material_kind: String,
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub grain: Option<GrainSpec>,
    #[serde(default)]
    pub color_rgb: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GrainPatch {
    #[serde(default)]
    pub axis_deg: Option<f64>,
    #[serde(default)]
    pub size: Option<f64>,
    #[serde(default)]
    pub wobble: Option<f64>,
    #[serde(default)]
    pub seed: Option<i64>,
}

/// Partial update of a scrap. An empty `tag` string clears the tag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScrapPatch {
    #[serde(default)]
    pub dims: Option<[f64; 3]>,
    #[serde(default)]
    pub material_kind: Option<String>,
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub grain: Option<GrainPatch>,
    #[serde(default)]
    pub color_rgb: Option<[f64; 3]>,
    #[serde(default)]
    pub retired: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InventoryFilter {
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub material_kind: Option<String>,
    #[serde(default)]
    pub retired: Option<bool>,
}

impl InventoryFilter {
    pub fn matches(&self, s: &Scrap) -> bool {
        self.tag.as_ref().is_none_or(|t| s.tag.as_deref() == Some(t.as_str()))
            && self.material_kind.as_ref().is_none_or(|m| &s.material_kind == m)
            && self.retired.is_none_or(|r| s.retired == r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    scraps: BTreeMap<ScrapId, Scrap>,
    next_id: u64,
}

impl Default for Inventory {
    fn default() -> Self {
        Inventory { scraps: BTreeMap::new(), next_id: 1 }
    }
}

impl Inventory {
    pub fn register(&mut self, new: NewScrap) -> Result<&Scrap> {
        let [length_mm, width_mm, thickness_mm] = canonical_dims(new.dims)?;
        let grain = new.grain.unwrap_or_default().normalized()?;
        let color_rgb = check_color(new.color_rgb.unwrap_or([0.76, 0.60, 0.42]))?;
        let id = ScrapId(self.next_id);
        self.next_id += 1;
        let scrap = Scrap {
            id,
            length_mm,
            width_mm,
            thickness_mm,
            material_kind: new.material_kind,
            tag: new.tag.filter(|t| !t.is_empty()),
            grain,
            color_rgb,
            retired: false,
        };
        Ok(self.scraps.entry(id).or_insert(scrap))
    }

    /// Applies a patch atomically; the scrap is untouched on error.
    pub fn update(&mut self, id: ScrapId, patch: &ScrapPatch) -> Result<&Scrap> {
        let current = self.scraps.get(&id).ok_or(Error::UnknownScrap(id))?;
        let mut s = current.clone();
        if let Some(d) = patch.dims {
            [s.length_mm, s.width_mm, s.thickness_mm] = canonical_dims(d)?;
        }
        if let Some(m) = &patch.material_kind {
            s.material_kind = m.clone();
        }
        if let Some(t) = &patch.tag {
            s.tag = (!t.is_empty()).then(|| t.clone());
        }
        if let Some(g) = &patch.grain {
            let mut grain = s.grain.clone();
            if let Some(a) = g.axis_deg {
                grain.axis_deg = a;
            }
            if let Some(v) = g.size {
                grain.size = v;
            }
            if let Some(v) = g.wobble {
                grain.wobble = v;
            }
            if let Some(v) = g.seed {
                grain.seed = v;
            }
            s.grain = grain.normalized()?;
        }
        if let Some(c) = patch.color_rgb {
            s.color_rgb = check_color(c)?;
        }
        if let Some(r) = patch.retired {
            s.retired = r;
        }
        let slot = self.scraps.get_mut(&id).expect("checked above");
        *slot = s;
        Ok(slot)
    }

    pub fn remove(&mut self, id: ScrapId) -> Result<Scrap> {
        self.scraps.remove(&id).ok_or(Error::UnknownScrap(id))
    }

    pub fn get(&self, id: ScrapId) -> Result<&Scrap> {
        self.scraps.get(&id).ok_or(Error::UnknownScrap(id))
    }

    pub fn contains(&self, id: ScrapId) -> bool {
        self.scraps.contains_key(&id)
    }

    /// All scraps in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Scrap> {
        self.scraps.values()
    }

    pub fn len(&self) -> usize {
        self.scraps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scraps.is_empty()
    }

    pub fn next_id(&self) -> ScrapId {
        ScrapId(self.next_id)
    }
}

/// One inventory row as shown to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub scrap: Scrap,
    pub free_area_mm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrapUsage {
    pub scrap: ScrapId,
    pub face_area_mm2: f64,
    pub used_area_mm2: f64,
    pub used_fraction: f64,
    pub retired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub scraps: Vec<ScrapUsage>,
    /// Used area of each named assembly as a fraction of all active face area.
    pub groups: BTreeMap<String, f64>,
    pub overall_fraction: f64,
}

/// A placed, undilated cut footprint attributed to a scrap and optionally
/// to a named assembly.
pub struct UsedCut<'a> {
    pub scrap: ScrapId,
    pub outline: Polygon,
    pub assembly: Option<&'a str>,
}

/// Footprint area inside the scrap face. Overlapping cuts are counted once
/// each, so overlap-free plans give exact coverage.
pub(crate) fn used_area(scrap: &Scrap, outline: &Polygon) -> f64 {
    outline.clip_to_rect(Vec2::zeros(), Vec2::new(scrap.length_mm, scrap.width_mm)).area().max(0.0)
}

pub fn usage_report<'a>(inventory: &Inventory, cuts: impl IntoIterator<Item = UsedCut<'a>>) -> UsageReport {
    let mut used: BTreeMap<ScrapId, f64> = BTreeMap::new();
    let mut by_group: BTreeMap<String, f64> = BTreeMap::new();
    for cut in cuts {
        let Ok(scrap) = inventory.get(cut.scrap) else { continue };
        let a = used_area(scrap, &cut.outline);
        *used.entry(cut.scrap).or_default() += a;
        if let (Some(g), false) = (cut.assembly, scrap.retired) {
            *by_group.entry(g.to_string()).or_default() += a;
        }
    }
    let mut total_face = 0.0;
    let mut total_used = 0.0;
    let scraps = inventory
        .iter()
        .map(|s| {
            let face = s.face_area();
            let u = used.get(&s.id).copied().unwrap_or(0.0).min(face);
            if !s.retired {
                total_face += face;
                total_used += u;
            }
            ScrapUsage {
                scrap: s.id,
                face_area_mm2: face,
                used_area_mm2: u,
                used_fraction: (u / face).clamp(0.0, 1.0),
                retired: s.retired,
            }
        })
        .collect();
    let frac = |x: f64| if total_face > 0.0 { (x / total_face).clamp(0.0, 1.0) } else { 0.0 };
    UsageReport {
        scraps,
        groups: by_group.into_iter().map(|(k, v)| (k, frac(v))).collect(),
        overall_fraction: frac(total_used),
    }
}
