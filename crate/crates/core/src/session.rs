//! Command application, history, undo/redo, replay and state digests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::assembly::{SceneMesh, SceneTriangle};
use crate::cutplan::{CutPlan, GrainAlignment, PackingMode, Placement, Violation};
use crate::document::{Document, Settings, SpawnSpec};
use crate::error::{Error, Result};
use crate::ids::{PartId, ScrapId};
use crate::inventory::{NewScrap, Scrap, ScrapPatch};
use crate::part::{Edge, Face, Part};

/// Undo snapshots kept per session.
pub const UNDO_DEPTH: usize = 1024;

/// One document mutation. Serialized with a `cmd` tag, e.g.
/// `{"cmd":"push_pull_face","part":1,"face":"+x","delta_mm":-200}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum DesignCommand {
    RegisterScrap {
        scrap: NewScrap,
    },
    UpdateScrap {
        scrap: ScrapId,
        patch: ScrapPatch,
    },
    DeleteScrap {
        scrap: ScrapId,
    },
    SpawnPart {
        #[serde(flatten)]
        spec: SpawnSpec,
    },
    PushPullFace {
        part: PartId,
        face: Face,
        delta_mm: f64,
    },
    MoveEdge {
        part: PartId,
        edge: Edge,
        axis: Face,
        delta_mm: f64,
    },
    DuplicatePart {
        part: PartId,
        #[serde(default)]
        link: bool,
    },
    LinkParts {
        parts: Vec<PartId>,
    },
    UnlinkPart {
        part: PartId,
    },
    DeletePart {
        part: PartId,
    },
    SetPartAssembly {
        part: PartId,
        assembly: Option<String>,
    },
    SetFabricated {
        part: PartId,
        fabricated: bool,
    },
    MoveCut {
        part: PartId,
        position_mm: [f64; 2],
    },
    RotateCut {
        part: PartId,
    },
    SetPlanMode {
        scrap: ScrapId,
        mode: PackingMode,
    },
    ResolvePlan {
        scrap: ScrapId,
    },
    Reassign {
        part: PartId,
        scrap: Option<ScrapId>,
    },
    SetKerf {
        blade_mm: f64,
    },
    SetResawAllowed {
        allowed: bool,
    },
    SetRotationSnap {
        enabled: bool,
    },
    SetSceneCollision {
        enabled: bool,
    },
    LoadSceneMesh {
        triangles: Vec<SceneTriangle>,
    },
    ClearSceneMesh,
    ProposeMove {
        part: PartId,
        translation: [f64; 3],
        #[serde(default)]
        euler_deg: [f64; 3],
    },
    SnapToSurface {
        part: PartId,
        face: Face,
    },
    Undo,
    Redo,
}

impl DesignCommand {
    /// The `cmd` tag.
    pub fn name(&self) -> String {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.get("cmd").and_then(Value::as_str).unwrap_or("unknown").to_string(),
            _ => "unknown".to_string(),
        }
    }
}

/// A recorded command. Malformed input is kept verbatim so replay
/// reproduces the same sequence numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub command: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventError {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for EventError {
    fn from(e: &Error) -> Self {
        EventError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

/// Entities that changed. Upserts carry the full new value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scraps: Vec<Scrap>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_scraps: Vec<ScrapId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Part>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_parts: Vec<PartId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<CutPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_plans: Vec<ScrapId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<Settings>,
    /// Present when the scene changed; holds the new mesh or null.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Option<SceneMesh>>,
}

fn diff_maps<K: Ord + Copy, V: Clone + PartialEq>(before: &BTreeMap<K, V>, after: &BTreeMap<K, V>) -> (Vec<V>, Vec<K>) {
    let changed = after.iter().filter(|(k, v)| before.get(k) != Some(v)).map(|(_, v)| v.clone()).collect();
    let removed = before.keys().filter(|k| !after.contains_key(k)).copied().collect();
    (changed, removed)
}

impl Delta {
    pub fn between(before: &Document, after: &Document) -> Delta {
        let scraps_before: BTreeMap<ScrapId, Scrap> = before.inventory.iter().map(|s| (s.id, s.clone())).collect();
        let scraps_after: BTreeMap<ScrapId, Scrap> = after.inventory.iter().map(|s| (s.id, s.clone())).collect();
        let (scraps, removed_scraps) = diff_maps(&scraps_before, &scraps_after);
        let (parts, removed_parts) = diff_maps(&before.parts, &after.parts);
        let (plans, removed_plans) = diff_maps(&before.plans, &after.plans);
        Delta {
            scraps,
            removed_scraps,
            parts,
            removed_parts,
            plans,
            removed_plans,
            settings: (before.settings != after.settings).then(|| after.settings.clone()),
            scene: (before.scene != after.scene).then(|| after.scene.clone()),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Delta::default()
    }
}

/// Outcome of one command, broadcast to every reader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub name: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EventError>,
    /// Command-specific result, e.g. the id of a new part.
    #[serde(default)]
    pub result: Value,
    pub delta: Delta,
    pub violations: Vec<Violation>,
    pub grain_warnings: Vec<GrainAlignment>,
}

/// A document together with its command log and undo stacks.
#[derive(Debug, Clone, Default)]
pub struct Session {
    doc: Document,
    history: Vec<LogEntry>,
    undo: Vec<Document>,
    redo: Vec<Document>,
}

impl Session {
    pub fn new() -> Session {
        Session::default()
    }

    /// A session around a loaded document. Undo starts empty.
    pub fn from_parts(doc: Document, history: Vec<LogEntry>) -> Session {
        Session { doc, history, undo: Vec::new(), redo: Vec::new() }
    }

    pub fn document(&self) -> &Document {
        &self.doc
    }

    pub fn history(&self) -> &[LogEntry] {
        &self.history
    }

    pub fn next_seq(&self) -> u64 {
        self.history.len() as u64 + 1
    }

    pub fn can_undo(&self) -> bool {
        !self.undo.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.redo.is_empty()
    }

    pub fn digest(&self) -> String {
        digest(&self.doc)
    }

    /// Parses and applies a JSON command. Anything unparsable still
    /// consumes a sequence number and yields a `MalformedCommand` event.
    pub fn apply_value(&mut self, raw: Value) -> Event {
        let seq = self.next_seq();
        self.history.push(LogEntry { seq, command: raw.clone() });
        match serde_json::from_value::<DesignCommand>(raw.clone()) {
            Ok(cmd) => self.run(seq, &cmd),
            Err(e) => {
                let name = raw.get("cmd").and_then(Value::as_str).unwrap_or("unknown").to_string();
                let err = Error::MalformedCommand(e.to_string());
                self.event(seq, name, Err(err), Delta::default())
            }
        }
    }

    pub fn apply_json(&mut self, text: &str) -> Event {
        match serde_json::from_str::<Value>(text) {
            Ok(v) => self.apply_value(v),
            Err(e) => {
                let seq = self.next_seq();
                self.history.push(LogEntry { seq, command: Value::String(text.to_string()) });
                self.event(seq, "unknown".into(), Err(Error::MalformedCommand(e.to_string())), Delta::default())
            }
        }
    }

    pub fn apply(&mut self, cmd: DesignCommand) -> Event {
        let seq = self.next_seq();
        let raw = serde_json::to_value(&cmd).expect("commands serialize");
        self.history.push(LogEntry { seq, command: raw });
        self.run(seq, &cmd)
    }

    pub fn undo(&mut self) -> Event {
        self.apply(DesignCommand::Undo)
    }

    pub fn redo(&mut self) -> Event {
        self.apply(DesignCommand::Redo)
    }

    fn run(&mut self, seq: u64, cmd: &DesignCommand) -> Event {
        let name = cmd.name();
        match cmd {
            DesignCommand::Undo => {
                let Some(prev) = self.undo.pop() else {
                    return self.event(seq, name, Err(Error::NothingToUndo), Delta::default());
                };
                let current = std::mem::replace(&mut self.doc, prev);
                let delta = Delta::between(&current, &self.doc);
                self.redo.push(current);
                self.event(seq, name, Ok(Value::Null), delta)
            }
            DesignCommand::Redo => {
                let Some(next) = self.redo.pop() else {
                    return self.event(seq, name, Err(Error::NothingToRedo), Delta::default());
                };
                let current = std::mem::replace(&mut self.doc, next);
                let delta = Delta::between(&current, &self.doc);
                self.push_undo(current);
                self.event(seq, name, Ok(Value::Null), delta)
            }
            _ => {
                let before = self.doc.clone();
                match execute(&mut self.doc, cmd) {
                    Ok(result) => {
                        let delta = Delta::between(&before, &self.doc);
                        self.push_undo(before);
                        self.redo.clear();
                        self.event(seq, name, Ok(result), delta)
                    }
                    Err(e) => {
                        self.doc = before;
                        self.event(seq, name, Err(e), Delta::default())
                    }
                }
            }
        }
    }

    fn push_undo(&mut self, doc: Document) {
        if self.undo.len() == UNDO_DEPTH {
            self.undo.remove(0);
        }
        self.undo.push(doc);
    }

    fn event(&self, seq: u64, name: String, outcome: Result<Value>, delta: Delta) -> Event {
        let (ok, error, result) = match outcome {
            Ok(v) => (true, None, v),
            Err(e) => (false, Some(EventError::from(&e)), Value::Null),
        };
        Event {
            seq,
            name,
            ok,
            error,
            result,
            delta,
            violations: self.doc.violations.clone(),
            grain_warnings: self.doc.grain_warnings.clone(),
        }
    }

    /// Re-applies a log from an empty document.
    pub fn replay_log(entries: &[LogEntry]) -> Session {
        let mut s = Session::new();
        for e in entries {
            s.apply_value(e.command.clone());
        }
        s
    }

    /// Runs a script of commands, stopping at the first failure.
    pub fn run_script(commands: &[Value]) -> Result<Session, ScriptError> {
        let mut s = Session::new();
        for (i, c) in commands.iter().enumerate() {
            let ev = s.apply_value(c.clone());
            if let Some(error) = ev.error {
                return Err(ScriptError { index: i, name: ev.name, error });
            }
        }
        Ok(s)
    }
}

/// A failed step while running a script.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptError {
    pub index: usize,
    pub name: String,
    pub error: EventError,
}

impl std::fmt::Display for ScriptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "command {} ({}) failed: {}: {}", self.index + 1, self.name, self.error.kind, self.error.message)
    }
}

impl std::error::Error for ScriptError {}

fn id_json<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Dispatches one command to the document.
pub fn execute(doc: &mut Document, cmd: &DesignCommand) -> Result<Value> {
    use DesignCommand as C;
    Ok(match cmd {
        C::RegisterScrap { scrap } => json!({ "scrap": doc.register_scrap(scrap.clone())? }),
        C::UpdateScrap { scrap, patch } => id_json(doc.update_scrap(*scrap, patch)?),
        C::DeleteScrap { scrap } => {
            doc.delete_scrap(*scrap)?;
            Value::Null
        }
        C::SpawnPart { spec } => {
            let id = doc.spawn_part(spec.clone())?;
            json!({ "part": id, "placement": doc.placement(id).ok() })
        }
        C::PushPullFace { part, face, delta_mm } => id_json(doc.push_pull_face(*part, *face, *delta_mm)?),
        C::MoveEdge { part, edge, axis, delta_mm } => id_json(doc.move_edge(*part, *edge, *axis, *delta_mm)?),
        C::DuplicatePart { part, link } => json!({ "part": doc.duplicate_part(*part, *link)? }),
        C::LinkParts { parts } => json!({ "group": doc.link_parts(parts)? }),
        C::UnlinkPart { part } => {
            doc.unlink_part(*part)?;
            Value::Null
        }
        C::DeletePart { part } => {
            doc.delete_part(*part)?;
            Value::Null
        }
        C::SetPartAssembly { part, assembly } => {
            doc.set_part_assembly(*part, assembly.clone())?;
            Value::Null
        }
        C::SetFabricated { part, fabricated } => {
            doc.set_fabricated(*part, *fabricated)?;
            Value::Null
        }
        C::MoveCut { part, position_mm } => id_json(doc.move_cut(*part, *position_mm)?),
        C::RotateCut { part } => id_json(doc.rotate_cut(*part)?),
        C::SetPlanMode { scrap, mode } => {
            doc.set_plan_mode(*scrap, *mode)?;
            Value::Null
        }
        C::ResolvePlan { scrap } => id_json(doc.resolve_plan(*scrap)?),
        C::Reassign { part, scrap } => id_json(doc.reassign(*part, *scrap)?.cloned()),
        C::SetKerf { blade_mm } => {
            doc.set_kerf(*blade_mm)?;
            Value::Null
        }
        C::SetResawAllowed { allowed } => {
            doc.set_resaw_allowed(*allowed);
            Value::Null
        }
        C::SetRotationSnap { enabled } => {
            doc.set_rotation_snap(*enabled);
            Value::Null
        }
        C::SetSceneCollision { enabled } => {
            doc.set_scene_collision(*enabled);
            Value::Null
        }
        C::LoadSceneMesh { triangles } => json!({ "triangles": doc.load_scene_mesh(triangles.clone())? }),
        C::ClearSceneMesh => {
            doc.clear_scene_mesh();
            Value::Null
        }
        C::ProposeMove { part, translation, euler_deg } => {
            id_json(doc.propose_move(*part, *translation, *euler_deg)?)
        }
        C::SnapToSurface { part, face } => id_json(doc.snap_to_surface(*part, *face)?),
        C::Undo | C::Redo => {
            return Err(Error::MalformedCommand("undo and redo need a session".into()));
        }
    })
}

/// Every placement across all plans, ordered by scrap then part.
pub fn all_placements(doc: &Document) -> Vec<&Placement> {
    doc.plans.values().flat_map(|p| p.placements.values()).collect()
}

/// The canonical text hashed by [`digest`]: JSON with keys sorted and
/// numbers in shortest round-trip form.
pub fn canonical_state(doc: &Document) -> String {
    let state = json!({
        "parts": doc.parts,
        "placements": all_placements(doc),
        "violations": doc.violations,
    });
    canonical_json(&state)
}

/// Serializes with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let sorted: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sort(v))).collect();
                Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sort(v)).expect("values serialize")
}

/// SHA-256 of the canonical state, hex encoded.
pub fn digest(doc: &Document) -> String {
    hex::encode(Sha256::digest(canonical_state(doc).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scrap_cmd(dims: [f64; 3]) -> DesignCommand {
        DesignCommand::RegisterScrap {
            scrap: NewScrap { dims, material_kind: "pine".into(), tag: None, grain: None, color_rgb: None },
        }
    }

    #[test]
    fn command_json_shape() {
        let c: DesignCommand =
            serde_json::from_str(r#"{"cmd":"push_pull_face","part":1,"face":"+x","delta_mm":-200}"#).unwrap();
        assert_eq!(c, DesignCommand::PushPullFace { part: PartId(1), face: Face::PosX, delta_mm: -200.0 });
        assert_eq!(c.name(), "push_pull_face");
        let s: DesignCommand = serde_json::from_str(r#"{"cmd":"spawn_part","scrap":1}"#).unwrap();
        assert_eq!(s, DesignCommand::SpawnPart { spec: SpawnSpec { scrap: Some(ScrapId(1)), ..Default::default() } });
    }

    #[test]
    fn unknown_command_is_malformed_and_sequenced() {
        let mut s = Session::new();
        let e = s.apply_json(r#"{"cmd":"frobnicate"}"#);
        assert!(!e.ok);
        assert_eq!(e.error.unwrap().kind, "MalformedCommand");
        assert_eq!(e.seq, 1);
        assert_eq!(e.name, "frobnicate");
        let e2 = s.apply_json("not json");
        assert_eq!(e2.seq, 2);
        assert_eq!(s.history().len(), 2);
    }

    #[test]
    fn failed_command_leaves_document() {
        let mut s = Session::new();
        s.apply(scrap_cmd([1000.0, 1000.0, 20.0]));
        s.apply(DesignCommand::SpawnPart { spec: SpawnSpec { scrap: Some(ScrapId(1)), ..Default::default() } });
        let before = s.document().clone();
        let e = s.apply(DesignCommand::PushPullFace { part: PartId(1), face: Face::PosX, delta_mm: -1000.0 });
        assert_eq!(e.error.unwrap().kind, "DegenerateGeometry");
        assert!(e.delta.is_empty());
        assert_eq!(*s.document(), before);
    }

    #[test]
    fn undo_redo() {
        let mut s = Session::new();
        assert_eq!(s.undo().error.unwrap().kind, "NothingToUndo");
        assert_eq!(s.redo().error.unwrap().kind, "NothingToRedo");
        s.apply(scrap_cmd([1000.0, 1000.0, 20.0]));
        s.apply(DesignCommand::SpawnPart { spec: SpawnSpec { scrap: Some(ScrapId(1)), ..Default::default() } });
        let before = s.document().clone();
        s.apply(DesignCommand::PushPullFace { part: PartId(1), face: Face::PosX, delta_mm: -200.0 });
        let after = s.document().clone();
        assert!(s.undo().ok);
        assert_eq!(*s.document(), before);
        assert!(s.redo().ok);
        assert_eq!(*s.document(), after);
        s.undo();
        s.apply(DesignCommand::SetKerf { blade_mm: 2.0 });
        assert!(!s.can_redo());
    }

    #[test]
    fn spawn_event_carries_placement() {
        let mut s = Session::new();
        s.apply(scrap_cmd([1000.0, 1000.0, 20.0]));
        let e = s.apply(DesignCommand::SpawnPart { spec: SpawnSpec { scrap: Some(ScrapId(1)), ..Default::default() } });
        assert!(e.ok);
        assert_eq!(e.result["part"], json!(1));
        assert_eq!(e.delta.parts.len(), 1);
        assert_eq!(e.delta.plans[0].placements.len(), 1);
        assert!(e.violations.is_empty());
    }

    #[test]
    fn replay_reproduces_document_and_log() {
        let mut s = Session::new();
        s.apply(scrap_cmd([600.0, 300.0, 18.0]));
        s.apply_json(r#"{"cmd":"spawn_part","scrap":1,"dims":[200,100,18]}"#);
        s.apply_json(r#"{"cmd":"bogus"}"#);
        s.apply(DesignCommand::DuplicatePart { part: PartId(1), link: true });
        s.undo();
        s.redo();
        let r = Session::replay_log(s.history());
        assert_eq!(r.document(), s.document());
        assert_eq!(r.history(), s.history());
        assert_eq!(r.digest(), s.digest());
    }

    #[test]
    fn canonical_json_sorts_keys() {
        assert_eq!(
            canonical_json(&json!({"b": 1, "a": {"d": 0.1, "c": -2.5e-7}})),
            r#"{"a":{"c":-2.5e-7,"d":0.1},"b":1}"#
        );
    }

    #[test]
    fn undo_depth_is_bounded() {
        let mut s = Session::new();
        s.apply(scrap_cmd([1000.0, 1000.0, 20.0]));
        for i in 0..(UNDO_DEPTH + 10) {
            s.apply(DesignCommand::SetKerf { blade_mm: 1.0 + i as f64 });
        }
        let mut n = 0;
        while s.undo().ok {
            n += 1;
        }
        assert_eq!(n, UNDO_DEPTH);
    }
}
