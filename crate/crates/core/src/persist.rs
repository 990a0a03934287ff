//! Document files: pretty-printed JSON holding the document and its
//! command log.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::document::{Document, DOCUMENT_VERSION};
use crate::error::{Error, Result};
use crate::session::{LogEntry, Session};

pub const FORMAT_TAG: &str = "offcut-document";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentFile {
    pub format: String,
    pub version: u64,
    pub document: Document,
    #[serde(default)]
    pub history: Vec<LogEntry>,
}

pub fn to_string(session: &Session) -> String {
    let file = DocumentFile {
        format: FORMAT_TAG.to_string(),
        version: DOCUMENT_VERSION,
        document: session.document().clone(),
        history: session.history().to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("documents serialize")
}

pub fn from_str(text: &str) -> Result<Session> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    if raw.get("format").and_then(Value::as_str) != Some(FORMAT_TAG) {
        return Err(Error::SchemaViolation(format!("missing format tag {FORMAT_TAG:?}")));
    }
    let version =
        raw.get("version").and_then(Value::as_u64).ok_or_else(|| Error::SchemaViolation("missing version".into()))?;
    if version > DOCUMENT_VERSION {
        return Err(Error::VersionMismatch { found: version, supported: DOCUMENT_VERSION });
    }
    let file: DocumentFile = serde_json::from_value(raw).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    if file.document.version != version {
        return Err(Error::SchemaViolation("document and file versions differ".into()));
    }
    for (i, e) in file.history.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            return Err(Error::SchemaViolation(format!("history entry {i} has seq {}", e.seq)));
        }
    }
    let mut doc = file.document;
    doc.check_integrity()?;
    doc.refresh_derived();
    Ok(Session::from_parts(doc, file.history))
}

pub fn save(session: &Session, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(session))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Session> {
    from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::SpawnSpec;
    use crate::ids::ScrapId;
    use crate::inventory::NewScrap;
    use crate::session::DesignCommand;

    fn sample() -> Session {
        let mut s = Session::new();
        s.apply(DesignCommand::RegisterScrap {
            scrap: NewScrap {
                dims: [400.0, 200.0, 18.0],
                material_kind: "oak".into(),
                tag: Some("a".into()),
                grain: None,
                color_rgb: None,
            },
        });
        for _ in 0..2 {
            s.apply(DesignCommand::SpawnPart {
                spec: SpawnSpec {
                    scrap: Some(ScrapId(1)),
                    dims: Some([150.0, 100.0 / 3.0, 18.0]),
                    ..Default::default()
                },
            });
        }
        s.apply(DesignCommand::SetPlanMode { scrap: ScrapId(1), mode: crate::cutplan::PackingMode::Manual });
        s.apply(DesignCommand::MoveCut { part: crate::ids::PartId(2), position_mm: [0.1, 0.0] });
        s
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert!(!s.document().violations.is_empty());
        let back = from_str(&to_string(&s)).unwrap();
        assert_eq!(back.document(), s.document());
        assert_eq!(back.history(), s.history());
    }

    #[test]
    fn newer_version_rejected() {
        let text = to_string(&sample()).replacen("\"version\": 1", "\"version\": 99", 1);
        assert_eq!(from_str(&text).unwrap_err(), Error::VersionMismatch { found: 99, supported: 1 });
    }

    #[test]
    fn truncated_is_schema_violation() {
        let text = to_string(&sample());
        let err = from_str(&text[..text.len() / 2]).unwrap_err();
        assert_eq!(err.kind(), "SchemaViolation");
    }

    #[test]
    fn dangling_placement_is_schema_violation() {
        let s = sample();
        let mut v: Value = serde_json::from_str(&to_string(&s)).unwrap();
        v["document"]["parts"].as_object_mut().unwrap().remove("1");
        let err = from_str(&v.to_string()).unwrap_err();
        assert_eq!(err.kind(), "SchemaViolation");
    }
}
