pub mod assembly;
pub mod cutplan;
pub mod document;
pub mod error;
pub mod export;
pub mod geom;
pub mod ids;
pub mod inventory;
pub mod part;
pub mod persist;
pub mod scene_io;
pub mod session;

pub use document::{Document, Settings, SpawnSpec};
pub use error::{Error, Result};
pub use ids::{GroupId, PartId, ScrapId};
pub use session::{DesignCommand, Event, Session};

/// Bundled example designs, as JSON command arrays.
pub mod scripts {
    pub const CHAIR: &str = include_str!("../scripts/chair.json");
    pub const SLANT_SHELF: &str = include_str!("../scripts/slant_shelf.json");

    pub fn commands(script: &str) -> Vec<serde_json::Value> {
        serde_json::from_str(script).expect("bundled scripts are valid JSON arrays")
    }
}
