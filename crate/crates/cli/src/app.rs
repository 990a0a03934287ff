//! Headless subcommands. Each returns its report as text so tests can run
//! them without spawning a process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use offcut_core::session::ScriptError;
use offcut_core::{export, persist, Session};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] offcut_core::Error),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("script is not a JSON array of commands: {0}")]
    ScriptFormat(String),
    #[error("nothing to export: pass --cutlist, --svg or --overlay")]
    NoExportTarget,
}

pub type CliResult<T> = Result<T, CliError>;

/// Loads a document file and applies a kerf override, if any. The override
/// is not recorded in the command log.
pub fn load(path: &Path, kerf_mm: Option<f64>) -> CliResult<Session> {
    let session = persist::load(path)?;
    match kerf_mm {
        Some(k) if k != session.document().settings.kerf_blade_mm => {
            let mut doc = session.document().clone();
            doc.set_kerf(k)?;
            Ok(Session::from_parts(doc, session.history().to_vec()))
        }
        _ => Ok(session),
    }
}

pub fn read_script(path: &Path) -> CliResult<Vec<Value>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    parse_script(&text)
}

pub fn parse_script(text: &str) -> CliResult<Vec<Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(cmds)) => Ok(cmds),
        Ok(_) => Err(CliError::ScriptFormat("top level must be an array".into())),
        Err(e) => Err(CliError::ScriptFormat(e.to_string())),
    }
}

pub struct ValidateOutcome {
    pub report: String,
    pub ok: bool,
}

pub fn validate(session: &Session) -> ValidateOutcome {
    let doc = session.document();
    let mut report = String::new();
    if doc.violations.is_empty() {
        let _ = writeln!(report, "ok: {} parts, {} scraps, no violations", doc.parts.len(), doc.inventory.len());
    } else {
        let _ = writeln!(report, "{:<16} {:<12} {:<7} detail", "kind", "parts", "scrap");
        for v in &doc.violations {
            let parts: Vec<String> = v.parts.iter().map(ToString::to_string).collect();
            let scrap = v.scrap.map(|s| format!("#{s}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(report, "{:<16} {:<12} {:<7} {}", v.kind.to_string(), parts.join(","), scrap, v.detail);
        }
        let _ = writeln!(report, "{} violation(s)", doc.violations.len());
    }
    for g in &doc.grain_warnings {
        let _ = writeln!(report, "warning: grain on {} runs {:.1}° off its long axis", g.part, g.angle_deg);
    }
    ValidateOutcome { report, ok: doc.violations.is_empty() }
}

pub fn replay(script: &Path, digest_only: bool, out: Option<&Path>) -> CliResult<String> {
    let session = Session::run_script(&read_script(script)?)?;
    if let Some(out) = out {
        persist::save(&session, out)?;
    }
    let digest = session.digest();
    if digest_only {
        return Ok(format!("{digest}\n"));
    }
    let doc = session.document();
    Ok(format!(
        "commands: {}\nparts: {}\nviolations: {}\ndigest: {digest}\n",
        session.history().len(),
        doc.parts.len(),
        doc.violations.len()
    ))
}

pub struct ExportTargets<'a> {
    pub cutlist: Option<&'a Path>,
    pub svg_dir: Option<&'a Path>,
    pub overlay_dir: Option<&'a Path>,
}

/// Writes the requested exports and returns the list of files written.
pub fn export(session: &Session, targets: &ExportTargets<'_>) -> CliResult<Vec<PathBuf>> {
    let doc = session.document();
    let mut written = Vec::new();
    let write = |path: PathBuf, text: String, written: &mut Vec<PathBuf>| -> CliResult<()> {
        fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        written.push(path);
        Ok(())
    };
    if targets.cutlist.is_none() && targets.svg_dir.is_none() && targets.overlay_dir.is_none() {
        return Err(CliError::NoExportTarget);
    }
    if let Some(path) = targets.cutlist {
        write(path.to_path_buf(), export::cut_list_csv(doc)?, &mut written)?;
    }
    for (dir, overlay) in [(targets.svg_dir, false), (targets.overlay_dir, true)] {
        let Some(dir) = dir else { continue };
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        for s in doc.inventory.iter() {
            let (name, text) = if overlay {
                (format!("overlay-{}.svg", s.id), export::overlay_svg(doc, s.id)?)
            } else {
                (format!("scrap-{}.svg", s.id), export::plan_svg_document(doc, s.id)?)
            };
            write(dir.join(name), text, &mut written)?;
        }
    }
    Ok(written)
}

pub fn usage(session: &Session) -> String {
    let doc = session.document();
    let report = doc.usage_report();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<7} {:<10} {:<12} {:>12} {:>12} {:>8}",
        "scrap", "material", "tag", "area_mm2", "used_mm2", "usage"
    );
    for u in &report.scraps {
        let s = doc.scrap(u.scrap).expect("report rows come from the inventory");
        let retired = if u.retired { " (retired)" } else { "" };
        let _ = writeln!(
            out,
            "{:<7} {:<10} {:<12} {:>12.1} {:>12.1} {:>7.2}%{retired}",
            format!("#{}", u.scrap),
            s.material_kind,
            s.tag.as_deref().unwrap_or("-"),
            u.face_area_mm2,
            u.used_area_mm2,
            u.used_fraction * 100.0
        );
    }
    for (g, f) in &report.groups {
        let _ = writeln!(out, "assembly {g}: {:.2}%", f * 100.0);
    }
    let _ = writeln!(out, "overall: {:.2}%", report.overall_fraction * 100.0);
    out
}
