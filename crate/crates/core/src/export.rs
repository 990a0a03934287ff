//! Fabrication exports: cut list CSV, per-scrap SVG plans and 1:1 overlays.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cutplan::kerf_dilate;
use crate::document::Document;
use crate::error::{Error, Result};
use crate::geom::Polygon;
use crate::ids::{PartId, ScrapId};
use crate::part::{Edge, Hexahedron, MITER_TOL_DEG};

/// One cut list line: identical parts from the same scrap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutListRow {
    pub part_ids: Vec<PartId>,
    pub scrap: Option<ScrapId>,
    pub qty: usize,
    pub length_mm: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
    pub bevels: Vec<(Edge, f64)>,
    pub tag: Option<String>,
}

pub fn cut_list(doc: &Document) -> Vec<CutListRow> {
    let mut rows: Vec<(Hexahedron, CutListRow)> = Vec::new();
    for p in doc.parts.values() {
        let scrap = p.source.scrap();
        if let Some((_, row)) = rows.iter_mut().find(|(v, r)| r.scrap == scrap && *v == p.vertices) {
            row.part_ids.push(p.id);
            row.qty += 1;
            continue;
        }
        let [length_mm, width_mm, thickness_mm] = p.vertices.extents();
        let bevels =
            Edge::all().into_iter().map(|e| (e, p.vertices.bevel_deg(e))).filter(|(_, b)| *b > MITER_TOL_DEG).collect();
        let tag = scrap.and_then(|s| doc.scrap(s).ok()).and_then(|s| s.tag.clone());
        let row = CutListRow { part_ids: vec![p.id], scrap, qty: 1, length_mm, width_mm, thickness_mm, bevels, tag };
        rows.push((p.vertices.clone(), row));
    }
    let mut rows: Vec<CutListRow> = rows.into_iter().map(|(_, r)| r).collect();
    rows.sort_by_key(|r| (r.scrap.is_none(), r.scrap, r.part_ids[0]));
    rows
}

fn bevel_note(bevels: &[(Edge, f64)]) -> String {
    bevels.iter().map(|(e, b)| format!("bevel {b:.1}° on edge {e}")).collect::<Vec<_>>().join("; ")
}

pub const CUT_LIST_HEADER: [&str; 8] =
    ["part_id", "scrap_no", "qty", "length_mm", "width_mm", "thickness_mm", "bevels", "tag"];

pub fn cut_list_csv(doc: &Document) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::IoFailure(e.to_string());
    w.write_record(CUT_LIST_HEADER).map_err(io)?;
    for r in cut_list(doc) {
        let ids: Vec<String> = r.part_ids.iter().map(|p| p.0.to_string()).collect();
        w.write_record([
            ids.join(";"),
            r.scrap.map(|s| s.0.to_string()).unwrap_or_default(),
            r.qty.to_string(),
            r.length_mm.to_string(),
            r.width_mm.to_string(),
            r.thickness_mm.to_string(),
            bevel_note(&r.bevels),
            r.tag.unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::IoFailure(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn path_data(poly: &Polygon) -> String {
    let mut d = String::new();
    for (i, v) in poly.vertices().iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, v.x, v.y);
    }
    d.push('Z');
    d
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct SvgStyle {
    physical_size: bool,
    kerf_outline: bool,
}

fn plan_svg(doc: &Document, scrap: ScrapId, style: SvgStyle) -> Result<String> {
    let s = doc.scrap(scrap)?;
    let plan = doc.plans.get(&scrap).ok_or(Error::UnknownScrap(scrap))?;
    let (l, w) = (s.length_mm, s.width_mm);
    let mut out = String::new();
    let size = if style.physical_size { format!(" width=\"{l}mm\" height=\"{w}mm\"") } else { String::new() };
    let _ = writeln!(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {l} {w}\"{size}>");
    let _ = writeln!(out, "  <g id=\"scrap-{}\" data-scrap=\"{}\">", scrap.0, scrap.0);
    let _ = writeln!(out, "    <rect class=\"scrap\" x=\"0\" y=\"0\" width=\"{l}\" height=\"{w}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.5\"/>");
    for cut in doc.plan_cuts(scrap) {
        let outline = cut.outline();
        if style.kerf_outline {
            let _ = writeln!(
                out,
                "    <path class=\"kerf\" d=\"{}\" fill=\"none\" stroke=\"grey\" stroke-width=\"0.25\" stroke-dasharray=\"2 2\"/>",
                path_data(&kerf_dilate(&outline, plan.kerf_blade_mm))
            );
        }
        let _ = writeln!(
            out,
            "    <path class=\"cut\" data-part=\"{}\" d=\"{}\" fill=\"none\" stroke=\"red\" stroke-width=\"0.5\"/>",
            cut.part.0,
            path_data(&outline)
        );
        let c = outline.centroid();
        let _ = writeln!(
            out,
            "    <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text>",
            c.x,
            c.y,
            escape(&cut.part.to_string())
        );
    }
    out.push_str("  </g>\n</svg>\n");
    Ok(out)
}

/// The cut plan of one scrap in millimeter user units.
pub fn plan_svg_document(doc: &Document, scrap: ScrapId) -> Result<String> {
    plan_svg(doc, scrap, SvgStyle { physical_size: false, kerf_outline: false })
}

/// The same geometry sized for 1:1 printing, with dashed kerf outlines.
pub fn overlay_svg(doc: &Document, scrap: ScrapId) -> Result<String> {
    plan_svg(doc, scrap, SvgStyle { physical_size: true, kerf_outline: true })
}

/// Reads back the cut polygons of an exported plan, keyed by part.
pub fn parse_svg_cuts(svg: &str) -> Result<Vec<(PartId, Polygon)>> {
    let bad = |m: &str| Error::SchemaViolation(format!("svg: {m}"));
    let mut out = Vec::new();
    for line in svg.lines().filter(|l| l.contains("class=\"cut\"")) {
        let attr = |name: &str| -> Result<&str> {
            let key = format!("{name}=\"");
            let start = line.find(&key).ok_or_else(|| bad(name))? + key.len();
            let len = line[start..].find('"').ok_or_else(|| bad(name))?;
            Ok(&line[start..start + len])
        };
        let part = PartId(attr("data-part")?.parse().map_err(|_| bad("part id"))?);
        let nums: Vec<f64> = attr("d")?
            .split(|c: char| c == 'M' || c == 'L' || c == 'Z' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| bad("coordinate")))
            .collect::<Result<_>>()?;
        if nums.len() % 2 != 0 {
            return Err(bad("odd coordinate count"));
        }
        let pts: Vec<_> = nums.chunks(2).map(|c| crate::geom::Vec2::new(c[0], c[1])).collect();
        out.push((part, Polygon::hull(pts)));
    }
    Ok(out)
}
