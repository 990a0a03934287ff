//! Scene mesh text formats.
//!
//! The native format has one triangle per line: nine coordinates in
//! millimeters followed by an optional tag. Blank lines and lines starting
//! with `#` are ignored. ASCII STL (`solid` ... `endsolid`) is accepted too;
//! its facet normals are ignored in favour of vertex order.

use crate::assembly::{SceneMesh, SceneTriangle};
use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<SceneMesh> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    let triangles = match first {
        Some(l) if l.split_whitespace().next() == Some("solid") => parse_stl(text)?,
        _ => parse_lines(text)?,
    };
    SceneMesh::new(triangles)
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::SchemaViolation(format!("line {line}: {tok:?} is not a number")))
}

fn parse_lines(text: &str) -> Result<Vec<SceneTriangle>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 9 {
            return Err(Error::SchemaViolation(format!("line {}: expected 9 coordinates", i + 1)));
        }
        let mut v = [[0.0; 3]; 3];
        for k in 0..9 {
            v[k / 3][k % 3] = number(toks[k], i + 1)?;
        }
        let tag = (toks.len() > 9).then(|| toks[9..].join(" "));
        out.push(SceneTriangle { vertices: v, tag });
    }
    Ok(out)
}

fn parse_stl(text: &str) -> Result<Vec<SceneTriangle>> {
    let mut out = Vec::new();
    let mut pending: Vec<[f64; 3]> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("vertex") => {
                if toks.len() != 4 {
                    return Err(Error::SchemaViolation(format!("line {}: malformed vertex", i + 1)));
                }
                pending.push([number(toks[1], i + 1)?, number(toks[2], i + 1)?, number(toks[3], i + 1)?]);
            }
            Some("endfacet") => {
                let [a, b, c]: [[f64; 3]; 3] = pending
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::SchemaViolation(format!("line {}: facet needs 3 vertices", i + 1)))?;
                out.push(SceneTriangle { vertices: [a, b, c], tag: None });
                pending.clear();
            }
            _ => {}
        }
    }
    if !pending.is_empty() {
        return Err(Error::SchemaViolation("unterminated facet".into()));
    }
    Ok(out)
}

/// Writes the native line format.
pub fn write(mesh: &SceneMesh) -> String {
    let mut s = String::new();
    for t in &mesh.triangles {
        let coords: Vec<String> = t.vertices.iter().flatten().map(|v| v.to_string()).collect();
        s.push_str(&coords.join(" "));
        if let Some(tag) = &t.tag {
            s.push(' ');
            s.push_str(tag);
        }
        s.push('\n');
    }
    s
}
