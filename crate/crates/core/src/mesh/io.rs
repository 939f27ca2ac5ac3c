//! Plain-text polygonal mesh format.
//!
//! ```text
//! polymesh 2d
//! vertices N
//! x y            # N lines
//! cells M
//! c v0 ... v{c-1}  # M lines, counter-clockwise, 0-based
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::Mesh;
use crate::{Error, Point, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mesh(&text)
}

/// Parses the text format from a string.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    };
    let perr = |line: usize, message: String| Error::Parse { line, message };

    let (line, header) = next("header")?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks != ["polymesh", "2d"] {
        return Err(perr(line, format!("expected `polymesh 2d`, found `{header}`")));
    }

    let count = |line: usize, text: &str, key: &str| -> Result<usize> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        match toks.as_slice() {
            [k, n] if *k == key => n
                .parse()
                .map_err(|_| perr(line, format!("invalid {key} count `{n}`"))),
            _ => Err(perr(line, format!("expected `{key} <count>`, found `{text}`"))),
        }
    };

    let (line, text) = next("vertex count")?;
    let nv = count(line, text, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = next("vertex coordinates")?;
        let coords: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(line, format!("invalid coordinate: {e}")))?;
        if coords.len() != 2 || coords.iter().any(|c| !c.is_finite()) {
            return Err(perr(line, format!("expected two finite coordinates, found `{text}`")));
        }
        vertices.push(Point::new(coords[0], coords[1]));
    }

    let (line, text) = next("cell count")?;
    let nc = count(line, text, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, text) = next("cell")?;
        let ids: Vec<usize> = text
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(line, format!("invalid index: {e}")))?;
        let Some((&c, verts)) = ids.split_first() else {
            return Err(perr(line, "empty cell line".into()));
        };
        if verts.len() != c {
            return Err(perr(
                line,
                format!("cell declares {c} vertices but lists {}", verts.len()),
            ));
        }
        if let Some(&v) = verts.iter().find(|&&v| v >= nv) {
            return Err(perr(line, format!("vertex index {v} out of range (N = {nv})")));
        }
        cells.push(verts.to_vec());
    }
    if let Some((line, text)) = lines.next() {
        return Err(perr(line, format!("trailing content `{text}`")));
    }
    Mesh::from_cells(vertices, cells)
}

/// Serializes a mesh in the text format.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::from("polymesh 2d\n");
    let _ = writeln!(s, "vertices {}", mesh.vertices().len());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p.x, p.y);
    }
    let _ = writeln!(s, "cells {}", mesh.num_cells());
    for c in mesh.cells() {
        let _ = write!(s, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}
