//! Plain-text mesh files.
//!
//! ```text
//! # comment lines are ignored
//! [nodes]
//! 0 0.0000000000000000e0 0.0000000000000000e0
//! [elements]
//! 0 0 1 2
//! [boundary]
//! 1 2 3
//! [electrodes]
//! 0 1
//! ```
//!
//! All four section headers are required. Boundary ids may span several
//! lines; their concatenation is the loop order.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Electrode, Element, Mesh, Node};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Nodes,
    Elements,
    Boundary,
    Electrodes,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Nodes => "nodes",
            Section::Elements => "elements",
            Section::Boundary => "boundary",
            Section::Electrodes => "electrodes",
        }
    }
}

const SECTIONS: [Section; 4] = [
    Section::Nodes,
    Section::Elements,
    Section::Boundary,
    Section::Electrodes,
];

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh(mesh, &[]))?;
    Ok(())
}

/// Serializes a mesh, prefixed with `header` as `#` comment lines.
pub fn write_mesh(mesh: &Mesh, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("[nodes]\n");
    for n in mesh.nodes() {
        let _ = writeln!(out, "{} {:.16e} {:.16e}", n.id, n.x, n.y);
    }
    out.push_str("[elements]\n");
    for e in mesh.elements() {
        let [a, b, c] = e.nodes;
        let _ = writeln!(out, "{} {a} {b} {c}", e.id);
    }
    out.push_str("[boundary]\n");
    let ids: Vec<String> = mesh.boundary().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{}", ids.join(" "));
    out.push_str("[electrodes]\n");
    for e in mesh.electrodes() {
        let _ = writeln!(out, "{} {}", e.id, e.node);
    }
    out
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut section: Option<Section> = None;
    let mut seen = [false; 4];
    let mut nodes = Vec::new();
    let mut elements = Vec::new();
    let mut boundary = Vec::new();
    let mut electrodes = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let next = SECTIONS
                .iter()
                .copied()
                .find(|s| s.name() == name.trim())
                .ok_or_else(|| format_err(line_no, format!("unknown section [{name}]")))?;
            let slot = SECTIONS.iter().position(|&s| s == next).unwrap_or_default();
            if seen[slot] {
                return Err(format_err(line_no, format!("section [{name}] repeated")));
            }
            seen[slot] = true;
            section = Some(next);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            None => return Err(format_err(line_no, "data before first section header")),
            Some(Section::Nodes) => {
                expect_fields(&fields, 3, "node `id x y`", line_no)?;
                nodes.push(Node {
                    id: field(fields[0], "node id", line_no)?,
                    x: field(fields[1], "node x", line_no)?,
                    y: field(fields[2], "node y", line_no)?,
                });
            }
            Some(Section::Elements) => {
                expect_fields(&fields, 4, "element `id n1 n2 n3`", line_no)?;
                elements.push(Element {
                    id: field(fields[0], "element id", line_no)?,
                    nodes: [
                        field(fields[1], "element n1", line_no)?,
                        field(fields[2], "element n2", line_no)?,
                        field(fields[3], "element n3", line_no)?,
                    ],
                });
            }
            Some(Section::Boundary) => {
                for f in fields {
                    boundary.push(field(f, "boundary node id", line_no)?);
                }
            }
            Some(Section::Electrodes) => {
                expect_fields(&fields, 2, "electrode `id node`", line_no)?;
                electrodes.push(Electrode {
                    id: field(fields[0], "electrode id", line_no)?,
                    node: field(fields[1], "electrode node", line_no)?,
                });
            }
        }
    }

    if let Some(missing) = SECTIONS.iter().zip(seen).find(|(_, s)| !s) {
        return Err(format_err(
            last_line + 1,
            format!("missing section [{}]", missing.0.name()),
        ));
    }
    Mesh::new(nodes, elements, boundary, electrodes)
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn expect_fields(fields: &[&str], n: usize, what: &str, line: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(format_err(
            line,
            format!("expected {what} ({n} fields), found {} fields", fields.len()),
        ))
    }
}

fn field<T: FromStr>(text: &str, name: &str, line: usize) -> Result<T> {
    text.parse()
        .map_err(|_| format_err(line, format!("cannot parse {name} from `{text}`")))
}
