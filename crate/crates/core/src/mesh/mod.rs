//! Triangulated 2D domains with boundary and electrode annotations.
//!
//! A [`Mesh`] owns its nodes, linear triangles, the boundary loop and a set of
//! point electrodes placed on boundary nodes. Node ids are arbitrary but
//! unique; the mesh keeps an id → position index so the solver can work with
//! dense indices.

mod build;
mod io;
mod validate;

use std::collections::HashMap;

pub use build::{build_disk_mesh, place_electrodes};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use validate::{validate, Issue, ValidationReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub id: usize,
    pub nodes: [usize; 3],
}

/// A point electrode attached to a single boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Electrode {
    pub id: usize,
    pub node: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Node>,
    elements: Vec<Element>,
    boundary: Vec<usize>,
    electrodes: Vec<Electrode>,
    node_index: HashMap<usize, usize>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.elements == other.elements
            && self.boundary == other.boundary
            && self.electrodes == other.electrodes
    }
}

impl Mesh {
    /// Builds a mesh and rejects it unless every invariant holds.
    pub fn new(
        nodes: Vec<Node>,
        elements: Vec<Element>,
        boundary: Vec<usize>,
        electrodes: Vec<Electrode>,
    ) -> Result<Self> {
        let mesh = Self::new_unchecked(nodes, elements, boundary, electrodes);
        let report = validate(&mesh);
        if report.is_empty() {
            Ok(mesh)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Builds a mesh without checking invariants. Use [`validate`] before
    /// handing the result to the solver.
    pub fn new_unchecked(
        nodes: Vec<Node>,
        elements: Vec<Element>,
        boundary: Vec<usize>,
        electrodes: Vec<Electrode>,
    ) -> Self {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (pos, node) in nodes.iter().enumerate() {
            node_index.entry(node.id).or_insert(pos);
        }
        Self {
            nodes,
            elements,
            boundary,
            electrodes,
            node_index,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Boundary node ids in loop order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Dense position of a node id in [`Mesh::nodes`].
    pub fn node_index(&self, id: usize) -> Result<usize> {
        self.node_index
            .get(&id)
            .copied()
            .ok_or(Error::Lookup { kind: "node", id })
    }

    pub fn node(&self, id: usize) -> Result<&Node> {
        self.node_index(id).map(|pos| &self.nodes[pos])
    }

    pub fn electrode(&self, id: usize) -> Result<&Electrode> {
        self.electrodes
            .iter()
            .find(|e| e.id == id)
            .ok_or(Error::Lookup { kind: "electrode", id })
    }

    /// Replaces the electrode set, re-validating the mesh.
    pub fn with_electrodes(self, electrodes: Vec<Electrode>) -> Result<Self> {
        Self::new(self.nodes, self.elements, self.boundary, electrodes)
    }

    pub fn element_coords(&self, element: &Element) -> Result<[[f64; 2]; 3]> {
        let mut out = [[0.0; 2]; 3];
        for (slot, &id) in out.iter_mut().zip(element.nodes.iter()) {
            let n = self.node(id)?;
            *slot = [n.x, n.y];
        }
        Ok(out)
    }

    pub fn element_area(&self, element: &Element) -> Result<f64> {
        Ok(signed_area(&self.element_coords(element)?))
    }

    pub fn centroid(&self, element: &Element) -> Result<[f64; 2]> {
        let c = self.element_coords(element)?;
        Ok([
            (c[0][0] + c[1][0] + c[2][0]) / 3.0,
            (c[0][1] + c[1][1] + c[2][1]) / 3.0,
        ])
    }

    pub fn total_area(&self) -> Result<f64> {
        self.elements.iter().map(|e| self.element_area(e)).sum()
    }

    /// Diagonal length of the axis-aligned bounding box.
    pub fn scale(&self) -> f64 {
        bbox_diagonal(self.nodes.iter().map(|n| [n.x, n.y]))
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for n in &self.nodes {
            lo[0] = lo[0].min(n.x);
            lo[1] = lo[1].min(n.y);
            hi[0] = hi[0].max(n.x);
            hi[1] = hi[1].max(n.y);
        }
        (lo, hi)
    }

    /// Position of the first element containing `p`, edges inclusive.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        self.elements.iter().position(|e| {
            let Ok(c) = self.element_coords(e) else {
                return false;
            };
            let area = signed_area(&c);
            (0..3).all(|k| {
                let a = c[(k + 1) % 3];
                let b = c[(k + 2) % 3];
                signed_area(&[p, a, b]) >= -1e-12 * area.abs()
            })
        })
    }
}

/// Signed area of a triangle, positive for counter-clockwise vertices.
pub fn signed_area(c: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
}

pub(crate) fn bbox_diagonal(points: impl IntoIterator<Item = [f64; 2]>) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}
