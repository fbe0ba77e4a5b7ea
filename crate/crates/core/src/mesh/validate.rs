use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::{signed_area, Mesh};

/// One violated mesh invariant, carrying the offending ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    DuplicateNodeId(usize),
    NonFiniteCoordinate(usize),
    DuplicateElementId(usize),
    RepeatedElementNode { element: usize },
    UnknownElementNode { element: usize, node: usize },
    NonPositiveArea { element: usize, area: f64 },
    BoundaryTooShort(usize),
    UnknownBoundaryNode(usize),
    RepeatedBoundaryNode(usize),
    BoundaryGap { from: usize, to: usize },
    DuplicateElectrodeId(usize),
    UnknownElectrodeNode { electrode: usize, node: usize },
    ElectrodeOffBoundary { electrode: usize, node: usize },
    SharedElectrodeNode { electrodes: (usize, usize), node: usize },
    NoElements,
    Disconnected { components: usize },
    OrphanNode(usize),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateNodeId(id) => write!(f, "node {id}: duplicate id"),
            Issue::NonFiniteCoordinate(id) => write!(f, "node {id}: non-finite coordinate"),
            Issue::DuplicateElementId(id) => write!(f, "element {id}: duplicate id"),
            Issue::RepeatedElementNode { element } => {
                write!(f, "element {element}: node ids are not distinct")
            }
            Issue::UnknownElementNode { element, node } => {
                write!(f, "element {element}: unknown node {node}")
            }
            Issue::NonPositiveArea { element, area } => {
                write!(f, "element {element}: non-positive signed area {area:e}")
            }
            Issue::BoundaryTooShort(len) => {
                write!(f, "boundary: loop has {len} nodes, need at least 3")
            }
            Issue::UnknownBoundaryNode(id) => write!(f, "boundary: unknown node {id}"),
            Issue::RepeatedBoundaryNode(id) => write!(f, "boundary: node {id} appears twice"),
            Issue::BoundaryGap { from, to } => {
                write!(f, "boundary: nodes {from} and {to} do not share an element edge")
            }
            Issue::DuplicateElectrodeId(id) => write!(f, "electrode {id}: duplicate id"),
            Issue::UnknownElectrodeNode { electrode, node } => {
                write!(f, "electrode {electrode}: unknown node {node}")
            }
            Issue::ElectrodeOffBoundary { electrode, node } => {
                write!(f, "electrode {electrode}: node {node} is not on the boundary")
            }
            Issue::SharedElectrodeNode { electrodes, node } => write!(
                f,
                "electrodes {} and {}: both attached to node {node}",
                electrodes.0, electrodes.1
            ),
            Issue::NoElements => write!(f, "mesh has no elements"),
            Issue::Disconnected { components } => {
                write!(f, "mesh is not edge-connected ({components} components)")
            }
            Issue::OrphanNode(id) => write!(f, "node {id}: not used by any element"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "OK");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every mesh invariant and reports all violations found.
pub fn validate(mesh: &Mesh) -> ValidationReport {
    let mut issues = Vec::new();

    let mut seen = HashSet::new();
    for n in mesh.nodes() {
        if !seen.insert(n.id) {
            issues.push(Issue::DuplicateNodeId(n.id));
        }
        if !(n.x.is_finite() && n.y.is_finite()) {
            issues.push(Issue::NonFiniteCoordinate(n.id));
        }
    }

    if mesh.elements().is_empty() {
        issues.push(Issue::NoElements);
    }

    // edge -> elements sharing it
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut used = HashSet::new();
    let mut element_ids = HashSet::new();
    for (pos, e) in mesh.elements().iter().enumerate() {
        if !element_ids.insert(e.id) {
            issues.push(Issue::DuplicateElementId(e.id));
        }
        let [a, b, c] = e.nodes;
        if a == b || b == c || a == c {
            issues.push(Issue::RepeatedElementNode { element: e.id });
        }
        let mut known = true;
        for &node in &e.nodes {
            if mesh.node_index(node).is_err() {
                issues.push(Issue::UnknownElementNode { element: e.id, node });
                known = false;
            }
            used.insert(node);
        }
        if known {
            if let Ok(coords) = mesh.element_coords(e) {
                let area = signed_area(&coords);
                if !(area > 0.0) {
                    issues.push(Issue::NonPositiveArea { element: e.id, area });
                }
            }
        }
        for k in 0..3 {
            let (p, q) = (e.nodes[k], e.nodes[(k + 1) % 3]);
            edges.entry((p.min(q), p.max(q))).or_default().push(pos);
        }
    }

    for n in mesh.nodes() {
        if !used.contains(&n.id) {
            issues.push(Issue::OrphanNode(n.id));
        }
    }

    let boundary = mesh.boundary();
    if boundary.len() < 3 {
        issues.push(Issue::BoundaryTooShort(boundary.len()));
    }
    let mut on_boundary = HashSet::new();
    for &id in boundary {
        if mesh.node_index(id).is_err() {
            issues.push(Issue::UnknownBoundaryNode(id));
        }
        if !on_boundary.insert(id) {
            issues.push(Issue::RepeatedBoundaryNode(id));
        }
    }
    if boundary.len() >= 2 {
        for (i, &from) in boundary.iter().enumerate() {
            let to = boundary[(i + 1) % boundary.len()];
            if !edges.contains_key(&(from.min(to), from.max(to))) {
                issues.push(Issue::BoundaryGap { from, to });
            }
        }
    }

    let mut electrode_ids = HashSet::new();
    let mut electrode_nodes: HashMap<usize, usize> = HashMap::new();
    for e in mesh.electrodes() {
        if !electrode_ids.insert(e.id) {
            issues.push(Issue::DuplicateElectrodeId(e.id));
        }
        if mesh.node_index(e.node).is_err() {
            issues.push(Issue::UnknownElectrodeNode {
                electrode: e.id,
                node: e.node,
            });
        } else if !on_boundary.contains(&e.node) {
            issues.push(Issue::ElectrodeOffBoundary {
                electrode: e.id,
                node: e.node,
            });
        }
        if let Some(&other) = electrode_nodes.get(&e.node) {
            issues.push(Issue::SharedElectrodeNode {
                electrodes: (other, e.id),
                node: e.node,
            });
        } else {
            electrode_nodes.insert(e.node, e.id);
        }
    }

    let components = edge_components(mesh.elements().len(), &edges);
    if components > 1 {
        issues.push(Issue::Disconnected { components });
    }

    ValidationReport { issues }
}

fn edge_components(count: usize, edges: &HashMap<(usize, usize), Vec<usize>>) -> usize {
    let mut adjacency = vec![Vec::new(); count];
    for shared in edges.values() {
        for &a in shared {
            for &b in shared {
                if a != b {
                    adjacency[a].push(b);
                }
            }
        }
    }
    let mut label = vec![false; count];
    let mut components = 0;
    for start in 0..count {
        if label[start] {
            continue;
        }
        components += 1;
        label[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(e) = queue.pop_front() {
            for &next in &adjacency[e] {
                if !label[next] {
                    label[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    components
}
