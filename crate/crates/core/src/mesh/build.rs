use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Electrode, Element, Mesh, Node};
use crate::error::{Error, Result};

const BASE_SECTORS: usize = 8;

/// Centered disk: a hub node and a ring of eight boundary nodes, refined by
/// uniform 1-to-4 subdivision. New boundary midpoints are pushed out onto the
/// circle. Every boundary node carries an electrode, numbered in loop order.
///
/// Refinement `k` gives `8·4^k` elements and `8·2^k` boundary nodes.
pub fn build_disk_mesh(radius: f64, refinement: u32) -> Result<Mesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!(
            "disk radius must be positive and finite, got {radius}"
        )));
    }

    let mut coords: Vec<[f64; 2]> = Vec::with_capacity(1 + BASE_SECTORS);
    coords.push([0.0, 0.0]);
    for k in 0..BASE_SECTORS {
        let theta = 2.0 * PI * k as f64 / BASE_SECTORS as f64;
        coords.push([radius * theta.cos(), radius * theta.sin()]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..BASE_SECTORS)
        .map(|k| [0, 1 + k, 1 + (k + 1) % BASE_SECTORS])
        .collect();
    let mut boundary: Vec<usize> = (1..=BASE_SECTORS).collect();

    for _ in 0..refinement {
        let boundary_edges: HashMap<(usize, usize), ()> = boundary
            .iter()
            .zip(boundary.iter().cycle().skip(1))
            .map(|(&a, &b)| (edge_key(a, b), ()))
            .collect();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, coords: &mut Vec<[f64; 2]>| -> usize {
            let key = edge_key(a, b);
            *midpoints.entry(key).or_insert_with(|| {
                let pa = coords[a];
                let pb = coords[b];
                let mut m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                if boundary_edges.contains_key(&key) {
                    let r = m[0].hypot(m[1]);
                    m = [m[0] * radius / r, m[1] * radius / r];
                }
                coords.push(m);
                coords.len() - 1
            })
        };

        let mut refined = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut coords);
            let bc = midpoint(b, c, &mut coords);
            let ca = midpoint(c, a, &mut coords);
            refined.push([a, ab, ca]);
            refined.push([ab, b, bc]);
            refined.push([ca, bc, c]);
            refined.push([ab, bc, ca]);
        }
        triangles = refined;

        let mut ring = Vec::with_capacity(boundary.len() * 2);
        for (i, &a) in boundary.iter().enumerate() {
            let b = boundary[(i + 1) % boundary.len()];
            ring.push(a);
            ring.push(midpoints[&edge_key(a, b)]);
        }
        boundary = ring;
    }

    let nodes = coords
        .into_iter()
        .enumerate()
        .map(|(id, [x, y])| Node { id, x, y })
        .collect();
    let elements = triangles
        .into_iter()
        .enumerate()
        .map(|(id, nodes)| Element { id, nodes })
        .collect();
    let electrodes = boundary
        .iter()
        .enumerate()
        .map(|(id, &node)| Electrode { id, node })
        .collect();
    Mesh::new(nodes, elements, boundary, electrodes)
}

/// Keeps `count` electrodes spread evenly around the boundary loop,
/// renumbered from zero.
pub fn place_electrodes(mesh: Mesh, count: usize) -> Result<Mesh> {
    let ring = mesh.boundary().len();
    if count < 2 || count > ring {
        return Err(Error::Domain(format!(
            "electrode count must be in 2..={ring}, got {count}"
        )));
    }
    let electrodes = (0..count)
        .map(|id| Electrode {
            id,
            node: mesh.boundary()[id * ring / count],
        })
        .collect();
    mesh.with_electrodes(electrodes)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}
