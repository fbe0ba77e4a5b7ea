#![allow(dead_code)]

use eit_core::mesh::{build_disk_mesh, Electrode, Element, Mesh, Node};
use nalgebra::{DMatrix, DVector, Matrix3};

/// Disk mesh with interior nodes shifted by up to `jitter` in each axis.
pub fn jittered_disk(refinement: u32, offsets: &[(f64, f64)], jitter: f64) -> Mesh {
    let base = build_disk_mesh(1.0, refinement).unwrap();
    let boundary: std::collections::HashSet<usize> = base.boundary().iter().copied().collect();
    let mut k = 0;
    let nodes: Vec<Node> = base
        .nodes()
        .iter()
        .map(|n| {
            if boundary.contains(&n.id) {
                *n
            } else {
                let (dx, dy) = offsets[k % offsets.len()];
                k += 1;
                Node { id: n.id, x: n.x + jitter * dx, y: n.y + jitter * dy }
            }
        })
        .collect();
    Mesh::new(nodes, base.elements().to_vec(), base.boundary().to_vec(), base.electrodes().to_vec()).unwrap()
}

/// One counter-clockwise triangle, every vertex an electrode.
pub fn triangle_mesh(p: [[f64; 2]; 3]) -> Mesh {
    let nodes = (0..3).map(|i| Node { id: i, x: p[i][0], y: p[i][1] }).collect();
    let electrodes = (0..3).map(|i| Electrode { id: i, node: i }).collect();
    Mesh::new(nodes, vec![Element { id: 0, nodes: [0, 1, 2] }], vec![0, 1, 2], electrodes).unwrap()
}

/// Quadrilateral `p0 p1 p2 p3` (counter-clockwise) split along `p0–p2`.
pub fn quad_mesh(p: [[f64; 2]; 4]) -> Mesh {
    let nodes = (0..4).map(|i| Node { id: i, x: p[i][0], y: p[i][1] }).collect();
    let electrodes = (0..4).map(|i| Electrode { id: i, node: i }).collect();
    let elements = vec![Element { id: 0, nodes: [0, 1, 2] }, Element { id: 1, nodes: [0, 2, 3] }];
    Mesh::new(nodes, elements, vec![0, 1, 2, 3], electrodes).unwrap()
}

/// Element stiffness from barycentric gradients: invert `[1 x y]` and
/// integrate the constant gradient products over the area.
pub fn reference_element_stiffness(p: &[[f64; 2]; 3], sigma: f64) -> Matrix3<f64> {
    let v = Matrix3::new(1.0, p[0][0], p[0][1], 1.0, p[1][0], p[1][1], 1.0, p[2][0], p[2][1]);
    let area = v.determinant().abs() / 2.0;
    let c = v.try_inverse().unwrap();
    // column i of c holds (a_i, gx_i, gy_i) for basis function i
    Matrix3::from_fn(|i, j| sigma * area * (c[(1, i)] * c[(1, j)] + c[(2, i)] * c[(2, j)]))
}

pub fn reference_assembly(mesh: &Mesh, sigma: &[f64]) -> DMatrix<f64> {
    let n = mesh.node_count();
    let mut s = DMatrix::zeros(n, n);
    for (e, &sg) in mesh.elements().iter().zip(sigma) {
        let p = mesh.element_coords(e).unwrap();
        let k = reference_element_stiffness(&p, sg);
        let idx: Vec<usize> = e.nodes.iter().map(|&id| mesh.node_index(id).unwrap()).collect();
        for a in 0..3 {
            for b in 0..3 {
                s[(idx[a], idx[b])] += k[(a, b)];
            }
        }
    }
    s
}

fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        _ => (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * det(&minor)
            })
            .sum(),
    }
}

/// Cramer's rule on the system with the ground row and column removed.
pub fn cramer_potentials(s: &DMatrix<f64>, load: &DVector<f64>, ground: usize) -> DVector<f64> {
    let a = s.clone().remove_row(ground).remove_column(ground);
    let b = load.clone().remove_row(ground);
    let d = det(&a);
    let mut phi = DVector::zeros(s.nrows());
    for i in 0..a.ncols() {
        let mut ai = a.clone();
        ai.set_column(i, &b);
        let slot = if i < ground { i } else { i + 1 };
        phi[slot] = det(&ai) / d;
    }
    phi
}
