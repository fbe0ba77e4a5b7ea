//! Forward problem: linear-triangle stiffness assembly, current injection,
//! gauge fixing and the direct solve `S·Φ = F`.
//!
//! The element matrix for conductivity `σ` on a triangle of area `A` is
//! `K = σ·A·Bᵀ·B`, where `B` holds the constant gradients of the three
//! linear shape functions. Global assembly sums element blocks; the result
//! is singular (constant potentials lie in its kernel) until one node is
//! grounded.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::mesh::{bbox_diagonal, Mesh};

/// Tolerance on the sum of injected currents, amperes.
pub const CURRENT_SUM_TOL: f64 = 1e-12;

/// Relative area below which a triangle counts as degenerate.
pub const DEGENERATE_AREA_REL: f64 = 1e-14;

/// Per-element conductivity in S/m (reciprocal of resistivity).
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField(Vec<f64>);

impl ConductivityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((e, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Domain(format!(
                "conductivity of element position {e} must be positive and finite, got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn uniform(elements: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; elements])
    }

    /// Builds a field from resistivities `ρ`, taking `σ = 1/ρ`.
    pub fn from_resistivity(rho: &[f64]) -> Result<Self> {
        Self::new(rho.iter().map(|r| 1.0 / r).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads a CSV with a `sigma` column (and optionally `element`, which
    /// must count 0, 1, 2, … in order). `#` lines are skipped.
    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = headers.iter().position(|h| h == "sigma").ok_or_else(|| Error::Format {
            line: 1,
            message: "no `sigma` column".into(),
        })?;
        let order = headers.iter().position(|h| h == "element");
        let mut values = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let cell = |k: usize, what: &str| -> Result<&str> {
                record.get(k).ok_or_else(|| Error::Format {
                    line,
                    message: format!("missing {what} column"),
                })
            };
            if let Some(k) = order {
                let id = cell(k, "element")?;
                if id.parse::<usize>().ok() != Some(values.len()) {
                    return Err(Error::Format {
                        line,
                        message: format!("expected element {}, found `{id}`", values.len()),
                    });
                }
            }
            let text = cell(col, "sigma")?;
            values.push(text.parse::<f64>().map_err(|_| Error::Format {
                line,
                message: format!("cannot parse conductivity `{text}`"),
            })?);
        }
        Self::new(values)
    }

    pub fn read_csv(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }
}

/// Where a pattern's currents enter the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminals {
    /// Ids refer to mesh electrodes.
    Electrodes,
    /// Ids refer to mesh nodes directly, interior nodes included. Only used
    /// by full-observation sweeps, which assume access to every node.
    Nodes,
}

/// Signed currents (amperes) injected at a set of terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPattern {
    terminals: Terminals,
    entries: Vec<(usize, f64)>,
}

impl CurrentPattern {

    /// Parses `id current` lines. An optional first line `nodes` or
    /// `electrodes` selects the terminals (electrodes by default); `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terminals = Terminals::Electrodes;
        let mut entries = Vec::new();
        let mut first = true;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if first && (line == "nodes" || line == "electrodes") {
                terminals = if line == "nodes" { Terminals::Nodes } else { Terminals::Electrodes };
                first = false;
                continue;
            }
            first = false;
            let bad = |what: &str| Error::Format {
                line: idx + 1,
                message: format!("{what} in `{line}`"),
            };
            let mut parts = line.split_whitespace();
            let id = parts.next().and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| bad("bad terminal id"))?;
            let current = parts.next().and_then(|t| t.parse::<f64>().ok()).ok_or_else(|| bad("bad current"))?;
            if parts.next().is_some() {
                return Err(bad("trailing fields"));
            }
            entries.push((id, current));
        }
        Self::with_terminals(terminals, entries)
    }

    /// Electrode-driven pattern from `(electrode id, current)` pairs.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        Self::with_terminals(Terminals::Electrodes, entries)
    }

    /// Nodal pattern from `(node id, current)` pairs.
    pub fn nodal(entries: Vec<(usize, f64)>) -> Result<Self> {
        Self::with_terminals(Terminals::Nodes, entries)
    }

    /// `+current` into `source`, `-current` out of `sink`.
    pub fn pair(source: usize, sink: usize, current: f64) -> Result<Self> {
        Self::new(vec![(source, current), (sink, -current)])
    }

    pub fn with_terminals(terminals: Terminals, entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.iter().any(|(_, i)| !i.is_finite()) {
            return Err(Error::Pattern("currents must be finite".into()));
        }
        let mut ids: Vec<usize> = entries.iter().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Pattern("terminal listed twice".into()));
        }
        let nonzero = entries.iter().filter(|(_, i)| *i != 0.0).count();
        if nonzero < 2 {
            return Err(Error::Pattern(format!(
                "need at least two nonzero currents, got {nonzero}"
            )));
        }
        let sum: f64 = entries.iter().map(|(_, i)| i).sum();
        if sum.abs() > CURRENT_SUM_TOL {
            return Err(Error::Compatibility { sum });
        }
        Ok(Self { terminals, entries })
    }

    pub fn terminals(&self) -> Terminals {
        self.terminals
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Nodal load vector `F` (length = node count) for this pattern.
    pub fn load_vector(&self, mesh: &Mesh) -> Result<DVector<f64>> {
        let mut f = DVector::zeros(mesh.node_count());
        for &(id, current) in &self.entries {
            let node = match self.terminals {
                Terminals::Electrodes => mesh.electrode(id)?.node,
                Terminals::Nodes => id,
            };
            f[mesh.node_index(node)?] += current;
        }
        Ok(f)
    }
}

/// The stiffness matrix `S` and load `F`, optionally grounded at one node.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
    /// Dense index of the grounded node, once [`apply_pattern`] has run.
    pub ground: Option<usize>,
}

/// Nodal potentials in volts, indexed like [`Mesh::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    pub potentials: DVector<f64>,
    pub ground: usize,
}

/// Local stiffness for one linear triangle.
pub fn element_stiffness(vertices: &[[f64; 2]; 3], sigma: f64) -> Result<Matrix3<f64>> {
    let scale = bbox_diagonal(vertices.iter().copied());
    element_stiffness_scaled(vertices, sigma, scale)
}

fn element_stiffness_scaled(vertices: &[[f64; 2]; 3], sigma: f64, scale: f64) -> Result<Matrix3<f64>> {
    let [p0, p1, p2] = *vertices;
    let twice_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * twice_area;
    if !(area.abs() > DEGENERATE_AREA_REL * scale * scale) {
        return Err(Error::DegenerateTriangle {
            vertices: *vertices,
            area,
        });
    }
    // shape-function gradients: ∇N_i = (b_i, c_i) / (2A)
    let b = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
    let c = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
    let factor = sigma / (4.0 * area.abs());
    Ok(Matrix3::from_fn(|i, j| factor * (b[i] * b[j] + c[i] * c[j])))
}

/// Global stiffness matrix (ungrounded) with a zero load.
pub fn assemble(mesh: &Mesh, field: &ConductivityField) -> Result<StiffnessSystem> {
    if field.len() != mesh.element_count() {
        return Err(Error::Dimension(format!(
            "conductivity field has {} values for {} elements",
            field.len(),
            mesh.element_count()
        )));
    }
    let n = mesh.node_count();
    let scale = mesh.scale();
    let mut s = DMatrix::zeros(n, n);
    for (element, &sigma) in mesh.elements().iter().zip(field.values()) {
        let coords = mesh.element_coords(element)?;
        let local = element_stiffness_scaled(&coords, sigma, scale)?;
        let idx = [
            mesh.node_index(element.nodes[0])?,
            mesh.node_index(element.nodes[1])?,
            mesh.node_index(element.nodes[2])?,
        ];
        for a in 0..3 {
            for b in 0..3 {
                s[(idx[a], idx[b])] += local[(a, b)];
            }
        }
    }
    Ok(StiffnessSystem {
        matrix: s,
        load: DVector::zeros(n),
        ground: None,
    })
}

/// Enters the pattern's currents into `F` and grounds `ground_node` (a node
/// id) by zeroing its row and column, keeping the diagonal.
pub fn apply_pattern(
    system: &StiffnessSystem,
    mesh: &Mesh,
    pattern: &CurrentPattern,
    ground_node: usize,
) -> Result<StiffnessSystem> {
    let sum: f64 = pattern.entries().iter().map(|(_, i)| i).sum();
    if sum.abs() > CURRENT_SUM_TOL {
        return Err(Error::Compatibility { sum });
    }
    let g = mesh.node_index(ground_node)?;
    let (matrix, _) = ground_matrix(&system.matrix, g);
    let mut load = pattern.load_vector(mesh)?;
    load[g] = 0.0;
    Ok(StiffnessSystem {
        matrix,
        load,
        ground: Some(g),
    })
}

/// Symmetric elimination of row/column `g`. Returns the grounded matrix and
/// the diagonal value kept at `(g, g)`.
pub fn ground_matrix(s: &DMatrix<f64>, g: usize) -> (DMatrix<f64>, f64) {
    let mut m = s.clone();
    let mut diag = s[(g, g)];
    if !(diag > 0.0) {
        diag = 1.0;
    }
    m.row_mut(g).fill(0.0);
    m.column_mut(g).fill(0.0);
    m[(g, g)] = diag;
    (m, diag)
}

/// Reusable factorization of a grounded stiffness matrix.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    chol: Cholesky,
    ground: usize,
}

impl ForwardSolver {
    pub fn new(system: &StiffnessSystem) -> Result<Self> {
        let ground = system.ground.ok_or_else(|| {
            Error::Domain("stiffness system must be grounded before solving".into())
        })?;
        Ok(Self {
            chol: Cholesky::factor(&system.matrix)?,
            ground,
        })
    }

    /// Solves for a load vector; the ground entry of `load` is ignored.
    pub fn solve(&self, load: &DVector<f64>) -> Result<VoltageSolution> {
        if load.len() != self.chol.dim() {
            return Err(Error::Dimension(format!(
                "load has {} entries, system has {}",
                load.len(),
                self.chol.dim()
            )));
        }
        let mut f = load.clone();
        f[self.ground] = 0.0;
        let mut potentials = self.chol.solve(&f);
        potentials[self.ground] = 0.0;
        Ok(VoltageSolution {
            potentials,
            ground: self.ground,
        })
    }
}

pub fn solve_forward(system: &StiffnessSystem) -> Result<VoltageSolution> {
    ForwardSolver::new(system)?.solve(&system.load)
}

/// `‖S·Φ − F‖∞` for a solved system.
pub fn residual_inf(system: &StiffnessSystem, solution: &VoltageSolution) -> f64 {
    (&system.matrix * &solution.potentials - &system.load)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Potential at each non-reference electrode minus the reference potential,
/// in ascending electrode-id order.
pub fn measure(solution: &VoltageSolution, mesh: &Mesh, reference_electrode: usize) -> Result<DVector<f64>> {
    let reference = mesh.electrode(reference_electrode)?;
    let v_ref = solution.potentials[mesh.node_index(reference.node)?];
    let mut electrodes: Vec<_> = mesh
        .electrodes()
        .iter()
        .filter(|e| e.id != reference_electrode)
        .collect();
    electrodes.sort_by_key(|e| e.id);
    let mut out = DVector::zeros(electrodes.len());
    for (slot, e) in out.iter_mut().zip(electrodes) {
        *slot = solution.potentials[mesh.node_index(e.node)?] - v_ref;
    }
    Ok(out)
}

/// Voltage between two electrodes, `Φ(plus) − Φ(minus)`.
pub fn electrode_voltage(solution: &VoltageSolution, mesh: &Mesh, plus: usize, minus: usize) -> Result<f64> {
    let p = mesh.node_index(mesh.electrode(plus)?.node)?;
    let m = mesh.node_index(mesh.electrode(minus)?.node)?;
    Ok(solution.potentials[p] - solution.potentials[m])
}
