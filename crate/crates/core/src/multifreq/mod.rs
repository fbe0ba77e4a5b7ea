//! Stacked multi-pattern, multi-frequency reconstruction.
//!
//! One injection gives one column of `S·Φ = F`; stacking `N` injections
//! gives `S·[Φ₁ … Φ_N] = [F₁ … F_N]`. When the stacked potentials span the
//! node space (modulo constants), the stiffness matrix is determined, and
//! because assembly is linear in per-element conductivity, so is `σ`.
//!
//! The simulator evaluates a frequency-dependent tissue model per
//! injection, while reconstruction assumes a single `S` for the whole
//! stack. With zero dispersion the two agree exactly; otherwise the
//! mismatch shows up in the residuals and the reported spread.

mod config;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use config::{parse_sweep, ElementModel, SweepFile};

use crate::error::{Error, Result};
use crate::forward::{apply_pattern, assemble, element_stiffness, ConductivityField, CurrentPattern, ForwardSolver, CURRENT_SUM_TOL};
use crate::linalg::{numerical_rank, parse_matrix_csv, sorted_svd, write_matrix_csv, Cholesky};
use crate::mesh::Mesh;

/// Relative singular-value floor for the stacked-voltage rank test.
pub const STACK_RANK_TOL: f64 = 1e-10;

/// Relative singular-value floor for the assembly operator.
pub const ASSEMBLY_RANK_TOL: f64 = 1e-10;

/// Single-dispersion (Debye-type) conductivity magnitude per element:
/// `σ(ω) = σ∞ + (σ0 − σ∞) / (1 + (ω·τ)²)` with `ω = 2πf`.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueModel {
    sigma0: Vec<f64>,
    sigma_inf: Vec<f64>,
    tau: Vec<f64>,
}

impl TissueModel {
    pub fn new(sigma0: Vec<f64>, sigma_inf: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let n = sigma0.len();
        if sigma_inf.len() != n || tau.len() != n {
            return Err(Error::Dimension(format!(
                "tissue parameters have lengths {}, {}, {}",
                n,
                sigma_inf.len(),
                tau.len()
            )));
        }
        for e in 0..n {
            if !(sigma0[e] > 0.0 && sigma_inf[e] > 0.0 && sigma0[e].is_finite() && sigma_inf[e].is_finite()) {
                return Err(Error::Domain(format!("element {e}: conductivities must be positive")));
            }
            if !(tau[e] >= 0.0 && tau[e].is_finite()) {
                return Err(Error::Domain(format!("element {e}: relaxation time must be >= 0")));
            }
        }
        Ok(Self { sigma0, sigma_inf, tau })
    }

    /// Frequency-independent model with `σ(ω) = field`.
    pub fn dispersion_free(field: &ConductivityField) -> Self {
        let s = field.values().to_vec();
        Self {
            sigma_inf: s.clone(),
            tau: vec![0.0; s.len()],
            sigma0: s,
        }
    }

    /// `σ0 = field`, `σ∞ = field·ratio`, common relaxation time `tau`.
    pub fn proportional(field: &ConductivityField, ratio: f64, tau: f64) -> Result<Self> {
        let s = field.values();
        Self::new(s.to_vec(), s.iter().map(|v| v * ratio).collect(), vec![tau; s.len()])
    }

    pub fn element_count(&self) -> usize {
        self.sigma0.len()
    }

    pub fn sigma0(&self) -> &[f64] {
        &self.sigma0
    }

    pub fn sigma_inf(&self) -> &[f64] {
        &self.sigma_inf
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Largest `|σ0 − σ∞|` over elements.
    pub fn dispersion_strength(&self) -> f64 {
        self.sigma0
            .iter()
            .zip(&self.sigma_inf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn conductivity_at(&self, frequency: f64) -> Result<ConductivityField> {
        let omega = 2.0 * PI * frequency;
        ConductivityField::new(
            (0..self.element_count())
                .map(|e| {
                    let wt = omega * self.tau[e];
                    self.sigma_inf[e] + (self.sigma0[e] - self.sigma_inf[e]) / (1.0 + wt * wt)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// Every pattern at every frequency, frequency-major.
    #[default]
    CrossProduct,
    /// Pattern `k` at frequency `k`.
    Zipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Observation {
    /// Potentials at every node.
    #[default]
    Full,
    /// Potentials at electrode nodes only.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub frequencies: Vec<f64>,
    pub patterns: Vec<CurrentPattern>,
    pub pairing: Pairing,
    pub observation: Observation,
    /// Node id held at zero potential; defaults to the first electrode's node.
    pub ground: Option<usize>,
}

impl SweepConfig {
    pub fn new(frequencies: Vec<f64>, patterns: Vec<CurrentPattern>) -> Result<Self> {
        let cfg = Self {
            frequencies,
            patterns,
            pairing: Pairing::default(),
            observation: Observation::default(),
            ground: None,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.frequencies.is_empty() || self.patterns.is_empty() {
            return Err(Error::Domain("sweep needs at least one frequency and one pattern".into()));
        }
        if let Some(f) = self.frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::Domain(format!("frequencies must be positive, got {f}")));
        }
        let mut sorted = self.frequencies.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("frequencies must be distinct".into()));
        }
        if self.pairing == Pairing::Zipped && self.frequencies.len() != self.patterns.len() {
            return Err(Error::Dimension(format!(
                "zipped sweep pairs {} frequencies with {} patterns",
                self.frequencies.len(),
                self.patterns.len()
            )));
        }
        Ok(())
    }

    /// `(frequency index, pattern index)` in stacking order.
    pub fn injections(&self) -> Vec<(usize, usize)> {
        match self.pairing {
            Pairing::CrossProduct => (0..self.frequencies.len())
                .flat_map(|f| (0..self.patterns.len()).map(move |p| (f, p)))
                .collect(),
            Pairing::Zipped => (0..self.patterns.len()).map(|k| (k, k)).collect(),
        }
    }

    fn ground_node(&self, mesh: &Mesh) -> Result<usize> {
        match self.ground {
            Some(id) => Ok(id),
            None => mesh
                .electrodes()
                .first()
                .map(|e| e.node)
                .or_else(|| mesh.nodes().first().map(|n| n.id))
                .ok_or_else(|| Error::Domain("mesh has no nodes".into())),
        }
    }
}

/// `n` nodal patterns driving `+current` into node `k` and out of node
/// `k+1` (cyclically). Together they span every zero-sum load.
pub fn nodal_chain_patterns(mesh: &Mesh, current: f64) -> Result<Vec<CurrentPattern>> {
    let ids: Vec<usize> = mesh.nodes().iter().map(|n| n.id).collect();
    (0..ids.len())
        .map(|k| CurrentPattern::nodal(vec![(ids[k], current), (ids[(k + 1) % ids.len()], -current)]))
        .collect()
}

/// Adjacent-electrode drive patterns around the electrode ring.
pub fn adjacent_patterns(mesh: &Mesh, current: f64) -> Result<Vec<CurrentPattern>> {
    let mut ids: Vec<usize> = mesh.electrodes().iter().map(|e| e.id).collect();
    ids.sort_unstable();
    (0..ids.len())
        .map(|k| CurrentPattern::pair(ids[k], ids[(k + 1) % ids.len()], current))
        .collect()
}

#[derive(Debug, Clone)]
pub struct StackedSystem {
    /// Potential columns; rows are the observed nodes.
    pub phi: DMatrix<f64>,
    /// `n × N` load columns.
    pub f: DMatrix<f64>,
    pub observation: Observation,
    /// Dense node indices of the rows of `phi`.
    pub observed: Vec<usize>,
    /// `(frequency index, pattern index)` of each column.
    pub injections: Vec<(usize, usize)>,
}

impl StackedSystem {
    /// Full-observation stack from given matrices.
    pub fn new(phi: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        if phi.shape() != f.shape() {
            return Err(Error::Dimension(format!(
                "Φ is {:?} but F is {:?}",
                phi.shape(),
                f.shape()
            )));
        }
        for (k, col) in f.column_iter().enumerate() {
            let sum = col.sum();
            if sum.abs() > CURRENT_SUM_TOL {
                return Err(Error::Injection {
                    frequency: 0,
                    pattern: k,
                    source: Box::new(Error::Compatibility { sum }),
                });
            }
        }
        let n = phi.nrows();
        let injections = (0..phi.ncols()).map(|k| (0, k)).collect();
        Ok(Self {
            phi,
            f,
            observation: Observation::Full,
            observed: (0..n).collect(),
            injections,
        })
    }

    pub fn injection_count(&self) -> usize {
        self.phi.ncols()
    }

    pub fn node_count(&self) -> usize {
        self.f.nrows()
    }

    /// Potentials with the per-column mean removed; `S·Φ` only sees this
    /// part because `S·1 = 0`.
    pub fn gauge_reduced(&self) -> DMatrix<f64> {
        let mut psi = self.phi.clone();
        let n = psi.nrows() as f64;
        for mut col in psi.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
        }
        psi
    }

    /// Inverse of the `(n−1)`-th singular value of the gauge-reduced
    /// potentials; infinite when they do not span the gauge-free space.
    /// Appending a column can only make it smaller.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.phi.nrows();
        if n < 2 {
            return f64::INFINITY;
        }
        let s = crate::linalg::singular_values(&self.gauge_reduced());
        match s.get(n - 2) {
            Some(&v) if v > 0.0 => 1.0 / v,
            _ => f64::INFINITY,
        }
    }
}

impl StackedSystem {
    /// `Φ` and `F` as a pair of CSV texts.
    pub fn to_csv(&self, header: &[String]) -> (String, String) {
        (write_matrix_csv(&self.phi, header), write_matrix_csv(&self.f, header))
    }

    /// Full-observation stack from a pair of CSV texts.
    pub fn from_csv(phi: &str, f: &str) -> Result<Self> {
        Self::new(parse_matrix_csv(phi)?, parse_matrix_csv(f)?)
    }
}

/// Runs every injection of the sweep through the forward solver.
///
/// Patterns sharing a frequency share one factorization; frequencies are
/// solved in parallel and stacked in config order.
pub fn simulate_sweep(mesh: &Mesh, tissue: &TissueModel, config: &SweepConfig) -> Result<StackedSystem> {
    config.check()?;
    if tissue.element_count() != mesh.element_count() {
        return Err(Error::Dimension(format!(
            "tissue model has {} elements, mesh has {}",
            tissue.element_count(),
            mesh.element_count()
        )));
    }
    let injections = config.injections();
    let ground = config.ground_node(mesh)?;
    let mut by_frequency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(fi, pi) in &injections {
        by_frequency.entry(fi).or_default().push(pi);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_frequency.into_iter().collect();

    let solved: Vec<Vec<((usize, usize), DVector<f64>, DVector<f64>)>> = groups
        .par_iter()
        .map(|(fi, patterns)| {
            let fi = *fi;
            let annotate = |pi: usize| move |e: Error| Error::Injection {
                frequency: fi,
                pattern: pi,
                source: Box::new(e),
            };
            let field = tissue.conductivity_at(config.frequencies[fi]).map_err(annotate(patterns[0]))?;
            let system = assemble(mesh, &field).map_err(annotate(patterns[0]))?;
            let grounded = apply_pattern(&system, mesh, &config.patterns[patterns[0]], ground)
                .map_err(annotate(patterns[0]))?;
            let solver = ForwardSolver::new(&grounded).map_err(annotate(patterns[0]))?;
            patterns
                .iter()
                .map(|&pi| {
                    let load = config.patterns[pi].load_vector(mesh).map_err(annotate(pi))?;
                    let sol = solver.solve(&load).map_err(annotate(pi))?;
                    Ok(((fi, pi), sol.potentials, load))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: BTreeMap<(usize, usize), (DVector<f64>, DVector<f64>)> = BTreeMap::new();
    for group in solved {
        for (key, phi, load) in group {
            columns.insert(key, (phi, load));
        }
    }
    let n = mesh.node_count();
    let observed: Vec<usize> = match config.observation {
        Observation::Full => (0..n).collect(),
        Observation::Boundary => mesh
            .electrodes()
            .iter()
            .map(|e| mesh.node_index(e.node))
            .collect::<Result<_>>()?,
    };
    let mut phi = DMatrix::zeros(observed.len(), injections.len());
    let mut f = DMatrix::zeros(n, injections.len());
    for (col, key) in injections.iter().enumerate() {
        let (p, l) = &columns[key];
        for (row, &node) in observed.iter().enumerate() {
            phi[(row, col)] = p[node];
        }
        f.set_column(col, l);
    }
    Ok(StackedSystem {
        phi,
        f,
        observation: config.observation,
        observed,
        injections,
    })
}

#[derive(Debug, Clone)]
pub struct StackSolution {
    /// Estimated symmetric stiffness matrix with zero row sums.
    pub s_hat: DMatrix<f64>,
    /// `‖Ŝ·Φ − F‖_F`.
    pub residual: f64,
    /// Gauge-reduced numerical rank of Φ (equals `n − 1` on success).
    pub rank: usize,
    pub condition: f64,
}

/// Least-squares `Ŝ = argmin ‖S·Φ − F‖_F` over symmetric `S` with `S·1 = 0`.
///
/// Write the gauge-reduced potentials as `Ψ = U·Σ·Vᵀ` with `U` spanning the
/// complement of the constant vector. Every admissible `S` is `U·T·Uᵀ`
/// with `T` symmetric, and the objective separates into independent
/// scalar problems, one per upper-triangle entry of `T`:
///
/// ```text
/// T_ab = (σ_b·H_ab + σ_a·H_ba) / (σ_a² + σ_b²),   H = Uᵀ·F·V
/// ```
pub fn stack_solve(stacked: &StackedSystem) -> Result<StackSolution> {
    let n = stacked.node_count();
    if stacked.observation == Observation::Boundary || stacked.phi.nrows() != n {
        return Err(Error::PartialObservation {
            observed: stacked.phi.nrows(),
            nodes: n,
        });
    }
    if n < 2 {
        return Err(Error::Dimension("need at least two nodes".into()));
    }
    let psi = stacked.gauge_reduced();
    let required = n - 1;
    let rank = numerical_rank(&psi, STACK_RANK_TOL);
    if rank < required {
        return Err(Error::RankDeficient { rank, required });
    }
    let (u, s, v) = sorted_svd(&psi)?;
    let u = u.columns(0, required).into_owned();
    let v = v.columns(0, required).into_owned();
    let h = u.transpose() * &stacked.f * &v;
    let t = DMatrix::from_fn(required, required, |a, b| {
        (s[b] * h[(a, b)] + s[a] * h[(b, a)]) / (s[a] * s[a] + s[b] * s[b])
    });
    let s_hat = &u * t * u.transpose();
    let s_hat = (&s_hat + s_hat.transpose()) * 0.5;
    let residual = (&s_hat * &stacked.phi - &stacked.f).norm();
    Ok(StackSolution {
        s_hat,
        residual,
        rank,
        condition: 1.0 / s[required - 1],
    })
}

/// Linear map from per-element conductivity to the structurally nonzero
/// upper-triangle entries of the assembled matrix. Off-diagonal rows carry
/// a `√2` weight so that the Euclidean norm matches the Frobenius norm of
/// the symmetric matrix.
#[derive(Debug, Clone)]
pub struct AssemblyOperator {
    pub matrix: DMatrix<f64>,
    /// `(row, col)` dense node indices (`row <= col`) for each operator row.
    pub entries: Vec<(usize, usize)>,
}

impl AssemblyOperator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut locals = Vec::with_capacity(mesh.element_count());
        for e in mesh.elements() {
            let idx = [
                mesh.node_index(e.nodes[0])?,
                mesh.node_index(e.nodes[1])?,
                mesh.node_index(e.nodes[2])?,
            ];
            let k = element_stiffness(&mesh.element_coords(e)?, 1.0)?;
            for a in 0..3 {
                for b in 0..3 {
                    let key = (idx[a].min(idx[b]), idx[a].max(idx[b]));
                    let next = index.len();
                    index.entry(key).or_insert(next);
                }
            }
            locals.push((idx, k));
        }
        let mut entries = vec![(0, 0); index.len()];
        for (&key, &row) in &index {
            entries[row] = key;
        }
        let mut matrix = DMatrix::zeros(index.len(), mesh.element_count());
        for (col, (idx, k)) in locals.iter().enumerate() {
            for a in 0..3 {
                for b in a..3 {
                    let key = (idx[a].min(idx[b]), idx[a].max(idx[b]));
                    let w = if a == b { 1.0 } else { std::f64::consts::SQRT_2 };
                    matrix[(index[&key], col)] += w * k[(a, b)];
                }
            }
        }
        Ok(Self { matrix, entries })
    }

    /// Operator image of a symmetric matrix's tracked entries.
    pub fn sample(&self, s: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|&(i, j)| {
                if i == j {
                    s[(i, j)]
                } else {
                    std::f64::consts::SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)])
                }
            }),
        )
    }
}

#[derive(Debug, Clone)]
pub struct RecoveredField {
    /// Per-element estimate; may contain non-positive values.
    pub sigma: Vec<f64>,
    /// Element positions whose estimate is not positive.
    pub negative: Vec<usize>,
    /// `‖assemble(σ̂) − Ŝ‖_F`.
    pub assembly_residual: f64,
    /// Ratio of extreme singular values of the assembly operator.
    pub condition: f64,
    /// Inverse smallest singular value: bound on `‖Δσ‖ / ‖ΔS‖_F`.
    pub sensitivity: f64,
}

/// `σ̂ = argmin_σ ‖assemble(mesh, σ) − Ŝ‖_F` through the normal equations.
pub fn recover_conductivity(s_hat: &DMatrix<f64>, mesh: &Mesh) -> Result<RecoveredField> {
    let n = mesh.node_count();
    if s_hat.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Ŝ is {:?}, mesh has {n} nodes",
            s_hat.shape()
        )));
    }
    let asym = (s_hat - s_hat.transpose()).norm();
    if asym > 1e-6 * s_hat.norm() {
        return Err(Error::Domain(format!(
            "Ŝ is not symmetric: ‖Ŝ − Ŝᵀ‖ = {asym:e}"
        )));
    }
    let op = AssemblyOperator::new(mesh)?;
    let unknowns = mesh.element_count();
    let s = crate::linalg::singular_values(&op.matrix);
    let top = s.get(0).copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > ASSEMBLY_RANK_TOL * top).count();
    if rank < unknowns {
        return Err(Error::Identifiability { rank, unknowns });
    }
    let smallest = s[unknowns - 1];
    let gram = op.matrix.transpose() * &op.matrix;
    let rhs = op.matrix.transpose() * op.sample(s_hat);
    let sigma = Cholesky::factor(&gram)?.solve(&rhs);
    let sigma: Vec<f64> = sigma.iter().copied().collect();

    let fitted = assemble_raw(mesh, &sigma)?;
    let assembly_residual = (fitted - s_hat).norm();
    let negative = sigma
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > 0.0))
        .map(|(e, _)| e)
        .collect();
    Ok(RecoveredField {
        sigma,
        negative,
        assembly_residual,
        condition: top / smallest,
        sensitivity: 1.0 / smallest,
    })
}

/// Assembly without the positivity check on `σ`.
fn assemble_raw(mesh: &Mesh, sigma: &[f64]) -> Result<DMatrix<f64>> {
    let n = mesh.node_count();
    let mut s = DMatrix::zeros(n, n);
    for (e, &value) in mesh.elements().iter().zip(sigma) {
        let idx = [
            mesh.node_index(e.nodes[0])?,
            mesh.node_index(e.nodes[1])?,
            mesh.node_index(e.nodes[2])?,
        ];
        let k = element_stiffness(&mesh.element_coords(e)?, 1.0)?;
        for a in 0..3 {
            for b in 0..3 {
                s[(idx[a], idx[b])] += value * k[(a, b)];
            }
        }
    }
    Ok(s)
}

/// Everything a multi-frequency run produces.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub stacked: StackedSystem,
    pub solution: StackSolution,
    pub field: RecoveredField,
    /// Mean over the sweep frequencies of the model conductivity, per element.
    pub effective_sigma: Vec<f64>,
    /// Max − min over the sweep frequencies of the model conductivity.
    pub frequency_spread: Vec<f64>,
}

impl Reconstruction {
    /// Largest relative deviation of σ̂ from the effective conductivity.
    pub fn max_relative_error(&self) -> f64 {
        relative_error(&self.field.sigma, &self.effective_sigma)
    }
}

pub fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max)
}

/// simulate → stack → recover.
pub fn reconstruct(mesh: &Mesh, tissue: &TissueModel, config: &SweepConfig) -> Result<Reconstruction> {
    let stacked = simulate_sweep(mesh, tissue, config)?;
    let solution = stack_solve(&stacked)?;
    let field = recover_conductivity(&solution.s_hat, mesh)?;
    let per_freq = config
        .frequencies
        .iter()
        .map(|&f| tissue.conductivity_at(f))
        .collect::<Result<Vec<_>>>()?;
    let ne = mesh.element_count();
    let k = per_freq.len() as f64;
    let effective_sigma = (0..ne)
        .map(|e| per_freq.iter().map(|s| s.values()[e]).sum::<f64>() / k)
        .collect();
    let frequency_spread = (0..ne)
        .map(|e| {
            let vals = per_freq.iter().map(|s| s.values()[e]);
            let hi = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    Ok(Reconstruction {
        stacked,
        solution,
        field,
        effective_sigma,
        frequency_spread,
    })
}

#[cfg(test)]
mod tests;
