//! Subspace fitting of the mixing matrix from a statistic matrix.
//!
//! A rank-`d` statistic `Y ≈ U·Σ·Rᵀ` constrains the mixing matrix only
//! through its column space: every `A = R·C` fits equally well. Under
//! column-stacking, `vec(R·C) = (I_d ⊗ R)·vec(C)`, so with `B = I_d ⊗ R`
//! the projector
//!
//! ```text
//! Q = I_{Md} − B·(BᵀB)⁻¹·Bᵀ
//! ```
//!
//! annihilates exactly the fitting solutions. Its `d²` eigenvectors of
//! eigenvalue zero, reshaped into `M × d` matrices, form the candidate set.
//! Nothing in the data singles out one candidate, which is the point: a
//! single injection does not determine `A`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{canonical_basis, canonical_sign, sorted_svd, symmetric_eigen_ascending, Cholesky};
use crate::statistics::{MeasurementEnsemble, Statistic};

/// Relative singular-value gap under which truncation is flagged.
pub const TRUNCATION_GAP_REL: f64 = 1e-10;

/// Eigenvalues this close are treated as one degenerate cluster when
/// fixing the candidate basis.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum TruncationWarning {
    /// `sigma[d-1] − sigma[d]` is below `1e-10·sigma[0]`; the split between
    /// signal and complement is not well defined.
    IllConditioned { gap: f64, sigma_top: f64 },
}

#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    /// `M × d` left singular vectors.
    pub u: DMatrix<f64>,
    /// `d` singular values, descending.
    pub sigma: DVector<f64>,
    /// `M × d` right singular vectors spanning the signal subspace.
    pub r: DMatrix<f64>,
    /// `M × (M−d)` orthonormal complement of `r`.
    pub g: DMatrix<f64>,
    /// All `M` singular values of the input, descending.
    pub spectrum: DVector<f64>,
    pub warnings: Vec<TruncationWarning>,
}

impl SubspaceDecomposition {
    pub fn rank(&self) -> usize {
        self.r.ncols()
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.r.transpose()
    }
}

/// Rank-`d` truncated SVD of a square statistic matrix.
///
/// Right singular vectors are sign-fixed (largest entry positive) with the
/// left factor flipped to match; the complement `g` comes back in a
/// basis-independent canonical form.
pub fn truncated_svd(y: &DMatrix<f64>, d: usize) -> Result<SubspaceDecomposition> {
    let m = y.nrows();
    if y.ncols() != m {
        return Err(Error::Dimension(format!("statistic must be square, got {}x{}", m, y.ncols())));
    }
    if d == 0 || d >= m {
        return Err(Error::Dimension(format!("rank must satisfy 1 <= d < M = {m}, got {d}")));
    }
    let (mut u, s, mut v) = sorted_svd(y)?;
    for k in 0..d {
        let mut col: DVector<f64> = v.column(k).into_owned();
        let sign = canonical_sign(&mut col);
        v.set_column(k, &col);
        if sign < 0.0 {
            let flipped = -u.column(k);
            u.set_column(k, &flipped);
        }
    }
    let mut warnings = Vec::new();
    let gap = s[d - 1] - s[d];
    if gap < TRUNCATION_GAP_REL * s[0] {
        warnings.push(TruncationWarning::IllConditioned { gap, sigma_top: s[0] });
    }
    Ok(SubspaceDecomposition {
        u: u.columns(0, d).into_owned(),
        sigma: s.rows(0, d).into_owned(),
        r: v.columns(0, d).into_owned(),
        g: canonical_basis(&v.columns(d, m - d).into_owned()),
        spectrum: s,
        warnings,
    })
}

/// The fitting projector `Q` together with its basis factor `B`.
#[derive(Debug, Clone)]
pub struct ProjectorQ {
    /// `(M·d) × (M·d)`.
    pub q: DMatrix<f64>,
    /// `(M·d) × d²`, equal to `I_d ⊗ R`.
    pub b: DMatrix<f64>,
}

impl ProjectorQ {
    pub fn factor_shape(&self) -> (usize, usize) {
        self.b.shape()
    }
}

/// Builds `Q = I − B(BᵀB)⁻¹Bᵀ` with `B = I_d ⊗ R`.
pub fn build_projector(r: &DMatrix<f64>, d: usize) -> Result<ProjectorQ> {
    if r.ncols() != d {
        return Err(Error::Dimension(format!("R has {} columns, expected d = {d}", r.ncols())));
    }
    if d == 0 || r.nrows() == 0 {
        return Err(Error::Dimension("R must be non-empty".into()));
    }
    let b = DMatrix::<f64>::identity(d, d).kronecker(r);
    let gram = b.transpose() * &b;
    let chol = Cholesky::factor(&gram).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, .. } => {
            Error::SingularNormalEquations(format!("BᵀB loses rank at column {pivot}"))
        }
        other => other,
    })?;
    let md = b.nrows();
    let hat = &b * chol.solve_matrix(&b.transpose());
    let q = DMatrix::<f64>::identity(md, md) - hat;
    let q = (&q + q.transpose()) * 0.5;
    Ok(ProjectorQ { q, b })
}

/// The `d²` least-eigenvalue eigenvectors of `Q`, unvectorized
/// column-major into `M × d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub m: usize,
    pub d: usize,
    pub candidates: Vec<DMatrix<f64>>,
    pub eigenvalues: Vec<f64>,
    /// How many eigenvalues of `Q` fall below [`CLUSTER_TOL`]. Diagnostic
    /// only; the set size is always `d²`.
    pub near_zero: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Candidates as columns of an `(M·d) × d²` matrix.
    pub fn vectorized(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self
            .candidates
            .iter()
            .map(|c| DVector::from_column_slice(c.as_slice()))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Count of eigenvalues of `q` at or below `tol`.
    pub fn count_below(q: &ProjectorQ, tol: f64) -> Result<usize> {
        let (values, _) = symmetric_eigen_ascending(&q.q)?;
        Ok(values.iter().filter(|&&v| v <= tol).count())
    }
}

pub fn extract_candidates(projector: &ProjectorQ, m: usize, d: usize) -> Result<CandidateSet> {
    let md = m * d;
    if projector.q.shape() != (md, md) {
        return Err(Error::Dimension(format!(
            "Q is {:?}, expected {md}x{md} for M = {m}, d = {d}",
            projector.q.shape()
        )));
    }
    let wanted = d * d;
    let (values, vectors) = symmetric_eigen_ascending(&projector.q)?;
    let near_zero = values.iter().filter(|&&v| v <= CLUSTER_TOL).count();

    // Extend the selection to the end of the last degenerate cluster so the
    // choice does not depend on how the solver split a tie.
    let mut end = wanted;
    while end < md && values[end] - values[end - 1] <= CLUSTER_TOL {
        end += 1;
    }
    let mut picked: Vec<DVector<f64>> = Vec::with_capacity(end);
    let mut start = 0;
    while start < end {
        let mut stop = start + 1;
        while stop < end && values[stop] - values[stop - 1] <= CLUSTER_TOL {
            stop += 1;
        }
        let cluster = canonical_basis(&vectors.columns(start, stop - start).into_owned());
        for col in cluster.column_iter() {
            let mut v = col.into_owned();
            canonical_sign(&mut v);
            picked.push(v);
        }
        start = stop;
    }
    picked.truncate(wanted);

    let eigenvalues = picked
        .iter()
        .map(|v| (v.transpose() * &projector.q * v)[(0, 0)])
        .collect();
    let candidates = picked
        .iter()
        .map(|v| DMatrix::from_column_slice(m, d, v.as_slice()))
        .collect();
    Ok(CandidateSet {
        m,
        d,
        candidates,
        eigenvalues,
        near_zero,
    })
}

/// What a candidate mixing matrix is fitted against.
pub enum FitTarget<'a> {
    Subspace(&'a SubspaceDecomposition),
    /// A statistic matrix; its rank-`d` subspace is taken with `d = A.ncols()`.
    Matrix(&'a DMatrix<f64>),
    Ensemble(&'a MeasurementEnsemble, &'a Statistic),
}

/// `min_C ‖A − R·C‖_F`, attained at `C = RᵀA` for orthonormal `R`.
pub fn fitting_residual(a: &DMatrix<f64>, target: FitTarget<'_>) -> Result<f64> {
    let owned;
    let subspace = match target {
        FitTarget::Subspace(s) => s,
        FitTarget::Matrix(y) => {
            owned = truncated_svd(y, a.ncols())?;
            &owned
        }
        FitTarget::Ensemble(ensemble, statistic) => {
            owned = truncated_svd(&statistic.compute(ensemble)?, a.ncols())?;
            &owned
        }
    };
    if a.nrows() != subspace.dim() {
        return Err(Error::Dimension(format!(
            "A has {} rows, subspace lives in dimension {}",
            a.nrows(),
            subspace.dim()
        )));
    }
    let r = &subspace.r;
    Ok((a - r * (r.transpose() * a)).norm())
}

/// Every stage of a single-statistic subspace fit.
#[derive(Debug, Clone)]
pub struct SubspaceFit {
    pub statistic: DMatrix<f64>,
    pub decomposition: SubspaceDecomposition,
    pub projector: ProjectorQ,
    pub candidates: CandidateSet,
}

/// Statistic → truncated SVD → projector → candidates.
pub fn fit_subspace(statistic: DMatrix<f64>, d: usize) -> Result<SubspaceFit> {
    let m = statistic.nrows();
    let decomposition = truncated_svd(&statistic, d)?;
    let projector = build_projector(&decomposition.r, d)?;
    let candidates = extract_candidates(&projector, m, d)?;
    Ok(SubspaceFit {
        statistic,
        decomposition,
        projector,
        candidates,
    })
}

/// Serializes candidates as CSV blocks: a header block with `M`, `d` and the
/// eigenvalues, then one blank-line separated block of `M` rows per
/// candidate.
pub fn write_candidates(set: &CandidateSet, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "M,{}", set.m);
    let _ = writeln!(out, "d,{}", set.d);
    let eig: Vec<String> = set.eigenvalues.iter().map(|v| format!("{v:.16e}")).collect();
    let _ = writeln!(out, "eigenvalues,{}", eig.join(","));
    for c in &set.candidates {
        out.push('\n');
        for row in c.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }
    out
}

pub fn parse_candidates(text: &str) -> Result<CandidateSet> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .collect();
    let mut blocks: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (no, line) in lines {
        if line.is_empty() {
            if !blocks.last().is_some_and(Vec::is_empty) {
                blocks.push(Vec::new());
            }
        } else if let Some(b) = blocks.last_mut() {
            b.push((no, line));
        }
    }
    blocks.retain(|b| !b.is_empty());
    let fmt = |line: usize, message: String| Error::Format { line, message };
    let head = blocks.first().ok_or_else(|| fmt(1, "empty candidate file".into()))?;
    let value = |key: &str| -> Result<(usize, Vec<&str>)> {
        let (no, line) = head
            .iter()
            .find(|(_, l)| l.split(',').next() == Some(key))
            .ok_or_else(|| fmt(1, format!("header is missing `{key}`")))?;
        Ok((*no, line.split(',').skip(1).collect()))
    };
    let parse_usize = |(no, v): (usize, Vec<&str>), key: &str| -> Result<usize> {
        v.first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt(no, format!("cannot parse `{key}`")))
    };
    let m = parse_usize(value("M")?, "M")?;
    let d = parse_usize(value("d")?, "d")?;
    let (eig_line, eig) = value("eigenvalues")?;
    let eigenvalues = eig
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| fmt(eig_line, format!("bad eigenvalue `{s}`"))))
        .collect::<Result<Vec<_>>>()?;

    let mut candidates = Vec::new();
    for block in &blocks[1..] {
        if block.len() != m {
            return Err(fmt(block[0].0, format!("candidate block has {} rows, expected {m}", block.len())));
        }
        let mut values = Vec::with_capacity(m * d);
        for (no, line) in block {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| fmt(*no, format!("bad entry `{s}`"))))
                .collect::<Result<_>>()?;
            if row.len() != d {
                return Err(fmt(*no, format!("row has {} entries, expected {d}", row.len())));
            }
            values.extend(row);
        }
        candidates.push(DMatrix::from_row_slice(m, d, &values));
    }
    if candidates.len() != eigenvalues.len() {
        return Err(fmt(
            eig_line,
            format!("{} eigenvalues for {} candidates", eigenvalues.len(), candidates.len()),
        ));
    }
    Ok(CandidateSet {
        m,
        d,
        candidates,
        eigenvalues,
        near_zero: 0,
    })
}
