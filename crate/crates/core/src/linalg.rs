//! Dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_REL_TOL: f64 = 1e-13;

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
///
/// Immutable once built, so one factorization can serve many right-hand
/// sides from several threads.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "Cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            // a pivot lost to cancellation means the matrix is singular in f64
            if !(d > PIVOT_REL_TOL * a[(j, j)].abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (j, col) in b.column_iter().enumerate() {
            out.set_column(j, &self.solve(&col.into_owned()));
        }
        out
    }
}

/// Full SVD with singular values sorted in descending order.
///
/// Returns `(U, s, V)` with `A = U·diag(s)·Vᵀ`. For square input both
/// factors are square and orthogonal.
pub fn sorted_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD lost U".into()))?;
    let v = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD lost V".into()))?
        .transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let s_sorted = DVector::from_iterator(s.len(), order.iter().map(|&i| s[i]));
    let u_sorted = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v_sorted = DMatrix::from_columns(&order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
    Ok((u_sorted, s_sorted, v_sorted))
}

/// Singular values only, descending.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    DVector::from_vec(s)
}

/// Number of singular values above `rel_tol · s_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.iter().next() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Symmetric eigendecomposition with eigenvalues ascending.
pub fn symmetric_eigen_ascending(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

/// Flips the sign of `v` so its largest-magnitude entry is positive.
/// Ties go to the lowest index. Returns the sign applied.
pub fn canonical_sign(v: &mut DVector<f64>) -> f64 {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
        -1.0
    } else {
        1.0
    }
}

/// Basis-independent orthonormal basis of span(`basis`).
///
/// Forms the projector `P = N·Nᵀ` (after orthonormalizing `basis`) and runs
/// column-pivoted Gram–Schmidt on `P`'s columns, i.e. on the projections of
/// the coordinate axes. The outcome depends only on the subspace, so any
/// rotation a solver applies inside a degenerate eigenspace is undone.
/// Coordinate-aligned subspaces come back as coordinate vectors.
pub fn canonical_basis(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let k = basis.ncols();
    let n = basis.nrows();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let q = basis.clone().qr().q();
    let projector = &q * q.transpose();
    let mut residual = projector;
    let mut out = DMatrix::zeros(n, k);
    for col in 0..k {
        let mut best = 0;
        let mut best_norm = -1.0;
        for j in 0..n {
            let norm = residual.column(j).norm();
            if norm > best_norm * (1.0 + 1e-10) {
                best = j;
                best_norm = norm;
            }
        }
        let mut v: DVector<f64> = residual.column(best).into_owned();
        // re-orthogonalize against accepted vectors
        for prev in 0..col {
            let p = out.column(prev).into_owned();
            let c = p.dot(&v);
            v -= p * c;
        }
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        canonical_sign(&mut v);
        for j in 0..n {
            let c = v.dot(&residual.column(j));
            let mut rc = residual.column_mut(j);
            rc -= &v * c;
        }
        out.set_column(col, &v);
    }
    out
}

/// Cosines of the principal angles between span(a) and span(b), descending.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    singular_values(&(qa.transpose() * qb))
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Dense matrix as CSV rows, preceded by `# ` header lines.
pub fn write_matrix_csv(a: &DMatrix<f64>, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::Format {
                line,
                message: format!("expected {} columns, found {}", cols.unwrap_or(0), record.len()),
            });
        }
        for cell in record.iter() {
            values.push(cell.parse::<f64>().map_err(|_| Error::Format {
                line,
                message: format!("cannot parse `{cell}`"),
            })?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}
