//! Second- and third-order statistics of measurement ensembles.
//!
//! Third-order cumulants of a Gaussian vector vanish, so cumulant matrices
//! built from `y = A·x + n` see only the (non-Gaussian) source part. All
//! estimators use the biased `1/T` normalization.
//!
//! [`MomentAccumulator`] carries the mean and central co-moment tensors and
//! merges exactly, so an ensemble can be processed in chunks (or in
//! parallel) and finalized once.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `T × M` samples of the measured vector, one row per time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    samples: DMatrix<f64>,
}

impl MeasurementEnsemble {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() < 2 {
            return Err(Error::SampleSize {
                required: 2,
                got: samples.nrows(),
            });
        }
        if samples.ncols() == 0 {
            return Err(Error::Dimension("ensemble needs at least one channel".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("ensemble contains non-finite samples".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.samples.ncols()
    }

    pub fn sample(&self, t: usize) -> DVector<f64> {
        self.samples.row(t).transpose()
    }

    pub fn accumulator(&self) -> MomentAccumulator {
        let mut acc = MomentAccumulator::new(self.channel_count());
        for t in 0..self.sample_count() {
            acc.push(self.samples.row(t).iter().copied());
        }
        acc
    }

    /// Reads the CSV layout: header `y0,…,y{M-1}`, one sample per row.
    /// Lines starting with `#` are skipped.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let m = headers.len();
        for (k, h) in headers.iter().enumerate() {
            if h != format!("y{k}") {
                return Err(Error::Format {
                    line: 1,
                    message: format!("header column {k} should be `y{k}`, found `{h}`"),
                });
            }
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != m {
                return Err(Error::Format {
                    line,
                    message: format!("expected {m} columns, found {}", record.len()),
                });
            }
            for (k, field) in record.iter().enumerate() {
                values.push(field.parse::<f64>().map_err(|_| Error::Format {
                    line,
                    message: format!("column y{k}: cannot parse `{field}`"),
                })?);
            }
            rows += 1;
        }
        Self::new(DMatrix::from_row_slice(rows, m, &values))
    }

    pub fn write_csv(&self, writer: impl std::io::Write, header: &[String]) -> Result<()> {
        let mut writer = writer;
        for line in header {
            writeln!(writer, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.channel_count()).map(|k| format!("y{k}")))?;
        for t in 0..self.sample_count() {
            w.write_record(self.samples.row(t).iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Symmetric `M × M` second-order statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(pub DMatrix<f64>);

/// Slices `C_i[j,k] = cum(y_j, y_k, y_i)` of the third-order cumulant tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantMatrixSet {
    slices: Vec<DMatrix<f64>>,
}

impl CumulantMatrixSet {
    pub fn channel_count(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> Result<&DMatrix<f64>> {
        self.slices.get(i).ok_or(Error::Lookup {
            kind: "cumulant slice",
            id: i,
        })
    }

    pub fn entry(&self, i: usize, j: usize, k: usize) -> f64 {
        self.slices[i][(j, k)]
    }

    /// `Σ_i w_i·C_i`.
    pub fn pooled(&self, weights: &[f64]) -> Result<DMatrix<f64>> {
        if weights.len() != self.slices.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} cumulant slices",
                weights.len(),
                self.slices.len()
            )));
        }
        let m = self.slices.len();
        Ok(self
            .slices
            .iter()
            .zip(weights)
            .fold(DMatrix::zeros(m, m), |acc, (c, w)| acc + c * *w))
    }
}

/// Which statistic matrix feeds the subspace fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    Correlation { center: bool },
    /// A single third-order slice `C_i`.
    CumulantSlice(usize),
    /// Weighted sum of all slices; `None` means equal weights.
    PooledCumulant(Option<Vec<f64>>),
}

impl Statistic {
    pub fn compute(&self, ensemble: &MeasurementEnsemble) -> Result<DMatrix<f64>> {
        match self {
            Statistic::Correlation { center } => Ok(correlation(ensemble, *center)?.0),
            Statistic::CumulantSlice(i) => Ok(third_cumulants(ensemble)?.slice(*i)?.clone()),
            Statistic::PooledCumulant(weights) => {
                let set = third_cumulants(ensemble)?;
                let w = weights
                    .clone()
                    .unwrap_or_else(|| vec![1.0; set.channel_count()]);
                set.pooled(&w)
            }
        }
    }
}

/// Mergeable running mean and central co-moments up to third order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    mean: Vec<f64>,
    /// Σ (y−μ)_j (y−μ)_k, row-major `M × M`.
    m2: Vec<f64>,
    /// Σ (y−μ)_i (y−μ)_j (y−μ)_k, `M × M × M`.
    m3: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(channels: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; channels],
            m2: vec![0.0; channels * channels],
            m3: vec![0.0; channels * channels * channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, sample: impl IntoIterator<Item = f64>) {
        let m = self.channels();
        let mean: Vec<f64> = sample.into_iter().collect();
        assert_eq!(mean.len(), m, "sample width must match accumulator");
        let single = Self {
            count: 1,
            mean,
            m2: vec![0.0; m * m],
            m3: vec![0.0; m * m * m],
        };
        self.merge(&single);
    }

    /// Combines two accumulators as if their samples had been pushed into one.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.channels(), other.channels());
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let m = self.channels();
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta: Vec<f64> = (0..m).map(|i| other.mean[i] - self.mean[i]).collect();

        let mut m3 = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let idx = (i * m + j) * m + k;
                    let cross = |a: usize, b: usize| na * other.m2[a * m + b] - nb * self.m2[a * m + b];
                    m3[idx] = self.m3[idx]
                        + other.m3[idx]
                        + delta[i] * delta[j] * delta[k] * na * nb * (na - nb) / (n * n)
                        + (cross(j, k) * delta[i] + cross(i, k) * delta[j] + cross(i, j) * delta[k]) / n;
                }
            }
        }
        for j in 0..m {
            for k in 0..m {
                self.m2[j * m + k] += other.m2[j * m + k] + delta[j] * delta[k] * na * nb / n;
            }
        }
        for i in 0..m {
            self.mean[i] += delta[i] * nb / n;
        }
        self.m3 = m3;
        self.count += other.count;
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    pub fn correlation(&self, center: bool) -> Result<CorrelationMatrix> {
        if self.count < 2 {
            return Err(Error::SampleSize {
                required: 2,
                got: self.count,
            });
        }
        let m = self.channels();
        let t = self.count as f64;
        let y = DMatrix::from_fn(m, m, |j, k| {
            let central = self.m2[j * m + k] / t;
            if center {
                central
            } else {
                central + self.mean[j] * self.mean[k]
            }
        });
        Ok(CorrelationMatrix(y))
    }

    pub fn third_cumulants(&self) -> Result<CumulantMatrixSet> {
        if self.count < 3 {
            return Err(Error::SampleSize {
                required: 3,
                got: self.count,
            });
        }
        let m = self.channels();
        let t = self.count as f64;
        let slices = (0..m)
            .map(|i| DMatrix::from_fn(m, m, |j, k| self.m3[(i * m + j) * m + k] / t))
            .collect();
        Ok(CumulantMatrixSet { slices })
    }
}

/// `Y = (1/T)·Σ_t y(t)·y(t)ᵀ`, with the sample mean removed first when
/// `center` is set.
pub fn correlation(ensemble: &MeasurementEnsemble, center: bool) -> Result<CorrelationMatrix> {
    let t = ensemble.sample_count();
    if t < 2 {
        return Err(Error::SampleSize { required: 2, got: t });
    }
    let data = if center {
        centered(ensemble.samples())
    } else {
        ensemble.samples().clone()
    };
    let y = data.transpose() * &data / t as f64;
    Ok(CorrelationMatrix(symmetrize(y)))
}

/// Mean-removed third moments, `C_i[j,k] = (1/T)·Σ_t ỹ_j ỹ_k ỹ_i`.
/// Every index permutation reads the same sum, so the slices are exactly
/// symmetric.
pub fn third_cumulants(ensemble: &MeasurementEnsemble) -> Result<CumulantMatrixSet> {
    let t = ensemble.sample_count();
    if t < 3 {
        return Err(Error::SampleSize { required: 3, got: t });
    }
    let m = ensemble.channel_count();
    let data = centered(ensemble.samples());
    let mut tensor = vec![0.0; m * m * m];
    for (i, j, k) in sorted_triples(m) {
        let s: f64 = (0..t)
            .map(|r| data[(r, i)] * data[(r, j)] * data[(r, k)])
            .sum::<f64>()
            / t as f64;
        for (a, b, c) in permutations(i, j, k) {
            tensor[(a * m + b) * m + c] = s;
        }
    }
    let slices = (0..m)
        .map(|i| DMatrix::from_fn(m, m, |j, k| tensor[(i * m + j) * m + k]))
        .collect();
    Ok(CumulantMatrixSet { slices })
}

/// Batch-means standard error of every third-cumulant entry.
///
/// The products `ỹ_i ỹ_j ỹ_k` are averaged over `batches` contiguous
/// blocks; the spread of the block means gives a standard error that stays
/// honest for serially correlated (colored) data.
pub fn cumulant_standard_errors(ensemble: &MeasurementEnsemble, batches: usize) -> Result<CumulantMatrixSet> {
    let t = ensemble.sample_count();
    if batches < 2 || t < 2 * batches {
        return Err(Error::SampleSize {
            required: 2 * batches.max(2),
            got: t,
        });
    }
    let m = ensemble.channel_count();
    let data = centered(ensemble.samples());
    let len = t / batches;
    let mut tensor = vec![0.0; m * m * m];
    for (i, j, k) in sorted_triples(m) {
        let means: Vec<f64> = (0..batches)
            .map(|b| {
                (b * len..(b + 1) * len)
                    .map(|r| data[(r, i)] * data[(r, j)] * data[(r, k)])
                    .sum::<f64>()
                    / len as f64
            })
            .collect();
        let mu = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        for (a, b, c) in permutations(i, j, k) {
            tensor[(a * m + b) * m + c] = se;
        }
    }
    let slices = (0..m)
        .map(|i| DMatrix::from_fn(m, m, |j, k| tensor[(i * m + j) * m + k]))
        .collect();
    Ok(CumulantMatrixSet { slices })
}

fn centered(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let t = samples.nrows() as f64;
    let mut out = samples.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / t;
        col.add_scalar_mut(-mean);
    }
    out
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

fn sorted_triples(m: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..m).flat_map(move |i| (i..m).flat_map(move |j| (j..m).map(move |k| (i, j, k))))
}

fn permutations(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
}
