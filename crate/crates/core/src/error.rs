use thiserror::Error;

use crate::mesh::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate triangle with vertices {vertices:?} (area {area:e})")]
    DegenerateTriangle { vertices: [[f64; 2]; 3], area: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Injected currents do not sum to zero, so the Neumann problem has no solution.
    #[error("Neumann compatibility violated: injected currents sum to {sum:e}, expected 0")]
    Compatibility { sum: f64 },

    #[error("invalid current pattern: {0}")]
    Pattern(String),

    #[error("factorization failed at pivot {pivot} (value {value:e}); matrix is not positive definite")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("need at least {required} samples, got {got}")]
    SampleSize { required: usize, got: usize },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("mesh failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("unknown {kind} id {id}")]
    Lookup { kind: &'static str, id: usize },

    /// The stacked voltage matrix does not span the gauge-reduced node space.
    #[error("stacked voltages are rank deficient: numerical rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("conductivity is not identifiable: operator rank {rank} < {unknowns} unknowns (gap {})", unknowns - rank)]
    Identifiability { rank: usize, unknowns: usize },

    /// Only a subset of node potentials was observed; the full stiffness
    /// matrix cannot be recovered from it.
    #[error("only {observed} of {nodes} node potentials observed; full-matrix recovery needs all of them (gap {})", nodes - observed)]
    PartialObservation { observed: usize, nodes: usize },

    #[error("normal equations are singular: {0}")]
    SingularNormalEquations(String),

    #[error("model assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },

    #[error("injection (frequency #{frequency}, pattern #{pattern}): {source}")]
    Injection {
        frequency: usize,
        pattern: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
