//! Error types shared across the crate.

use thiserror::Error;

/// Errors from the dense linear algebra primitives.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// Input matrix is not square.
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare {
        /// Number of rows.
        rows: usize,
        /// Number of columns.
        cols: usize,
    },

    /// Input contains NaN or infinity.
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        /// Row index of the offending entry.
        row: usize,
        /// Column index of the offending entry.
        col: usize,
    },

    /// Shapes do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        /// Expected dimension.
        expected: usize,
        /// Observed dimension.
        actual: usize,
    },

    /// The QL iteration exceeded its sweep cap.
    #[error("eigensolver did not converge at eigenvalue {index} (achieved residual {residual:.3e})")]
    NoConvergence {
        /// Index of the eigenvalue that failed to converge.
        index: usize,
        /// Magnitude of the remaining off-diagonal element.
        residual: f64,
    },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("Cholesky factorization failed at pivot {pivot}: matrix is not positive definite")]
    NotPositiveDefinite {
        /// Index of the failing pivot.
        pivot: usize,
    },

    /// Matrix is singular or too ill-conditioned for the requested operation.
    #[error("matrix is singular for this operation (min/max eigenvalue ratio {ratio:.3e})")]
    Singular {
        /// Ratio of the smallest to largest eigenvalue.
        ratio: f64,
    },

    /// Caller passed an invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Errors raised by the statistical estimators.
#[derive(Debug, Error)]
pub enum EstimateError {
    /// Propagated linear algebra failure.
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    /// The sample size violates a tuning-parameter condition.
    #[error("sample size {actual} too small: {requirement}")]
    SampleTooSmall {
        /// Observed number of samples.
        actual: usize,
        /// Human-readable statement of the violated condition.
        requirement: String,
    },

    /// A configuration value is out of its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Requested factor count cannot be supported by the data shape.
    #[error("factor count {m} out of range: must satisfy 1 <= m < min(n, p) = {limit}")]
    FactorCountOutOfRange {
        /// Requested number of factors.
        m: usize,
        /// min(n, p) for the data at hand.
        limit: usize,
    },

    /// The pilot spectrum is too close to rank deficient for m factors.
    #[error("rank deficiency: eigenvalue {index} is {value:.3e}, below floor {floor:.3e}")]
    RankDeficient {
        /// Index (0-based) of the offending eigenvalue.
        index: usize,
        /// Its value.
        value: f64,
        /// The rejection floor relative to the top eigenvalue.
        floor: f64,
    },

    /// Every sample pair was an exact duplicate.
    #[error("all sample pairs are degenerate (identical rows)")]
    DegeneratePairs,

    /// The max-norm ball around the input admits no positive definite start.
    #[error("PSD projection infeasible: min eigenvalue {min_eigenvalue:.3e} with tau {tau:.3e}")]
    ProjectionInfeasible {
        /// Smallest eigenvalue of the input.
        min_eigenvalue: f64,
        /// Max-norm radius.
        tau: f64,
    },

    /// The dual coordinate descent stalled above the gap tolerance.
    #[error("PSD projection did not converge: duality gap {gap:.3e} after {sweeps} sweeps")]
    ProjectionNoConvergence {
        /// Last duality gap.
        gap: f64,
        /// Number of completed sweeps.
        sweeps: usize,
    },

    /// A column linear program failed.
    #[error("linear program failed for column {column}: {reason}")]
    LpFailure {
        /// Column index.
        column: usize,
        /// Failure description from the solver.
        reason: String,
    },

    /// The m x m core of the Woodbury recomposition is not invertible.
    #[error("inner {dim}x{dim} matrix is singular or ill-conditioned in precision recomposition")]
    SingularCore {
        /// Dimension of the core system.
        dim: usize,
    },
}

/// Errors from reading and writing delimiter-separated files.
#[derive(Debug, Error)]
pub enum DataError {
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A field failed to parse as a number.
    #[error("line {line}: {msg}")]
    Parse {
        /// 1-based line number in the file.
        line: usize,
        /// Description of the parse failure.
        msg: String,
    },

    /// File contained no data rows.
    #[error("empty input: no data rows found")]
    Empty,

    /// Rows have inconsistent field counts.
    #[error("line {line} has {actual} fields, expected {expected}")]
    Ragged {
        /// 1-based line number.
        line: usize,
        /// Field count of the first row.
        expected: usize,
        /// Field count of this row.
        actual: usize,
    },

    /// The `# rows= cols=` comment disagrees with the data.
    #[error("header declares {rows}x{cols} but data is {actual_rows}x{actual_cols}")]
    HeaderMismatch {
        /// Declared rows.
        rows: usize,
        /// Declared columns.
        cols: usize,
        /// Parsed rows.
        actual_rows: usize,
        /// Parsed columns.
        actual_cols: usize,
    },

    /// Data contains NaN or infinity.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite {
        /// 0-based row index.
        row: usize,
        /// 0-based column index.
        col: usize,
    },
}
