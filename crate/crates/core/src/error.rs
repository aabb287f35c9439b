use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classes of failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Poles, resonances, singular pencils: the numbers are fine but the
    /// requested spectral point or scale is not admissible.
    Numeric,
    /// Input data violating a documented invariant.
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("A + iB is numerically singular (pivot ratio {pivot_ratio:.3e})")]
    SingularPencil { pivot_ratio: f64 },

    #[error("singular matrix in linear solve (pivot ratio {pivot_ratio:.3e})")]
    SingularMatrix { pivot_ratio: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NonUnitary { residual: f64 },

    #[error("invalid coupling: rank_ok={rank_ok}, hermitian_ok={hermitian_ok}")]
    InvalidCoupling { rank_ok: bool, hermitian_ok: bool },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("rank-deficient boundary condition: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("inner structure resonance at this spectral parameter (pivot {pivot:.3e})")]
    Resonance { pivot: f64 },

    #[error("spectral pole: {0}")]
    Pole(String),

    #[error("nonpositive value {value} in rate fit")]
    NonPositive { value: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularPencil { .. }
            | Error::SingularMatrix { .. }
            | Error::Resonance { .. }
            | Error::Pole(_) => ErrorKind::Numeric,
            _ => ErrorKind::Invariant,
        }
    }
}
