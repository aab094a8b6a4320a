use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension {dim} exceeds the configured cap {cap} ({what})")]
    CapExceeded { what: &'static str, dim: u128, cap: u128 },
    #[error("term `{0}` is not Hermitian")]
    NonHermitian(String),
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),
    #[error("ground space is degenerate (E1 - E0 = {splitting:e})")]
    DegenerateGround { splitting: f64 },
    #[error("state norm {norm} is not 1")]
    NotNormalized { norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("epsilon {0} must lie strictly between 0 and 1")]
    InvalidEpsilon(f64),
    #[error("Hamiltonian is frustrated (E0 = {0:e})")]
    Frustrated(f64),
    #[error("term `{0}` is not a projector")]
    NotProjector(String),
    #[error("truncation energy {xi} is below the block ground energy {floor}")]
    TruncationBelowGround { xi: f64, floor: f64 },
    #[error("Chebyshev filter degenerate: {0}")]
    ChebyshevDegenerate(String),
    #[error("phase wrap-around: spectral range {range} exceeds 2π/time_unit = {limit}")]
    PhaseWrap { range: f64, limit: f64 },
    #[error("gap {gap} is not resolvable at resolution {resolution}")]
    UnresolvableGap { gap: f64, resolution: f64 },
    #[error("register ownership mismatch: {0}")]
    Ownership(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("EPR register of dimension {have} is too small for {need} terms")]
    EprTooSmall { have: u128, need: u128 },
    #[error("error budget infeasible: {0}")]
    BudgetInfeasible(String),
    #[error("rationalization residual {0:e} above tolerance")]
    Rationalization(f64),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
