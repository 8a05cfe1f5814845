use crate::lp::LpStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario {scenario}: second-stage LP ended {status:?}")]
    Subproblem { scenario: String, status: LpStatus },

    #[error("LP ended {0:?}")]
    Lp(LpStatus),

    #[error("zone {zone}: EENS limit unattainable, {residual:.6} MW of capacity short with every bound exhausted")]
    RecoveryInfeasible { zone: String, residual: f64 },

    #[error("weak duality violated at outer iteration {k}: lower {lower} > upper {upper}")]
    Sandwich { k: usize, lower: f64, upper: f64 },

    #[error("extended form has {vars} variables, above the cap of {cap}")]
    TooLarge { vars: usize, cap: usize },

    #[error("extended form infeasible: {0}")]
    OracleInfeasible(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Subproblem { .. } => "subproblem",
            Error::Lp(_) => "lp",
            Error::RecoveryInfeasible { .. } => "recovery-infeasible",
            Error::Sandwich { .. } => "sandwich",
            Error::TooLarge { .. } => "too-large",
            Error::OracleInfeasible(_) => "oracle-infeasible",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
