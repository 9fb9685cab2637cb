use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input.
    #[error("input error: {0}")]
    Input(String),
    /// A point outside the region where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A least-squares subsystem of the colligation fit is rank deficient.
    #[error("fit error in {subsystem}: {detail}")]
    Fit { subsystem: String, detail: String },
    /// A documented precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// The point is not a carapoint of the realization.
    #[error("not a carapoint: {0}")]
    NotCarapoint(String),
    /// A symmetrized-tridisc membership test failed.
    #[error("membership error: {0}")]
    Membership(String),
    /// An invariant that the mathematics guarantees was violated numerically.
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
