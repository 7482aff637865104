use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    /// The quadratic form is not positive definite, so no thermal state exists.
    #[error("unstable Hamiltonian: {0}")]
    Unstable(String),

    #[error("divergent quasiparticle occupation: energy {energy} at temperature {temperature}")]
    DivergentOccupation { energy: f64, temperature: f64 },

    #[error("unphysical covariance: {0}")]
    Unphysical(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("numerical consistency check failed: {0}")]
    Numerical(String),

    #[error("Fock truncation insufficient: {0}")]
    Cutoff(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
