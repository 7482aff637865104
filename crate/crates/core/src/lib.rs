//! Joint photon and atom counting statistics of Gaussian pseudo-thermal
//! states in hybrid atom-photon cavity systems.
//!
//! The pipeline runs from a quadratic Hamiltonian ([`model`]) through its
//! Bogoliubov diagonalization ([`symplectic`]) to the covariance matrix of the
//! thermal state ([`gaussian`]), and from there to hafnian-based joint
//! occupation probabilities ([`hafnian`]) and exact sampling ([`sampler`]).
//! [`oracle`] holds two independent reference engines (a truncated Fock-space
//! density matrix and a generating-function series) used to validate the
//! hafnian route on small systems.

pub mod error;
pub mod gaussian;
pub mod hafnian;
pub(crate) mod linalg;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod symplectic;

pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, SingleModeStats};
pub use hafnian::{OccupationPattern, SymmetricComplexMatrix};
pub use model::{GrandDynamicalMatrix, HamiltonianBlocks, ModeLayout, ToyParams};
pub use sampler::ProbabilityTable;
pub use symplectic::{BlochMessiahFactors, BogoliubovTransform};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<C64>;
