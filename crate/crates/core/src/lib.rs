//! Numerical engine for the stochastic partial differential equation
//! `du/dt = L u + u dW`, where `L` generates a Feller process and `dW` is
//! Gaussian noise with covariance `|t-s|^{-beta0} gamma(x-y)`.
//!
//! The engine simulates solutions and moments through their Feynman-Kac
//! representations: sample a Feller path, accumulate the singular double-time
//! Hamiltonian `int int |r-s|^{-beta0} gamma(X_r - X_s) dr ds`, and recombine
//! with Gaussian draws or closed-form corrections depending on whether the
//! equation is read in the Stratonovich or the Skorohod sense.  A Wiener
//! chaos series for the second moment and spectral (Dalang-type) convergence
//! classifiers provide independent cross-checks at desk scale.

pub mod chaos;
pub mod error;
pub mod exec;
pub mod hamiltonian;
pub mod linalg;
pub mod process;
pub mod quad;
pub mod regularity;
pub mod solver;
pub mod spectral;

pub use error::EngineError;
pub use exec::Pool;
pub use hamiltonian::{DiagonalPolicy, HamiltonianValue, Regularization};
pub use process::{PathGrid, ProcessSpec};
pub use solver::{InitialCondition, McEstimate, SolutionMode, SolutionSample};
pub use spectral::{CovarianceKernel, DalangMode, DalangVerdict, NoiseSpec, SpectralSplit};
