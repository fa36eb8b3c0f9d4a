//! Simulation and analysis of the dissipative single-excitation
//! Jaynes-Cummings model: closed-form biorthogonal eigensystems of the
//! effective non-Hermitian Hamiltonian, closed parameter loops that encircle
//! or pass near its exceptional points, Schrödinger-equation evolution with
//! branch-continued fidelity tracking, eigenvalue-surface sampling with
//! degeneracy-line extraction, and transfer classification.
//!
//! The numerics are generic over the scalar type through [`float::Real`]
//! (`f32` or `f64`); the `f64` aliases below cover ordinary use.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod float;
pub mod model;
pub mod spectrum;
pub mod trajectory;

pub use error::{Error, Result};
pub use float::{Real, C};

/// `f64` aliases for the main types.
pub type ParameterPoint64 = model::ParameterPoint<f64>;
pub type HamiltonianMatrix64 = model::HamiltonianMatrix<f64>;
pub type Eigensystem64 = model::Eigensystem<f64>;
pub type Loop64 = trajectory::Loop<f64>;
pub type StateVector64 = dynamics::StateVector<f64>;
pub type EvolutionRecord64 = dynamics::EvolutionRecord<f64>;
pub type IntegratorConfig64 = dynamics::IntegratorConfig<f64>;
pub type GridSpec64 = spectrum::GridSpec<f64>;
pub type SurfaceSample64 = spectrum::SurfaceSample<f64>;
pub type TransferVerdict64 = analysis::TransferVerdict<f64>;
pub type C64 = num_complex::Complex64;
