//! Penalized sparse covariance regression.
//!
//! Models a `p x p` covariance matrix as a sparse linear combination of known
//! similarity matrices, `Sigma(beta) = beta_0 I + sum_k beta_k W_k`, and
//! estimates the coefficients by folded concave penalized least squares
//! (SCAD / MCP via local linear approximation, initialized at the Lasso).
//! Also provides the BIC path search, the asymptotic covariance of the
//! support-restricted estimator, factor-composite and Ledoit-Wolf covariance
//! estimators, minimum-variance portfolio construction with a rolling
//! backtest, and a Monte Carlo harness.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], satisfied
//! by `f32` and `f64`); the aliases below fix the default 64-bit instantiation.

pub mod error;
pub mod factor;
pub mod inference;
pub mod matrix;
pub mod penalty;
pub mod portfolio;
mod scalar;
pub mod similarity;
pub mod simulate;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default 64-bit instantiations of the core types.
pub type SparseSymMatrix = matrix::SparseSymMatrix<f64>;
pub type DenseSymMatrix = matrix::DenseSymMatrix<f64>;
pub type SimilarityBasis = matrix::SimilarityBasis<f64>;
pub type PenaltySpec = penalty::PenaltySpec<f64>;
pub type GramSystem = solver::GramSystem<f64>;
pub type Coefficients = solver::Coefficients<f64>;
pub type FitResult = solver::FitResult<f64>;
pub type CdOptions = solver::CdOptions<f64>;
pub type LlaOptions = solver::LlaOptions<f64>;
pub type TuningResult = tuning::TuningResult<f64>;
pub type TuneOptions = tuning::TuneOptions<f64>;
pub type AsymptoticCovariance = inference::AsymptoticCovariance<f64>;
pub type StandardizedPanel = inference::StandardizedPanel<f64>;
pub type FactorPanel = factor::FactorPanel<f64>;
pub type FactorDecomposition = factor::FactorDecomposition<f64>;
pub type PortfolioWeights = portfolio::PortfolioWeights<f64>;
pub type PerformanceReport = portfolio::PerformanceReport<f64>;
pub type DgpConfig = simulate::DgpConfig<f64>;
pub type SimulationReport = simulate::SimulationReport<f64>;
pub type HarnessOptions = simulate::HarnessOptions<f64>;
