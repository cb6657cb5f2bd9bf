//! Mean-variance portfolio optimization with a risk-free asset.
//!
//! Two layers share one set of types:
//!
//! * a finite-market solver that samples a market, factorizes the Wishart
//!   matrix `J = XXᵀ` and solves the constrained quadratic problem exactly
//!   ([`quenched`]), with the diagonal benchmark in [`annealed`];
//! * closed-form large-market results that depend only on a handful of
//!   moments of the asset parameters ([`replica`]).
//!
//! [`harness`] runs Monte Carlo experiments that put the two side by side
//! and [`report`] writes the outcome as CSV or JSON.

pub mod annealed;
pub mod checks;
pub mod error;
pub mod harness;
pub mod market;
pub mod moments;
pub mod oracle;
pub mod quenched;
pub mod replica;
pub mod report;
pub mod rng;

pub use error::{PortfolioError, Result};
pub use harness::{
    compare_with_theory, run_experiment, ComparisonReport, ExperimentConfig, ExperimentSummary,
    StatKind, Thresholds,
};
pub use market::{AssetEnsemble, DistKind, ParetoParams, ReturnMatrix, WishartMatrix};
pub use moments::AsymptoticMoments;
pub use quenched::{ConstraintSpec, GMoments, PortfolioSolution, QuenchedSystem};
pub use replica::{ReplicaPrediction, Regime};
