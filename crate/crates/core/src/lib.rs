//! Distributionally robust covariance shrinkage.
//!
//! Given a nominal covariance estimate, a spectral divergence and a radius,
//! [`shrinkage::estimate`] returns the covariance matrix of minimum Frobenius
//! norm inside the divergence ball around the nominal. It shares the nominal
//! eigenvectors and shrinks every eigenvalue through a divergence-specific
//! nonlinear map, so it is computed from one eigendecomposition and a scalar
//! root-find.

pub mod baselines;
pub mod calibration;
pub mod classifier;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod extended;
pub mod fixtures;
pub mod io;
pub mod lambert;
pub mod portfolio;
pub mod sampling;
pub mod shrinkage;
pub mod spectral;

pub use baselines::{Centering, SampleSet};
pub use calibration::RadiusSchedule;
pub use divergence::Divergence;
pub use estimators::EstimatorSpec;
pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use shrinkage::{estimate, ShrinkageSolution, SolverOptions};
pub use spectral::{SpectralDecomposition, SymMatrix};
