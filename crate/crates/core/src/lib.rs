//! Minimum density power divergence estimation for simple step-stress
//! accelerated life tests with Weibull lifetimes and Type-I censoring.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: the cumulative-exposure Weibull model, likelihood, sampling;
//! * [`specfn`]: incomplete gamma functions, quadrature, zeta/H integrals;
//! * [`estimator`]: the divergence objective and its minimization;
//! * [`asymptotics`]: sandwich covariance and parameter intervals;
//! * [`characteristics`]: reliability, quantiles, MTTF and their intervals;
//! * [`simulation`]: the contamination study harness;
//! * [`io`]: configuration, failure files and fit tables.

pub mod asymptotics;
pub mod characteristics;
pub mod error;
pub mod estimator;
pub mod io;
pub mod model;
pub mod simulation;
pub mod specfn;

pub use asymptotics::{Interval, SandwichCov};
pub use characteristics::{CharacteristicEstimate, CharacteristicKind, CiTransform};
pub use error::{Error, Result};
pub use estimator::{DpdFit, FitOptions};
pub use io::{ExperimentConfig, FitTableRow};
pub use model::{ModelParams, Scales, SsaltSample, StressProfile};
pub use simulation::{ContaminationScheme, ContaminationTarget, StudyConfig, StudyReport};
