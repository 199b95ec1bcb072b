//! Gaussian-assumed nonlinear filtering on stochastic spherical-radial
//! integration rules.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] seedable random streams with derivable substreams,
//! * [`linalg`] covariance square roots and Haar-random rotations,
//! * [`sampling`] chi, beta and radial-node samplers,
//! * [`rules`] weighted point sets for every [`IntegrationScheme`],
//! * [`integrator`] Gaussian expectations built on those point sets,
//! * [`filter`] the prediction / correction recursion,
//! * [`bench`] the integral and growth-model benchmarks,
//! * [`report`] and [`config`] for the command line front end.

pub mod bench;
pub mod config;
pub mod filter;
pub mod integrator;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod rule_check;
pub mod rules;
pub mod sampling;

pub use filter::{FilterError, PredictedObservation, StateSpaceModel};
pub use integrator::{expect, expect_batch, GaussianBelief, IntegrationError, VectorFunction};
pub use linalg::{haar_orthogonal, spd_sqrt, LinalgError, OrthogonalMatrix, SpdMatrix};
pub use rng::RngStream;
pub use rules::{build_rule, IntegrationScheme, RuleError, SchemeKind, SigmaPointSet};
pub use sampling::{RadialPair, SamplingError};
