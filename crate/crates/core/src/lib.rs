//! Observation-driven models for multivariate time series with mixed
//! continuous, count and binary coordinates.
//!
//! Each coordinate has a latent parameter following a linear recursion in
//! past latents, transformed past observations and covariates; simultaneous
//! innovations are coupled by a Gaussian copula. The crate simulates such
//! models, certifies stationarity conditions, fits the latent parameters
//! equation by equation by pseudo-maximum likelihood with sandwich standard
//! errors, and fits the copula correlation by plug-in maximum likelihood.
//!
//! The core is generic over the floating-point type; `f64` aliases are
//! provided below.
//!
//! ```
//! use mixts::{fit, simulate, FitOptions64, MarginalFamily, Matrix, ModelSpec, SimConfig, Theta64};
//!
//! let theta = Theta64::new(
//!     vec![0.03, 0.3],
//!     Matrix::from_f64_rows(&[&[0.05, 0.05], &[0.3, 0.1]]),
//!     Matrix::from_f64_rows(&[&[0.7, 0.0], &[0.0, 0.5]]),
//!     Matrix::zeros(2, 0),
//! )?;
//! let spec = ModelSpec::bivariate([MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear], theta, 0.3)?;
//! let sim = simulate(&spec, &SimConfig::new(400, 7))?;
//! let res = fit(&spec.families, &sim.frame, &FitOptions64::default())?;
//! assert!(res.r_hat.unwrap().abs() < 1.0);
//! # Ok::<(), mixts::Error>(())
//! ```

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::excessive_precision
)]

pub mod bootstrap;
pub mod copula;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod latent;
pub mod linalg;
pub mod marginals;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod special;
pub mod stability;

pub use bootstrap::{bootstrap_r, BootstrapConfig, BootstrapResult};
pub use copula::{bip_objective, fit_r, gain_objective, BipIntegration, GaussianCopula, PairObjective};
pub use error::{Error, Result};
pub use estimate::{boundary_test, fit, sandwich, BoundaryTest, FitOptions, FitResult};
pub use latent::{default_lambda0, filter, Derivatives, LatentPath, ThetaLinear};
pub use linalg::Matrix;
pub use marginals::MarginalFamily;
pub use model::{ModelSpec, SeriesFrame};
pub use rng::RngStreams;
pub use scalar::Scalar;
pub use simulate::{simulate, CovariateProcess, SimConfig, Simulation};
pub use stability::{spectral_radius, StabilityReport};

pub type Matrix64 = Matrix<f64>;
pub type Theta64 = ThetaLinear<f64>;
pub type Spec64 = ModelSpec<f64>;
pub type Frame64 = SeriesFrame<f64>;
pub type Fit64 = FitResult<f64>;
pub type FitOptions64 = FitOptions<f64>;
pub type Copula64 = GaussianCopula<f64>;
pub type Stability64 = StabilityReport<f64>;
pub type ModelConfig64 = harness::ModelConfig<f64>;
pub type McDesign64 = harness::McDesign<f64>;
pub type McTable64 = harness::McTable<f64>;
