#![allow(dead_code)]

use mixts::{CovariateProcess, MarginalFamily, Matrix, ModelSpec, ThetaLinear};

/// GARCH(1,1) continuous coordinate driving a linear Poisson count.
pub fn gain_spec(r: f64) -> ModelSpec<f64> {
    let theta = ThetaLinear::new(
        vec![0.03, 0.3],
        Matrix::from_f64_rows(&[&[0.05, 0.05], &[0.3, 0.1]]),
        Matrix::from_f64_rows(&[&[0.7, 0.0], &[0.0, 0.5]]),
        Matrix::zeros(2, 0),
    )
    .unwrap();
    ModelSpec::bivariate([MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear], theta, r).unwrap()
}

/// Log-linear Poisson count and logistic binary with one AR(1) covariate.
pub fn bip_spec(r: f64) -> ModelSpec<f64> {
    let theta = ThetaLinear::new(
        vec![1.0, -1.0],
        Matrix::from_f64_rows(&[&[0.3, 0.3], &[0.4, -0.6]]),
        Matrix::from_f64_rows(&[&[0.15, 0.0], &[0.0, 0.2]]),
        Matrix::from_f64_rows(&[&[-0.1], &[0.1]]),
    )
    .unwrap();
    ModelSpec::bivariate([MarginalFamily::PoissonLog, MarginalFamily::BernoulliLogit], theta, r).unwrap()
}

pub fn bip_covariate() -> CovariateProcess<f64> {
    CovariateProcess::Ar1 { phi: -0.15, sigma: 1.0 }
}
