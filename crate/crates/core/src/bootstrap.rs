//! Parametric bootstrap for the copula correlation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions, FitResult};
use crate::rng::RngStreams;
use crate::scalar::Scalar;
use crate::simulate::{simulate, CovariateProcess, SimConfig};

/// Largest tolerated fraction of failed replications.
pub const MAX_DROP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct BootstrapConfig<T> {
    pub b: usize,
    /// Path length of each replication, normally the original sample size.
    pub n: usize,
    pub seed: u64,
    pub covariate: CovariateProcess<T>,
    pub burn_in: usize,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> BootstrapConfig<T> {
    pub fn new(b: usize, n: usize, seed: u64) -> Self {
        Self { b, n, seed, covariate: CovariateProcess::None, burn_in: 500, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<T> {
    pub b: usize,
    /// Replicated estimates, sorted ascending.
    pub r_stars: Vec<T>,
    pub se: T,
    pub seed: u64,
    pub dropped: usize,
}

/// Simulates `b` paths from (θ̂, r̂), refits each and returns the sample
/// standard deviation of the refitted r̂. Replication `b` draws from the
/// sub-stream "bootstrap:b" of `seed`.
pub fn bootstrap_r<T: Scalar>(fitted: &FitResult<T>, config: &BootstrapConfig<T>) -> Result<BootstrapResult<T>> {
    let root = RngStreams::new(config.seed);
    let seeds: Vec<u64> = (1..=config.b).map(|b| root.derive(&format!("bootstrap:{b}")).seed()).collect();
    bootstrap_r_with_seeds(fitted, config, &seeds)
}

/// As [`bootstrap_r`] with one explicit seed per replication.
pub fn bootstrap_r_with_seeds<T: Scalar>(
    fitted: &FitResult<T>,
    config: &BootstrapConfig<T>,
    seeds: &[u64],
) -> Result<BootstrapResult<T>> {
    if seeds.len() < 2 {
        return Err(Error::Input("bootstrap needs B >= 2".into()));
    }
    if fitted.r_hat.is_none() {
        return Err(Error::Precondition("bootstrap needs a fitted copula correlation".into()));
    }
    let spec = fitted.model()?;
    let mut fit_options = config.fit.clone();
    fit_options.fit_copula = true;
    // Fail early on an unstable θ̂ instead of dropping every replication.
    crate::stability::check(&spec.theta, &spec.families, T::c(2.0))
        .ok()
        .filter(|rep| rep.stationary())
        .ok_or_else(|| Error::Unstable("fitted parameters fail the stationarity condition".into()))?;

    let draws: Vec<Option<T>> = seeds
        .par_iter()
        .map(|&seed| {
            let sim_config = SimConfig::new(config.n, seed)
                .with_covariate(config.covariate.clone())
                .with_burn_in(config.burn_in);
            let sim = simulate(&spec, &sim_config).ok()?;
            let mut options = fit_options.clone();
            options.mc_seed = RngStreams::new(seed).derive("fit").seed();
            let res = fit(&spec.families, &sim.frame, &options).ok()?;
            res.r_hat.filter(|r| r.abs() < T::one())
        })
        .collect();

    let mut r_stars: Vec<T> = draws.iter().flatten().copied().collect();
    let dropped = seeds.len() - r_stars.len();
    if dropped as f64 > MAX_DROP_FRACTION * seeds.len() as f64 || r_stars.len() < 2 {
        return Err(Error::BootstrapFailed { dropped, total: seeds.len() });
    }
    r_stars.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let n = T::from_usize_lossy(r_stars.len());
    let mean = r_stars.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let ss = r_stars.iter().map(|&r| (r - mean) * (r - mean)).fold(T::zero(), |a, b| a + b);
    Ok(BootstrapResult { b: seeds.len(), se: (ss / (n - T::one())).sqrt(), r_stars, seed: config.seed, dropped })
}
