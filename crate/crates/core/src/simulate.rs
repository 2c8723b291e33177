//! Path generation: latent recursion driven by Gaussian-copula innovations
//! pushed through the marginal quantile functions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::copula::GaussianCopula;
use crate::error::{Error, Result};
use crate::latent::ThetaLinear;
use crate::linalg::Matrix;
use crate::marginals::LatentDomain;
use crate::model::{ModelSpec, SeriesFrame};
use crate::rng::RngStreams;
use crate::scalar::Scalar;
use crate::stability;

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateProcess<T> {
    None,
    /// Independent AR(1) columns X_t = φX_{t−1} + σξ_t.
    Ar1 { phi: T, sigma: T },
    /// A given n×m path, reused cyclically when more rows are needed.
    Fixed(Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub covariate: CovariateProcess<T>,
    pub override_stability: bool,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, burn_in: 500, seed, covariate: CovariateProcess::None, override_stability: false }
    }

    pub fn with_covariate(mut self, covariate: CovariateProcess<T>) -> Self {
        self.covariate = covariate;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub frame: SeriesFrame<T>,
    /// True λ_t for the retained rows (n×k).
    pub latent: Matrix<T>,
}

/// Stationary AR(1): X_0 ~ N(0, σ²/(1−φ²)), then X_t = φX_{t−1} + σξ_t.
pub fn gen_ar1<T: Scalar, R: Rng + ?Sized>(n: usize, phi: T, sigma: T, rng: &mut R) -> Result<Vec<T>> {
    if !(phi.abs() < T::one()) {
        return Err(Error::Input(format!("AR(1) coefficient must satisfy |phi| < 1, got {phi}")));
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::Input(format!("AR(1) sigma must be finite and >= 0, got {sigma}")));
    }
    let mut draw = || T::c(rng.sample::<f64, _>(StandardNormal));
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut x = sigma / (T::one() - phi * phi).sqrt() * draw();
    out.push(x);
    for _ in 1..n {
        x = phi * x + sigma * draw();
        out.push(x);
    }
    Ok(out)
}

fn covariate_path<T: Scalar>(
    process: &CovariateProcess<T>,
    rows: usize,
    m: usize,
    streams: &RngStreams,
) -> Result<Matrix<T>> {
    let mut x = Matrix::zeros(rows, m);
    match process {
        CovariateProcess::None if m > 0 => {
            return Err(Error::Input(format!(
                "model has {m} covariate(s) but no covariate process was configured"
            )))
        }
        CovariateProcess::None => {}
        CovariateProcess::Ar1 { phi, sigma } => {
            let mut rng = streams.stream("covariate");
            for l in 0..m {
                for (t, v) in gen_ar1(rows, *phi, *sigma, &mut rng)?.into_iter().enumerate() {
                    x[(t, l)] = v;
                }
            }
        }
        CovariateProcess::Fixed(path) => {
            if path.cols() != m || path.rows() == 0 {
                return Err(Error::Input(format!(
                    "fixed covariate path is {}x{}, model needs m={m}",
                    path.rows(),
                    path.cols()
                )));
            }
            for t in 0..rows {
                x.row_mut(t).copy_from_slice(path.row(t % path.rows()));
            }
        }
    }
    Ok(x)
}

/// Fixed point of λ = d + Bλ mapped into the latent domain.
fn initial_latent<T: Scalar>(spec: &ModelSpec<T>) -> Vec<T> {
    let theta: &ThetaLinear<T> = &spec.theta;
    let k = spec.k();
    let i_minus_b = Matrix::identity(k).sub(&theta.b);
    let start = i_minus_b.solve_vec(&theta.d).unwrap_or_else(|_| theta.d.clone());
    start
        .into_iter()
        .zip(&spec.families)
        .map(|(v, fam)| match fam.latent_domain() {
            LatentDomain::PositiveReal if !(v > T::zero()) || !v.is_finite() => T::c(1e-6),
            _ if !v.is_finite() => T::zero(),
            _ => v,
        })
        .collect()
}

/// Simulates `config.n` rows after discarding `config.burn_in`.
///
/// Innovations come from the "copula" sub-stream and covariates from the
/// "covariate" sub-stream of `config.seed`.
pub fn simulate<T: Scalar>(spec: &ModelSpec<T>, config: &SimConfig<T>) -> Result<Simulation<T>> {
    spec.validate()?;
    if config.n == 0 {
        return Err(Error::Input("path length n must be >= 1".into()));
    }
    if !config.override_stability {
        let report = stability::check(&spec.theta, &spec.families, T::one())?;
        if !report.stationary() {
            return Err(Error::Unstable(format!(
                "stationarity radius {} >= 1; pass the stability override to simulate anyway",
                report.rho_stationarity
            )));
        }
    }
    let (k, m) = (spec.k(), spec.m());
    let total = config.n + config.burn_in;
    let streams = RngStreams::new(config.seed);
    let x = covariate_path(&config.covariate, total, m, &streams)?;
    let copula = GaussianCopula::new(spec.correlation.clone())?;
    let u = copula.sample(total, &mut streams.stream("copula"));

    let theta = &spec.theta;
    let mut lambda = initial_latent(spec);
    let mut next = vec![T::zero(); k];
    let mut ybar = vec![T::zero(); k];
    let mut y_out = Matrix::zeros(config.n, k);
    let mut l_out = Matrix::zeros(config.n, k);
    for t in 0..total {
        if t > 0 {
            let xr = x.row(t - 1);
            for i in 0..k {
                let mut v = theta.d[i];
                for j in 0..k {
                    v += theta.b[(i, j)] * lambda[j] + theta.a[(i, j)] * ybar[j];
                }
                for l in 0..m {
                    v += theta.gamma[(i, l)] * xr[l];
                }
                spec.families[i]
                    .check_latent(v)
                    .map_err(|_| Error::LatentDomain { t, coord: i + 1, value: v.to_f64_lossy() })?;
                next[i] = v;
            }
            lambda.copy_from_slice(&next);
        }
        for i in 0..k {
            let fam = spec.families[i];
            let y = fam.quantile(lambda[i], u[(t, i)]).map_err(|e| match e {
                Error::NumericOverflow { .. } | Error::Numeric(_) => {
                    Error::Numeric(format!("t={t}, coordinate {}: {e}", i + 1))
                }
                other => other,
            })?;
            ybar[i] = fam.transform_unchecked(y);
            if t >= config.burn_in {
                y_out[(t - config.burn_in, i)] = y;
                l_out[(t - config.burn_in, i)] = lambda[i];
            }
        }
    }
    let mut x_out = Matrix::zeros(config.n, m);
    for t in 0..config.n {
        x_out.row_mut(t).copy_from_slice(x.row(t + config.burn_in));
    }
    Ok(Simulation { frame: SeriesFrame::new(y_out, x_out)?, latent: l_out })
}
