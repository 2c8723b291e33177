//! Model specification and observed data containers.

use crate::error::{Error, Result};
use crate::latent::ThetaLinear;
use crate::linalg::Matrix;
use crate::marginals::MarginalFamily;
use crate::scalar::Scalar;

/// Full parameterization: one marginal family per coordinate, the linear
/// latent dynamic and the Gaussian-copula correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    pub families: Vec<MarginalFamily>,
    pub theta: ThetaLinear<T>,
    pub correlation: Matrix<T>,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(
        families: Vec<MarginalFamily>,
        theta: ThetaLinear<T>,
        correlation: Matrix<T>,
    ) -> Result<Self> {
        let spec = Self { families, theta, correlation };
        spec.validate()?;
        Ok(spec)
    }

    /// Bivariate convenience constructor with copula correlation `r`.
    pub fn bivariate(families: [MarginalFamily; 2], theta: ThetaLinear<T>, r: T) -> Result<Self> {
        let corr = Matrix::from_rows(&[&[T::one(), r], &[r, T::one()]]);
        Self::new(families.to_vec(), theta, corr)
    }

    pub fn k(&self) -> usize {
        self.families.len()
    }

    pub fn m(&self) -> usize {
        self.theta.m()
    }

    /// Off-diagonal copula correlation for k = 2.
    pub fn r(&self) -> Option<T> {
        (self.k() == 2).then(|| self.correlation[(0, 1)])
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Input("model needs at least one coordinate".into()));
        }
        self.theta.validate(k, self.theta.m())?;
        let c = &self.correlation;
        if c.rows() != k || c.cols() != k {
            return Err(Error::Input(format!(
                "correlation matrix is {}x{}, expected {k}x{k}",
                c.rows(),
                c.cols()
            )));
        }
        for i in 0..k {
            if c[(i, i)] != T::one() {
                return Err(Error::Input("correlation matrix needs a unit diagonal".into()));
            }
            for j in 0..i {
                if c[(i, j)] != c[(j, i)] {
                    return Err(Error::Input("correlation matrix is not symmetric".into()));
                }
            }
        }
        c.cholesky()
            .map_err(|_| Error::Input("correlation matrix is not positive definite".into()))?;
        Ok(())
    }

    /// True when every coordinate has a positive latent domain (GAIN-like).
    pub fn all_positive_latent(&self) -> bool {
        self.families
            .iter()
            .all(|f| f.latent_domain() == crate::marginals::LatentDomain::PositiveReal)
    }
}

/// Observed data: an n×k response matrix and an n×m covariate matrix.
/// Row t holds (Y_t, X_t).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame<T> {
    pub y: Matrix<T>,
    pub x: Matrix<T>,
}

impl<T: Scalar> SeriesFrame<T> {
    pub fn new(y: Matrix<T>, x: Matrix<T>) -> Result<Self> {
        if y.rows() != x.rows() {
            return Err(Error::Input(format!(
                "response has {} rows but covariates have {}",
                y.rows(),
                x.rows()
            )));
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn k(&self) -> usize {
        self.y.cols()
    }

    pub fn m(&self) -> usize {
        self.x.cols()
    }

    /// Checks every observation against its family's state space.
    pub fn validate(&self, families: &[MarginalFamily]) -> Result<()> {
        if families.len() != self.k() {
            return Err(Error::Input(format!(
                "data has {} response columns, model has {}",
                self.k(),
                families.len()
            )));
        }
        for t in 0..self.n() {
            for (i, fam) in families.iter().enumerate() {
                fam.check_observation(self.y[(t, i)]).map_err(|e| {
                    Error::Input(format!("row {}, column y{}: {e}", t + 1, i + 1))
                })?;
            }
            for l in 0..self.m() {
                if !self.x[(t, l)].is_finite() {
                    return Err(Error::Input(format!(
                        "row {}, column x{}: non-finite covariate",
                        t + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// n×k matrix of transformed responses g_i(Y_{i,t}).
    pub fn transformed(&self, families: &[MarginalFamily]) -> Matrix<T> {
        let mut out = Matrix::zeros(self.n(), self.k());
        for t in 0..self.n() {
            for (i, fam) in families.iter().enumerate() {
                out[(t, i)] = fam.transform_unchecked(self.y[(t, i)]);
            }
        }
        out
    }
}
