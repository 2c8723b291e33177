//! Conditional marginal families: CDFs, generalized inverses, the transforms
//! feeding the latent recursion, and the per-coordinate contrasts used for
//! pseudo-likelihood estimation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{ln_factorial, ln_gamma, norm_cdf, norm_ln_pdf, norm_quantile};

/// Unit-variance noise law of a scale family. Only the standard normal is
/// shipped; GARCH coordinates are written against this trait.
pub trait UnitNoise<T: Scalar> {
    fn cdf(&self, x: T) -> T;
    fn quantile(&self, u: T) -> T;
    fn ln_pdf(&self, x: T) -> T;
    /// E|ε|^p.
    fn abs_moment(&self, p: T) -> T;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StandardNormalNoise;

impl<T: Scalar> UnitNoise<T> for StandardNormalNoise {
    fn cdf(&self, x: T) -> T {
        norm_cdf(x)
    }

    fn quantile(&self, u: T) -> T {
        norm_quantile(u)
    }

    fn ln_pdf(&self, x: T) -> T {
        norm_ln_pdf(x)
    }

    fn abs_moment(&self, p: T) -> T {
        // E|Z|^p = 2^{p/2} Γ((p+1)/2) / √π
        let half = T::c(0.5);
        (p * half * T::c(2f64.ln()) + ln_gamma((p + T::one()) * half) - ln_gamma(half)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateSpace {
    Real,
    Count,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentDomain {
    PositiveReal,
    Real,
}

/// The four conditional marginal families.
///
/// | family          | latent s          | law of Y given s        | g(y)       |
/// |-----------------|-------------------|-------------------------|------------|
/// | GaussianGarch   | variance, s > 0   | √s·ε, ε ~ N(0,1)        | y²         |
/// | PoissonLinear   | mean, s > 0       | Poisson(s)              | y          |
/// | PoissonLog      | log-mean          | Poisson(eˢ)             | log(1+y)   |
/// | BernoulliLogit  | logit             | Bernoulli(1/(1+e⁻ˢ))    | y          |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginalFamily {
    GaussianGarch,
    PoissonLinear,
    PoissonLog,
    BernoulliLogit,
}

impl MarginalFamily {
    pub const ALL: [MarginalFamily; 4] = [
        MarginalFamily::GaussianGarch,
        MarginalFamily::PoissonLinear,
        MarginalFamily::PoissonLog,
        MarginalFamily::BernoulliLogit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarginalFamily::GaussianGarch => "gaussian_garch",
            MarginalFamily::PoissonLinear => "poisson_linear",
            MarginalFamily::PoissonLog => "poisson_log",
            MarginalFamily::BernoulliLogit => "bernoulli_logit",
        }
    }

    pub fn state_space(self) -> StateSpace {
        match self {
            MarginalFamily::GaussianGarch => StateSpace::Real,
            MarginalFamily::PoissonLinear | MarginalFamily::PoissonLog => StateSpace::Count,
            MarginalFamily::BernoulliLogit => StateSpace::Binary,
        }
    }

    pub fn latent_domain(self) -> LatentDomain {
        match self {
            MarginalFamily::GaussianGarch | MarginalFamily::PoissonLinear => {
                LatentDomain::PositiveReal
            }
            MarginalFamily::PoissonLog | MarginalFamily::BernoulliLogit => LatentDomain::Real,
        }
    }

    pub fn is_discrete(self) -> bool {
        self.state_space() != StateSpace::Real
    }

    /// Lipschitz constant c of u ↦ g(F⁻¹_s(u)) in s, integrated over u.
    pub fn lipschitz_c<T: Scalar>(self) -> T {
        match self {
            MarginalFamily::BernoulliLogit => T::c(0.25),
            _ => T::one(),
        }
    }

    pub fn check_latent<T: Scalar>(self, s: T) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::Precondition(format!(
                "{}: latent value {} is not finite",
                self.name(),
                s
            )));
        }
        if self.latent_domain() == LatentDomain::PositiveReal && s <= T::zero() {
            return Err(Error::Precondition(format!(
                "{}: latent value {} must be positive",
                self.name(),
                s
            )));
        }
        Ok(())
    }

    pub fn check_observation<T: Scalar>(self, y: T) -> Result<()> {
        let ok = match self.state_space() {
            StateSpace::Real => y.is_finite(),
            StateSpace::Count => y.is_finite() && y >= T::zero() && y.fract() == T::zero(),
            StateSpace::Binary => y == T::zero() || y == T::one(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "{}: observation {} outside the state space",
                self.name(),
                y
            )))
        }
    }

    /// Conditional CDF F_s(y). Discrete families accept any integer y
    /// (F(y) = 0 for y < 0).
    pub fn cdf<T: Scalar>(self, s: T, y: T) -> Result<T> {
        self.check_latent(s)?;
        match self {
            MarginalFamily::GaussianGarch => {
                if y.is_nan() {
                    return Err(Error::Input("gaussian_garch: NaN observation".into()));
                }
                Ok(norm_cdf(y / s.sqrt()))
            }
            _ => {
                if !y.is_finite() || y.fract() != T::zero() {
                    return Err(Error::Input(format!(
                        "{}: cdf needs an integer argument, got {}",
                        self.name(),
                        y
                    )));
                }
                if y < T::zero() {
                    return Ok(T::zero());
                }
                match self {
                    MarginalFamily::BernoulliLogit => {
                        Ok(if y >= T::one() { T::one() } else { logistic(-s) })
                    }
                    _ => {
                        let law = self.poisson_law(s)?;
                        Ok(law.cdf(y.to_u64().unwrap_or(u64::MAX)))
                    }
                }
            }
        }
    }

    /// Generalized inverse min{y : F_s(y) ≥ u} (discrete) or √s·Φ⁻¹(u).
    pub fn quantile<T: Scalar>(self, s: T, u: T) -> Result<T> {
        self.check_latent(s)?;
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::Input(format!("quantile level {u} outside (0, 1)")));
        }
        match self {
            MarginalFamily::GaussianGarch => {
                Ok(s.sqrt() * UnitNoise::<T>::quantile(&StandardNormalNoise, u))
            }
            MarginalFamily::BernoulliLogit => {
                Ok(if u <= logistic(-s) { T::zero() } else { T::one() })
            }
            _ => {
                let law = self.poisson_law(s)?;
                law.quantile(u).map(|q| T::c(q as f64))
            }
        }
    }

    /// Transform g(y) entering the latent recursion, with state-space check.
    pub fn transform<T: Scalar>(self, y: T) -> Result<T> {
        self.check_observation(y)?;
        Ok(self.transform_unchecked(y))
    }

    #[inline]
    pub fn transform_unchecked<T: Scalar>(self, y: T) -> T {
        match self {
            MarginalFamily::GaussianGarch => y * y,
            MarginalFamily::PoissonLinear | MarginalFamily::BernoulliLogit => y,
            MarginalFamily::PoissonLog => y.ln_1p(),
        }
    }

    /// Contrast h_y(s) (order 0) or its first/second derivative in s.
    pub fn contrast<T: Scalar>(self, s: T, y: T, order: u8) -> Result<T> {
        self.check_latent(s)?;
        let (h, dh, d2h) = self.contrast_terms(s, y);
        match order {
            0 => Ok(h),
            1 => Ok(dh),
            2 => Ok(d2h),
            _ => Err(Error::Input(format!("contrast order {order} not in 0..=2"))),
        }
    }

    /// (h, ḣ, ḧ) without validation; callers guarantee s is in the domain.
    #[inline]
    pub fn contrast_terms<T: Scalar>(self, s: T, y: T) -> (T, T, T) {
        match self {
            MarginalFamily::GaussianGarch => {
                let y2 = y * y;
                let inv = s.recip();
                (y2 * inv + s.ln(), inv - y2 * inv * inv, (T::c(2.0) * y2 * inv - T::one()) * inv * inv)
            }
            MarginalFamily::PoissonLinear => {
                let inv = s.recip();
                (s - y * s.ln(), T::one() - y * inv, y * inv * inv)
            }
            MarginalFamily::PoissonLog => {
                let e = s.exp();
                (e - y * s, e - y, e)
            }
            MarginalFamily::BernoulliLogit => {
                let p = logistic(s);
                (softplus(s) - y * s, p - y, p * logistic(-s))
            }
        }
    }

    /// Exact conditional log-density (w.r.t. Lebesgue or counting measure).
    pub fn log_density<T: Scalar>(self, s: T, y: T) -> Result<T> {
        self.check_latent(s)?;
        self.check_observation(y)?;
        Ok(match self {
            MarginalFamily::GaussianGarch => {
                let sd = s.sqrt();
                UnitNoise::<T>::ln_pdf(&StandardNormalNoise, y / sd) - sd.ln()
            }
            MarginalFamily::PoissonLinear => {
                let j = y.to_u64().unwrap_or(0);
                let ylns = if j == 0 { T::zero() } else { y * s.ln() };
                ylns - s - ln_factorial::<T>(j)
            }
            MarginalFamily::PoissonLog => {
                let j = y.to_u64().unwrap_or(0);
                y * s - s.exp() - ln_factorial::<T>(j)
            }
            MarginalFamily::BernoulliLogit => y * s - softplus(s),
        })
    }

    /// Probability mass P(Y = y) for discrete families.
    pub fn pmf<T: Scalar>(self, s: T, y: T) -> Result<T> {
        if !self.is_discrete() {
            return Err(Error::Unsupported(format!("{} has no mass function", self.name())));
        }
        Ok(self.log_density(s, y)?.exp())
    }

    /// Conditional mean of g(Y) is not needed; this is E[Y | s].
    pub fn mean<T: Scalar>(self, s: T) -> Result<T> {
        self.check_latent(s)?;
        Ok(match self {
            MarginalFamily::GaussianGarch => T::zero(),
            MarginalFamily::PoissonLinear => s,
            MarginalFamily::PoissonLog => s.exp(),
            MarginalFamily::BernoulliLogit => logistic(s),
        })
    }

    fn poisson_law<T: Scalar>(self, s: T) -> Result<PoissonLaw<T>> {
        let (mean, ln_mean) = match self {
            MarginalFamily::PoissonLinear => (s, s.ln()),
            MarginalFamily::PoissonLog => (s.exp(), s),
            _ => unreachable!("poisson_law on non-Poisson family"),
        };
        if !mean.is_finite() || mean > T::c(MAX_POISSON_MEAN) {
            return Err(Error::NumericOverflow {
                what: format!("{}: Poisson mean {} at latent value {} is too large", self.name(), mean, s),
                bound: MAX_POISSON_MEAN,
            });
        }
        Ok(PoissonLaw { mean, ln_mean })
    }
}

impl fmt::Display for MarginalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginalFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MarginalFamily::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::Input(format!("unknown marginal family '{s}'")))
    }
}

#[inline]
pub fn logistic<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        (T::one() + (-s).exp()).recip()
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

/// log(1 + eˢ) without overflow.
#[inline]
pub fn softplus<T: Scalar>(s: T) -> T {
    if s > T::zero() {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Poisson law evaluated by cumulative summation of log-space masses.
///
/// `cdf` and `quantile` share one accumulation order so the generalized
/// inverse identities hold bit-for-bit.
/// Largest Poisson mean handled by the exact summation routines.
pub const MAX_POISSON_MEAN: f64 = 1e7;

struct PoissonLaw<T> {
    mean: T,
    ln_mean: T,
}

impl<T: Scalar> PoissonLaw<T> {
    /// First index whose mass is not below the smallest normal double.
    fn start(&self) -> u64 {
        let m = self.mean.to_f64_lossy();
        if m > 1000.0 {
            (m - 38.0 * m.sqrt()).floor().max(0.0) as u64
        } else {
            0
        }
    }

    fn search_bound(&self) -> u64 {
        let m = self.mean.to_f64_lossy();
        (m + 20.0 * m.sqrt() + 200.0).floor() as u64
    }

    #[inline]
    fn mass(&self, j: u64) -> T {
        let jl = if j == 0 { T::zero() } else { T::c(j as f64) * self.ln_mean };
        (jl - self.mean - ln_factorial::<T>(j)).exp()
    }

    fn cdf(&self, y: u64) -> T {
        let mut acc = T::zero();
        for j in self.start()..=y {
            acc += self.mass(j);
            if acc >= T::one() {
                return T::one();
            }
        }
        acc.min(T::one())
    }

    fn quantile(&self, u: T) -> Result<u64> {
        let bound = self.search_bound();
        let mut acc = T::zero();
        let mut j = self.start();
        loop {
            acc += self.mass(j);
            if acc.min(T::one()) >= u {
                return Ok(j);
            }
            if j >= bound {
                return Err(Error::NumericOverflow {
                    what: format!(
                        "Poisson quantile search exhausted for mean {} at level {}",
                        self.mean, u
                    ),
                    bound: bound as f64,
                });
            }
            j += 1;
        }
    }
}
