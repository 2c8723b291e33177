//! Stationarity, moment and identifiability certificates for a proposed θ.

use std::fmt;

use crate::error::{Error, Result};
use crate::latent::ThetaLinear;
use crate::linalg::Matrix;
use crate::marginals::{LatentDomain, MarginalFamily, StandardNormalNoise, StateSpace, UnitNoise};
use crate::scalar::Scalar;

/// Largest eigenvalue modulus.
///
/// Closed form for k ≤ 2; power iteration for nonnegative matrices (accepted
/// only when the Collatz–Wielandt bounds agree); Gelfand's formula by
/// repeated squaring otherwise.
pub fn spectral_radius<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    check_square(m)?;
    match m.rows() {
        0 => Ok(T::zero()),
        1 => Ok(m[(0, 0)].abs()),
        2 => Ok(radius_2x2(m)),
        _ => {
            if m.as_slice().iter().all(|&x| x >= T::zero()) {
                if let Some(r) = power_iteration(m) {
                    return Ok(r);
                }
            }
            Ok(gelfand(m))
        }
    }
}

/// Spectral radius by the iterative routes only, regardless of size.
pub fn spectral_radius_iterative<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    check_square(m)?;
    if m.as_slice().iter().all(|&x| x >= T::zero()) {
        if let Some(r) = power_iteration(m) {
            return Ok(r);
        }
    }
    Ok(gelfand(m))
}

fn check_square<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Input(format!(
            "spectral radius needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn radius_2x2<T: Scalar>(m: &Matrix<T>) -> T {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half = T::c(0.5);
    let mid = (a + d) * half;
    let gap = (a - d) * half;
    let disc = gap * gap + b * c;
    if disc >= T::zero() {
        let s = disc.sqrt();
        (mid + s).abs().max((mid - s).abs())
    } else {
        // Complex pair: |λ|² = det.
        (a * d - b * c).abs().sqrt()
    }
}

fn power_iteration<T: Scalar>(m: &Matrix<T>) -> Option<T> {
    let n = m.rows();
    // A positive shift keeps the iteration from cycling on periodic matrices.
    let shift = T::one();
    let shifted = m.add(&Matrix::identity(n));
    let mut v = vec![T::one(); n];
    for _ in 0..10_000 {
        let w = shifted.matvec(&v);
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for (wi, vi) in w.iter().zip(&v) {
            if *vi <= T::zero() {
                return None;
            }
            let q = *wi / *vi;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        let norm = w.iter().fold(T::zero(), |acc, x| acc.max(*x));
        if norm <= T::zero() {
            return Some(T::zero());
        }
        v = w.into_iter().map(|x| x / norm).collect();
        if hi - lo <= T::epsilon() * T::c(16.0) * hi {
            return Some(((hi + lo) * T::c(0.5) - shift).max(T::zero()));
        }
    }
    None
}

fn gelfand<T: Scalar>(m: &Matrix<T>) -> T {
    let n0 = m.inf_norm();
    if n0 == T::zero() {
        return T::zero();
    }
    let mut x = m.scale(n0.recip());
    let mut log_norm = n0.ln();
    let mut power = T::one();
    let mut est = n0;
    for _ in 0..64 {
        x = x.matmul(&x);
        let nu = x.inf_norm();
        if nu == T::zero() {
            return T::zero();
        }
        x = x.scale(nu.recip());
        log_norm = log_norm * T::c(2.0) + nu.ln();
        power *= T::c(2.0);
        let next = (log_norm / power).exp();
        if (next - est).abs() <= T::epsilon() * next {
            return next;
        }
        est = next;
    }
    est
}

/// Bounds (min row sum of Mⁿ)^{1/n} ≤ ρ(M) ≤ (max row sum of Mⁿ)^{1/n} for
/// nonnegative M, computed with rescaling to avoid overflow.
pub fn gelfand_bracket<T: Scalar>(m: &Matrix<T>, n: u32) -> Result<(T, T)> {
    check_square(m)?;
    if m.as_slice().iter().any(|&x| x < T::zero()) {
        return Err(Error::Input("row-sum bracket needs a nonnegative matrix".into()));
    }
    let k = m.rows();
    let mut acc = Matrix::identity(k);
    let mut log_scale = T::zero();
    for _ in 0..n {
        acc = acc.matmul(m);
        let s = acc.inf_norm();
        if s == T::zero() {
            return Ok((T::zero(), T::zero()));
        }
        acc = acc.scale(s.recip());
        log_scale += s.ln();
    }
    let sums: Vec<T> = (0..k).map(|i| acc.row(i).iter().copied().sum()).collect();
    let lo = sums.iter().fold(T::infinity(), |a, &b| a.min(b));
    let hi = sums.iter().fold(T::zero(), |a, &b| a.max(b));
    let nn = T::c(n as f64);
    let root = |s: T| if s > T::zero() { ((s.ln() + log_scale) / nn).exp() } else { T::zero() };
    Ok((root(lo), root(hi)))
}

/// Numeric certificates for one θ. Boundary values (exactly 1) fail.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub rho_stationarity: T,
    pub rho_moment: Option<T>,
    pub infnorm_condition: Option<T>,
    /// `None` when B is not diagonal (not assessed).
    pub identifiability_i3: Option<bool>,
    pub identifiability_i4: Option<bool>,
}

impl<T: Scalar> StabilityReport<T> {
    pub fn stationary(&self) -> bool {
        self.rho_stationarity < T::one()
    }

    pub fn moments_ok(&self) -> Option<bool> {
        self.rho_moment.map(|r| r < T::one())
    }

    pub fn infnorm_ok(&self) -> Option<bool> {
        self.infnorm_condition.map(|r| r < T::one())
    }

    /// Every assessed condition passes.
    pub fn all_pass(&self) -> bool {
        self.stationary()
            && self.moments_ok().unwrap_or(true)
            && self.infnorm_ok().unwrap_or(true)
            && self.identifiability_i3.unwrap_or(true)
            && self.identifiability_i4.unwrap_or(true)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

impl<T: Scalar> fmt::Display for StabilityReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rho_stationarity: {}", self.rho_stationarity)?;
        writeln!(f, "rho_stationarity_verdict: {}", verdict(self.stationary()))?;
        match self.rho_moment {
            Some(r) => {
                writeln!(f, "rho_moment: {r}")?;
                writeln!(f, "rho_moment_verdict: {}", verdict(r < T::one()))?;
            }
            None => writeln!(f, "rho_moment: not assessed")?,
        }
        match self.infnorm_condition {
            Some(r) => {
                writeln!(f, "infnorm_condition: {r}")?;
                writeln!(f, "infnorm_condition_verdict: {}", verdict(r < T::one()))?;
            }
            None => writeln!(f, "infnorm_condition: not assessed")?,
        }
        let flag = |b: Option<bool>| match b {
            Some(true) => "true",
            Some(false) => "false",
            None => "not assessed",
        };
        writeln!(f, "I1: user-asserted")?;
        writeln!(f, "I3: {}", flag(self.identifiability_i3))?;
        writeln!(f, "I4: {}", flag(self.identifiability_i4))
    }
}

fn identifiability_or_unassessed<T: Scalar>(theta: &ThetaLinear<T>) -> (Option<bool>, Option<bool>) {
    match check_identifiability(theta) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    }
}

/// GARCH-variance + linear-Poisson certificates: ρ(A+B) and
/// ρ(B + A·diag(m_r, 1)) with m_r = (E ε^{2r})^{1/r}, ε standard normal.
/// Coordinate 1 is the variance equation.
pub fn check_gain<T: Scalar>(theta: &ThetaLinear<T>, r_moment: T) -> Result<StabilityReport<T>> {
    let fams = [MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear];
    if theta.k() != 2 {
        return Err(Error::Input("check_gain needs k = 2".into()));
    }
    check_gain_like(theta, &fams, r_moment)
}

fn check_gain_like<T: Scalar>(
    theta: &ThetaLinear<T>,
    families: &[MarginalFamily],
    r_moment: T,
) -> Result<StabilityReport<T>> {
    let nonneg = theta.d.iter().all(|&x| x >= T::zero())
        && [&theta.a, &theta.b, &theta.gamma]
            .iter()
            .all(|m| m.as_slice().iter().all(|&x| x >= T::zero()));
    if !nonneg {
        return Err(Error::Precondition(
            "positive-latent models need nonnegative d, A, B and Gamma".into(),
        ));
    }
    if !(r_moment >= T::one()) {
        return Err(Error::Input(format!("moment order must be >= 1, got {r_moment}")));
    }
    let m_r = StandardNormalNoise.abs_moment(T::c(2.0) * r_moment).powf(r_moment.recip());
    let scale: Vec<T> = families
        .iter()
        .map(|f| if *f == MarginalFamily::GaussianGarch { m_r } else { T::one() })
        .collect();
    let rho_stationarity = spectral_radius(&theta.a.add(&theta.b))?;
    let rho_moment = spectral_radius(&theta.b.add(&theta.a.matmul(&Matrix::diag(&scale))))?;
    let (i3, i4) = identifiability_or_unassessed(theta);
    Ok(StabilityReport {
        rho_stationarity,
        rho_moment: Some(rho_moment),
        infnorm_condition: None,
        identifiability_i3: i3,
        identifiability_i4: i4,
    })
}

/// Binary-logit + log-Poisson certificates with the binary coordinate first:
/// ρ(|B| + |A|·diag(1/4, 1)) and ‖|Ā| + |B|‖_∞ where Ā zeroes A's first column.
pub fn check_bip<T: Scalar>(theta: &ThetaLinear<T>) -> Result<StabilityReport<T>> {
    if theta.k() != 2 {
        return Err(Error::Input("check_bip needs k = 2".into()));
    }
    check_real_latent(theta, &[MarginalFamily::BernoulliLogit, MarginalFamily::PoissonLog])
}

fn check_real_latent<T: Scalar>(
    theta: &ThetaLinear<T>,
    families: &[MarginalFamily],
) -> Result<StabilityReport<T>> {
    let c: Vec<T> = families.iter().map(|f| f.lipschitz_c()).collect();
    let abs_a = theta.a.abs();
    let abs_b = theta.b.abs();
    let rho_stationarity = spectral_radius(&abs_b.add(&abs_a.matmul(&Matrix::diag(&c))))?;
    let mut a_bar = abs_a;
    for (j, fam) in families.iter().enumerate() {
        if fam.state_space() == StateSpace::Binary {
            for i in 0..a_bar.rows() {
                a_bar[(i, j)] = T::zero();
            }
        }
    }
    let infnorm = a_bar.add(&abs_b).inf_norm();
    let (i3, i4) = identifiability_or_unassessed(theta);
    Ok(StabilityReport {
        rho_stationarity,
        rho_moment: None,
        infnorm_condition: Some(infnorm),
        identifiability_i3: i3,
        identifiability_i4: i4,
    })
}

/// Family-aware dispatch: positive-latent models get the GARCH/INGARCH
/// conditions (the moment scaling applies to Gaussian columns), real-latent
/// models the contraction conditions with per-column Lipschitz constants and
/// bounded (binary) columns dropped from the norm condition.
pub fn check<T: Scalar>(
    theta: &ThetaLinear<T>,
    families: &[MarginalFamily],
    r_moment: T,
) -> Result<StabilityReport<T>> {
    if families.len() != theta.k() {
        return Err(Error::Input(format!(
            "{} families for a k={} theta",
            families.len(),
            theta.k()
        )));
    }
    let positive = families.iter().all(|f| f.latent_domain() == LatentDomain::PositiveReal);
    let real = families.iter().all(|f| f.latent_domain() == LatentDomain::Real);
    if positive {
        check_gain_like(theta, families, r_moment)
    } else if real {
        check_real_latent(theta, families)
    } else {
        Err(Error::Unsupported(
            "stability check for models mixing positive and real latent domains".into(),
        ))
    }
}

/// (I3, I4) for diagonal B: every row of [A, Γ] non-null, and the columns of
/// B^j[A, Γ], j = 0..k−1, span ℝᵏ.
pub fn check_identifiability<T: Scalar>(theta: &ThetaLinear<T>) -> Result<(bool, bool)> {
    if !theta.b.is_diagonal() {
        return Err(Error::Unsupported(
            "identifiability check requires a diagonal B".into(),
        ));
    }
    let c = theta.a.hcat(&theta.gamma);
    let i3 = (0..c.rows()).all(|i| c.row(i).iter().any(|&x| x != T::zero()));
    let k = theta.k();
    let mut stacked = c.clone();
    let mut power = c.clone();
    for _ in 1..k {
        power = theta.b.matmul(&power);
        stacked = stacked.hcat(&power);
    }
    let i4 = stacked.rank(T::c(1e-10)) == k;
    Ok((i3, i4))
}
