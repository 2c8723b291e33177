//! Gaussian copula: sampling, and the bivariate plug-in objectives in the
//! correlation r for continuous/discrete, discrete/discrete and
//! continuous/continuous coordinate pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optimize::brent_minimize;
use crate::scalar::{KahanSum, Scalar};
use crate::special::{gauss_legendre, norm_cdf, norm_cdf_diff, norm_pdf, norm_quantile};

/// Clamp applied to conditioning probabilities before Φ⁻¹.
pub const EPS_U: f64 = 1e-12;
/// Floor for a single likelihood term.
pub const EPS_LIKE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCopula<T> {
    corr: Matrix<T>,
    chol: Matrix<T>,
}

impl<T: Scalar> GaussianCopula<T> {
    pub fn new(corr: Matrix<T>) -> Result<Self> {
        if !corr.is_square() || corr.max_asymmetry() > T::zero() {
            return Err(Error::Input("copula correlation must be square and symmetric".into()));
        }
        if corr.diagonal().iter().any(|&v| v != T::one()) {
            return Err(Error::Input("copula correlation needs a unit diagonal".into()));
        }
        let chol = corr
            .cholesky()
            .map_err(|_| Error::Input("copula correlation is not positive definite".into()))?;
        Ok(Self { corr, chol })
    }

    pub fn bivariate(r: T) -> Result<Self> {
        if !(r.abs() < T::one()) {
            return Err(Error::Input(format!("copula correlation must satisfy |r| < 1, got {r}")));
        }
        Self::new(Matrix::from_rows(&[&[T::one(), r], &[r, T::one()]]))
    }

    pub fn k(&self) -> usize {
        self.corr.rows()
    }

    pub fn correlation(&self) -> &Matrix<T> {
        &self.corr
    }

    /// n×k matrix of dependent uniforms, strictly inside (0, 1).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix<T> {
        let k = self.k();
        let mut out = Matrix::zeros(n, k);
        let mut e = vec![T::zero(); k];
        for t in 0..n {
            for v in e.iter_mut() {
                *v = T::c(rng.sample::<f64, _>(StandardNormal));
            }
            let z = self.chol.matvec(&e);
            for (i, zi) in z.into_iter().enumerate() {
                out[(t, i)] = clamp_open(norm_cdf(zi));
            }
        }
        out
    }
}

fn clamp_open<T: Scalar>(u: T) -> T {
    let lo = T::min_positive_value();
    u.max(lo).min(T::one() - T::epsilon())
}

fn clamp_u<T: Scalar>(u: T) -> T {
    let e = T::c(EPS_U);
    u.max(e).min(T::one() - e)
}

/// Objective value together with the number of floored terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue<T> {
    pub value: T,
    pub floored: usize,
}

/// Inner integral scheme for discrete/discrete pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipIntegration {
    /// Average over `draws` uniforms from a fixed stream (common random numbers).
    MonteCarlo { draws: usize },
    /// Self-normalized composite Gauss–Legendre in the normal-score variable,
    /// `nodes` points per panel of width ≤ 2.
    GaussLegendre { nodes: usize },
}

impl Default for BipIntegration {
    fn default() -> Self {
        BipIntegration::MonteCarlo { draws: 10_000 }
    }
}

/// Entries beyond which Monte-Carlo normal scores are recomputed per call
/// instead of cached.
const MC_CACHE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone)]
enum Kind<T> {
    /// `x` normal scores of the continuous coordinate; (a, b) of the discrete.
    Mixed { x: Vec<T>, a: Vec<T>, b: Vec<T> },
    Continuous { x: Vec<T>, y: Vec<T> },
    /// Integration nodes (normal scores of the integrated coordinate) with
    /// weights, `q` per observation; `lazy` holds what is needed to rebuild
    /// Monte-Carlo nodes on the fly.
    Discrete {
        a: Vec<T>,
        b: Vec<T>,
        q: usize,
        nodes: Vec<T>,
        /// Per-node weights (quadrature); `None` means a plain average.
        weights: Option<Vec<T>>,
        lazy: Option<LazyMc<T>>,
    },
}

#[derive(Debug, Clone)]
struct LazyMc<T> {
    z: Vec<T>,
    z_minus: Vec<T>,
    draws: Vec<T>,
}

/// Precomputed plug-in objective r ↦ −Σ_t log c_t(r). Evaluation is pure,
/// so the same instance can be shared across threads.
#[derive(Debug, Clone)]
pub struct PairObjective<T> {
    kind: Kind<T>,
}

fn check_probs<T: Scalar>(name: &str, v: &[T]) -> Result<()> {
    if let Some((t, z)) = v.iter().enumerate().find(|(_, z)| !(**z >= T::zero() && **z <= T::one())) {
        return Err(Error::Input(format!("{name}[{t}] = {z} is not a probability")));
    }
    Ok(())
}

fn check_interval<T: Scalar>(z: &[T], z_minus: &[T]) -> Result<()> {
    check_probs("Z", z)?;
    check_probs("Z-", z_minus)?;
    if z.len() != z_minus.len() {
        return Err(Error::Input("Z and Z- have different lengths".into()));
    }
    if let Some(t) = (0..z.len()).find(|&t| z_minus[t] > z[t]) {
        return Err(Error::Input(format!("Z-[{t}] exceeds Z[{t}]")));
    }
    Ok(())
}

impl<T: Scalar> PairObjective<T> {
    /// Continuous coordinate with PIT values `z_cont`, discrete coordinate
    /// with bracket [`z_disc_minus`, `z_disc`].
    pub fn mixed(z_cont: &[T], z_disc: &[T], z_disc_minus: &[T]) -> Result<Self> {
        check_probs("Z_cont", z_cont)?;
        check_interval(z_disc, z_disc_minus)?;
        if z_cont.len() != z_disc.len() {
            return Err(Error::Input("Z sequences have different lengths".into()));
        }
        Ok(Self {
            kind: Kind::Mixed {
                x: z_cont.iter().map(|&z| norm_quantile(clamp_u(z))).collect(),
                a: z_disc.iter().map(|&z| norm_quantile(z)).collect(),
                b: z_disc_minus.iter().map(|&z| norm_quantile(z)).collect(),
            },
        })
    }

    pub fn continuous(z1: &[T], z2: &[T]) -> Result<Self> {
        check_probs("Z1", z1)?;
        check_probs("Z2", z2)?;
        if z1.len() != z2.len() {
            return Err(Error::Input("Z sequences have different lengths".into()));
        }
        Ok(Self {
            kind: Kind::Continuous {
                x: z1.iter().map(|&z| norm_quantile(clamp_u(z))).collect(),
                y: z2.iter().map(|&z| norm_quantile(clamp_u(z))).collect(),
            },
        })
    }

    /// Two discrete coordinates: bracket i is differenced, bracket j is
    /// integrated out.
    pub fn discrete(
        z_i: &[T],
        z_i_minus: &[T],
        z_j: &[T],
        z_j_minus: &[T],
        scheme: BipIntegration,
        mc_draws: Option<&[T]>,
    ) -> Result<Self> {
        check_interval(z_i, z_i_minus)?;
        check_interval(z_j, z_j_minus)?;
        if z_i.len() != z_j.len() {
            return Err(Error::Input("Z sequences have different lengths".into()));
        }
        let n = z_i.len();
        let a = z_i.iter().map(|&z| norm_quantile(z)).collect();
        let b = z_i_minus.iter().map(|&z| norm_quantile(z)).collect();
        let kind = match scheme {
            BipIntegration::MonteCarlo { .. } => {
                let draws = mc_draws
                    .ok_or_else(|| Error::Input("Monte-Carlo integration needs draws".into()))?;
                if draws.is_empty() {
                    return Err(Error::Input("Monte-Carlo integration needs draws".into()));
                }
                check_probs("mc_draws", draws)?;
                let q = draws.len();
                if n * q <= MC_CACHE_LIMIT {
                    let mut nodes = Vec::with_capacity(n * q);
                    for t in 0..n {
                        nodes.extend(draws.iter().map(|&u| mc_score(z_j[t], z_j_minus[t], u)));
                    }
                    Kind::Discrete { a, b, q, nodes, weights: None, lazy: None }
                } else {
                    Kind::Discrete {
                        a,
                        b,
                        q,
                        nodes: Vec::new(),
                        weights: None,
                        lazy: Some(LazyMc {
                            z: z_j.to_vec(),
                            z_minus: z_j_minus.to_vec(),
                            draws: draws.to_vec(),
                        }),
                    }
                }
            }
            BipIntegration::GaussLegendre { nodes: per_panel } => {
                if per_panel == 0 {
                    return Err(Error::Input("quadrature needs at least one node".into()));
                }
                let (gx, gw) = gauss_legendre::<T>(per_panel);
                let rules: Vec<(Vec<T>, Vec<T>)> =
                    (0..n).map(|t| quadrature_rule(z_j[t], z_j_minus[t], &gx, &gw)).collect();
                let q = rules.iter().map(|r| r.0.len()).max().unwrap_or(1);
                let mut nodes = Vec::with_capacity(n * q);
                let mut weights = Vec::with_capacity(n * q);
                for (xs, ws) in rules {
                    // Pad with zero-weight nodes so every row has q entries.
                    let pad = q - xs.len();
                    nodes.extend(xs);
                    weights.extend(ws);
                    nodes.extend(std::iter::repeat_n(T::zero(), pad));
                    weights.extend(std::iter::repeat_n(T::zero(), pad));
                }
                Kind::Discrete { a, b, q, nodes, weights: Some(weights), lazy: None }
            }
        };
        Ok(Self { kind })
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::Mixed { x, .. } | Kind::Continuous { x, .. } => x.len(),
            Kind::Discrete { a, .. } => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-observation likelihood contribution c_t(r) (a probability for
    /// discrete brackets, a density for the continuous/continuous pair).
    fn term(&self, t: usize, r: T, s: T) -> T {
        match &self.kind {
            Kind::Mixed { x, a, b } => {
                let rx = r * x[t];
                norm_cdf_diff((a[t] - rx) / s, (b[t] - rx) / s)
            }
            Kind::Continuous { x, y } => {
                let (u, v) = (x[t], y[t]);
                let one_m = s * s;
                (-(r * r * (u * u + v * v) - T::c(2.0) * r * u * v) / (T::c(2.0) * one_m)).exp() / s
            }
            Kind::Discrete { a, b, q, nodes, weights, lazy } => {
                let mut acc = KahanSum::new();
                let (at, bt) = (a[t], b[t]);
                for k in 0..*q {
                    let e = match lazy {
                        Some(l) => mc_score(l.z[t], l.z_minus[t], l.draws[k]),
                        None => nodes[t * q + k],
                    };
                    let re = r * e;
                    let p = norm_cdf_diff((at - re) / s, (bt - re) / s);
                    acc.add(match weights {
                        Some(w) => w[t * q + k] * p,
                        None => p,
                    });
                }
                match weights {
                    Some(_) => acc.value(),
                    None => acc.value() / T::from_usize_lossy(*q),
                }
            }
        }
    }

    pub fn eval(&self, r: T) -> Result<ObjectiveValue<T>> {
        if !(r.abs() < T::one()) {
            return Err(Error::Input(format!("copula correlation must satisfy |r| < 1, got {r}")));
        }
        let s = (T::one() - r * r).sqrt();
        let floor = T::c(EPS_LIKE);
        let terms: Vec<(T, bool)> = (0..self.len())
            .into_par_iter()
            .map(|t| {
                let c = self.term(t, r, s);
                if c > floor && c.is_finite() {
                    (c.ln(), false)
                } else {
                    (floor.ln(), true)
                }
            })
            .collect();
        let mut sum = KahanSum::new();
        let mut floored = 0;
        for (v, f) in terms {
            sum.add(v);
            floored += usize::from(f);
        }
        Ok(ObjectiveValue { value: -sum.value(), floored })
    }

    /// Delta-method standard error of a Monte-Carlo discrete objective at r;
    /// `None` for exact objectives.
    pub fn mc_standard_error(&self, r: T) -> Option<T> {
        let Kind::Discrete { a, b, q, nodes, lazy, weights } = &self.kind else {
            return None;
        };
        if weights.is_some() {
            return None;
        }
        let s = (T::one() - r * r).sqrt();
        let n = a.len();
        let q = *q;
        let mut cols = vec![KahanSum::<T>::new(); q];
        for t in 0..n {
            let mut vals = Vec::with_capacity(q);
            for k in 0..q {
                let e = match lazy {
                    Some(l) => mc_score(l.z[t], l.z_minus[t], l.draws[k]),
                    None => nodes[t * q + k],
                };
                let re = r * e;
                vals.push(norm_cdf_diff((a[t] - re) / s, (b[t] - re) / s));
            }
            let mean = vals.iter().copied().sum::<T>() / T::from_usize_lossy(q);
            if mean > T::c(EPS_LIKE) {
                for (c, v) in cols.iter_mut().zip(vals) {
                    c.add(v / mean);
                }
            }
        }
        let g: Vec<T> = cols.iter().map(|c| c.value()).collect();
        let qn = T::from_usize_lossy(q);
        let mean = g.iter().copied().sum::<T>() / qn;
        let var = g.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (qn - T::one()).max(T::one());
        Some((var / qn).sqrt())
    }
}

fn mc_score<T: Scalar>(z: T, z_minus: T, u: T) -> T {
    norm_quantile(clamp_u(z - u * (z - z_minus)))
}

/// Nodes and normalized weights for E[f(ε)] with ε standard normal
/// restricted to [Φ⁻¹(z⁻), Φ⁻¹(z)].
fn quadrature_rule<T: Scalar>(z: T, z_minus: T, gx: &[T], gw: &[T]) -> (Vec<T>, Vec<T>) {
    let lo = norm_quantile(clamp_u(z_minus));
    let hi = norm_quantile(clamp_u(z));
    let width = hi - lo;
    if !(width > T::c(1e-9)) {
        return (vec![lo.max(hi.min(lo))], vec![T::one()]);
    }
    let panels = (width / T::c(2.0)).ceil().to_usize().unwrap_or(1).max(1);
    let h = width / T::from_usize_lossy(panels);
    let half = h * T::c(0.5);
    let mut xs = Vec::with_capacity(panels * gx.len());
    let mut ws = Vec::with_capacity(panels * gx.len());
    for p in 0..panels {
        let center = lo + h * T::from_usize_lossy(p) + half;
        for (x, w) in gx.iter().zip(gw) {
            let e = center + half * *x;
            xs.push(e);
            ws.push(*w * half * norm_pdf(e));
        }
    }
    let total: T = ws.iter().copied().sum();
    ws.iter_mut().for_each(|w| *w /= total);
    (xs, ws)
}

/// Continuous/discrete objective: −Σ_t log[Φ((Φ⁻¹Z_t − rΦ⁻¹W_t)/√(1−r²))
/// − Φ((Φ⁻¹Z⁻_t − rΦ⁻¹W_t)/√(1−r²))] with W the continuous coordinate.
pub fn gain_objective<T: Scalar>(
    r: T,
    z_cont: &[T],
    z_count: &[T],
    z_count_minus: &[T],
) -> Result<ObjectiveValue<T>> {
    PairObjective::mixed(z_cont, z_count, z_count_minus)?.eval(r)
}

/// Discrete/discrete objective with the inner integral over coordinate j
/// replaced by an average over `mc_draws`.
pub fn bip_objective<T: Scalar>(
    r: T,
    z_i: &[T],
    z_i_minus: &[T],
    z_j: &[T],
    z_j_minus: &[T],
    mc_draws: &[T],
) -> Result<ObjectiveValue<T>> {
    PairObjective::discrete(
        z_i,
        z_i_minus,
        z_j,
        z_j_minus,
        BipIntegration::MonteCarlo { draws: mc_draws.len() },
        Some(mc_draws),
    )?
    .eval(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitROptions<T> {
    pub grid_points: usize,
    /// Search interval is [−1 + eps_r, 1 − eps_r].
    pub eps_r: T,
    pub tol: T,
}

impl<T: Scalar> Default for FitROptions<T> {
    fn default() -> Self {
        Self { grid_points: 41, eps_r: T::c(1e-3), tol: T::c(1e-5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RFit<T> {
    pub r_hat: T,
    pub value: T,
    pub floored: usize,
    pub mc_se: Option<T>,
}

/// Grid search followed by Brent refinement on the bracketing grid cells.
pub fn fit_r<T: Scalar>(objective: &PairObjective<T>, opts: &FitROptions<T>) -> Result<RFit<T>> {
    if objective.is_empty() {
        return Err(Error::EstimationFailed("no observations for the copula fit".into()));
    }
    if opts.grid_points < 3 {
        return Err(Error::Input("copula grid needs at least 3 points".into()));
    }
    let lo = -T::one() + opts.eps_r;
    let hi = T::one() - opts.eps_r;
    let step = (hi - lo) / T::from_usize_lossy(opts.grid_points - 1);
    let grid: Vec<T> = (0..opts.grid_points).map(|g| lo + step * T::from_usize_lossy(g)).collect();
    let mut best = (0, T::infinity());
    for (g, &r) in grid.iter().enumerate() {
        let v = objective.eval(r)?.value;
        if v < best.1 {
            best = (g, v);
        }
    }
    let a = grid[best.0.saturating_sub(1)];
    let b = grid[(best.0 + 1).min(grid.len() - 1)];
    let (r_hat, value) = brent_minimize(|r| objective.eval(r).map(|v| v.value), a, b, opts.tol)?;
    let (r_hat, value) = if value <= best.1 { (r_hat, value) } else { (grid[best.0], best.1) };
    let at = objective.eval(r_hat)?;
    if at.floored == objective.len() {
        return Err(Error::EstimationFailed(
            "every copula likelihood term was floored; Z inputs are degenerate".into(),
        ));
    }
    Ok(RFit { r_hat, value, floored: at.floored, mc_se: objective.mc_standard_error(r_hat) })
}
