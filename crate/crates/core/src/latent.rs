//! Linear latent recursion
//!
//! ```text
//! λ_t = d + B λ_{t-1} + A Ȳ_{t-1} + Γ X_{t-1},   Ȳ_{i,t} = g_i(Y_{i,t})
//! ```
//!
//! together with its first and second derivative recursions in θ. The
//! parameter vector uses the ordering θ = (d', vec(Γ)', vec(A)', vec(B)')'
//! with column-major vec and a dense B.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::marginals::{LatentDomain, MarginalFamily};
use crate::model::{ModelSpec, SeriesFrame};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLinear<T> {
    pub d: Vec<T>,
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub gamma: Matrix<T>,
}

impl<T: Scalar> ThetaLinear<T> {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            d: vec![T::zero(); k],
            a: Matrix::zeros(k, k),
            b: Matrix::zeros(k, k),
            gamma: Matrix::zeros(k, m),
        }
    }

    pub fn new(d: Vec<T>, a: Matrix<T>, b: Matrix<T>, gamma: Matrix<T>) -> Result<Self> {
        let theta = Self { d, a, b, gamma };
        theta.validate(theta.k(), theta.m())?;
        Ok(theta)
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.gamma.cols()
    }

    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        let dims_ok = self.d.len() == k
            && (self.a.rows(), self.a.cols()) == (k, k)
            && (self.b.rows(), self.b.cols()) == (k, k)
            && (self.gamma.rows(), self.gamma.cols()) == (k, m);
        if !dims_ok {
            return Err(Error::Input(format!(
                "theta dimensions inconsistent with k={k}, m={m}"
            )));
        }
        let finite = self.d.iter().all(|x| x.is_finite())
            && self.a.is_finite()
            && self.b.is_finite()
            && self.gamma.is_finite();
        if !finite {
            return Err(Error::Input("theta has non-finite entries".into()));
        }
        Ok(())
    }

    /// Number of entries of the full parameter vector (dense B).
    pub fn param_count(&self) -> usize {
        let (k, m) = (self.k(), self.m());
        k + k * m + 2 * k * k
    }

    pub fn idx_d(&self, i: usize) -> usize {
        i
    }

    pub fn idx_gamma(&self, i: usize, l: usize) -> usize {
        self.k() + l * self.k() + i
    }

    pub fn idx_a(&self, i: usize, j: usize) -> usize {
        let k = self.k();
        k + k * self.m() + j * k + i
    }

    pub fn idx_b(&self, i: usize, j: usize) -> usize {
        let k = self.k();
        k + k * self.m() + k * k + j * k + i
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.d.clone();
        for l in 0..self.m() {
            v.extend(self.gamma.column(l));
        }
        for j in 0..self.k() {
            v.extend(self.a.column(j));
        }
        for j in 0..self.k() {
            v.extend(self.b.column(j));
        }
        v
    }

    pub fn from_vec(k: usize, m: usize, v: &[T]) -> Result<Self> {
        let mut theta = Self::zeros(k, m);
        if v.len() != theta.param_count() {
            return Err(Error::Input(format!(
                "parameter vector has length {}, expected {}",
                v.len(),
                theta.param_count()
            )));
        }
        theta.d.copy_from_slice(&v[..k]);
        for i in 0..k {
            for l in 0..m {
                theta.gamma[(i, l)] = v[theta.idx_gamma(i, l)];
            }
            for j in 0..k {
                theta.a[(i, j)] = v[theta.idx_a(i, j)];
                theta.b[(i, j)] = v[theta.idx_b(i, j)];
            }
        }
        Ok(theta)
    }

    /// Names of the full parameter vector entries ("d.1", "Gamma.1.1", …).
    pub fn param_names(&self) -> Vec<String> {
        let (k, m) = (self.k(), self.m());
        let mut names: Vec<String> = (1..=k).map(|i| format!("d.{i}")).collect();
        for l in 1..=m {
            names.extend((1..=k).map(|i| format!("Gamma.{i}.{l}")));
        }
        for j in 1..=k {
            names.extend((1..=k).map(|i| format!("A.{i}.{j}")));
        }
        for j in 1..=k {
            names.extend((1..=k).map(|i| format!("B.{i}.{j}")));
        }
        names
    }

    /// Length of one equation's parameter block θ⁽ⁱ⁾ (diagonal B).
    pub fn equation_len(k: usize, m: usize) -> usize {
        2 + m + k
    }

    /// θ⁽ⁱ⁾ = (d_i, Γ(i,1..m), A(i,1..k), B(i,i)).
    pub fn equation_params(&self, i: usize) -> Vec<T> {
        let mut p = Vec::with_capacity(Self::equation_len(self.k(), self.m()));
        p.push(self.d[i]);
        p.extend_from_slice(self.gamma.row(i));
        p.extend_from_slice(self.a.row(i));
        p.push(self.b[(i, i)]);
        p
    }

    pub fn set_equation_params(&mut self, i: usize, p: &[T]) {
        let (k, m) = (self.k(), self.m());
        assert_eq!(p.len(), Self::equation_len(k, m));
        self.d[i] = p[0];
        self.gamma.row_mut(i).copy_from_slice(&p[1..1 + m]);
        self.a.row_mut(i).copy_from_slice(&p[1 + m..1 + m + k]);
        self.b[(i, i)] = p[1 + m + k];
    }

    pub fn equation_param_names(i: usize, k: usize, m: usize) -> Vec<String> {
        let r = i + 1;
        let mut names = vec![format!("d.{r}")];
        names.extend((1..=m).map(|l| format!("Gamma.{r}.{l}")));
        names.extend((1..=k).map(|j| format!("A.{r}.{j}")));
        names.push(format!("B.{r}.{r}"));
        names
    }

    pub fn cast<U: Scalar>(&self) -> ThetaLinear<U> {
        ThetaLinear {
            d: self.d.iter().map(|x| U::c(x.to_f64_lossy())).collect(),
            a: self.a.cast(),
            b: self.b.cast(),
            gamma: self.gamma.cast(),
        }
    }
}

/// Which derivative slabs `filter` computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Derivatives {
    None,
    First,
    Second,
}

/// λ_t(θ) trajectory with optional ∇λ_t and ∇²λ_t.
#[derive(Debug, Clone)]
pub struct LatentPath<T> {
    n: usize,
    k: usize,
    q: usize,
    lambda: Vec<T>,
    dlambda: Option<Vec<T>>,
    d2lambda: Option<Vec<T>>,
}

impl<T: Scalar> LatentPath<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Parameter count of the derivative slabs.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn lambda(&self, t: usize) -> &[T] {
        &self.lambda[t * self.k..(t + 1) * self.k]
    }

    pub fn lambda_matrix(&self) -> Matrix<T> {
        Matrix::from_vec(self.n, self.k, self.lambda.clone())
    }

    /// ∂λ_{i,t}/∂θ, a slice of length q.
    pub fn dlambda(&self, t: usize, i: usize) -> Option<&[T]> {
        let q = self.q;
        let base = (t * self.k + i) * q;
        self.dlambda.as_ref().map(|d| &d[base..base + q])
    }

    /// ∂²λ_{i,t}/∂θ_p∂θ_r.
    pub fn d2lambda(&self, t: usize, i: usize, p: usize, r: usize) -> Option<T> {
        let q = self.q;
        self.d2lambda
            .as_ref()
            .map(|h| h[((t * self.k + i) * q + p) * q + r])
    }
}

fn check_domain<T: Scalar>(fam: MarginalFamily, t: usize, i: usize, v: T) -> Result<()> {
    let ok = v.is_finite() && (fam.latent_domain() == LatentDomain::Real || v > T::zero());
    if ok {
        Ok(())
    } else {
        Err(Error::LatentDomain { t, coord: i + 1, value: v.to_f64_lossy() })
    }
}

/// Runs the initialized recursion λ̄_0 = `lambda0`, λ̄_t = g_θ(λ̄_{t−1}, Y_{t−1}, X_{t−1})
/// over all rows of `data`. Derivative paths start at zero.
pub fn filter<T: Scalar>(
    theta: &ThetaLinear<T>,
    spec: &ModelSpec<T>,
    data: &SeriesFrame<T>,
    lambda0: &[T],
    derivatives: Derivatives,
) -> Result<LatentPath<T>> {
    let (k, m, n) = (theta.k(), theta.m(), data.n());
    if spec.k() != k || data.k() != k || data.m() != m {
        return Err(Error::Input(format!(
            "dimension mismatch: theta k={k} m={m}, spec k={}, data k={} m={}",
            spec.k(),
            data.k(),
            data.m()
        )));
    }
    if n == 0 {
        return Err(Error::Input("empty series".into()));
    }
    if lambda0.len() != k {
        return Err(Error::Input(format!("lambda0 has length {}, expected {k}", lambda0.len())));
    }
    for (i, (&fam, &v)) in spec.families.iter().zip(lambda0).enumerate() {
        fam.check_latent(v)
            .map_err(|e| Error::Precondition(format!("lambda0[{}]: {e}", i + 1)))?;
    }

    let q = theta.param_count();
    let want1 = derivatives >= Derivatives::First;
    let want2 = derivatives == Derivatives::Second;
    let mut lambda = vec![T::zero(); n * k];
    lambda[..k].copy_from_slice(lambda0);
    let mut dl = want1.then(|| vec![T::zero(); n * k * q]);
    let mut d2l = want2.then(|| vec![T::zero(); n * k * q * q]);
    let ybar = data.transformed(&spec.families);

    for t in 1..n {
        let (prev, cur) = lambda.split_at_mut(t * k);
        let prev = &prev[(t - 1) * k..];
        let ybar_prev = ybar.row(t - 1);
        let x_prev = data.x.row(t - 1);
        for i in 0..k {
            let mut v = theta.d[i];
            for j in 0..k {
                v += theta.b[(i, j)] * prev[j] + theta.a[(i, j)] * ybar_prev[j];
            }
            for l in 0..m {
                v += theta.gamma[(i, l)] * x_prev[l];
            }
            check_domain(spec.families[i], t, i, v)?;
            cur[i] = v;
        }

        if let Some(dl) = dl.as_mut() {
            let (before, after) = dl.split_at_mut(t * k * q);
            let dprev = &before[(t - 1) * k * q..];
            let dcur = &mut after[..k * q];
            for i in 0..k {
                for p in 0..q {
                    let mut acc = T::zero();
                    for j in 0..k {
                        acc += theta.b[(i, j)] * dprev[j * q + p];
                    }
                    dcur[i * q + p] = acc;
                }
                dcur[i * q + theta.idx_d(i)] += T::one();
                for l in 0..m {
                    dcur[i * q + theta.idx_gamma(i, l)] += x_prev[l];
                }
                for j in 0..k {
                    dcur[i * q + theta.idx_a(i, j)] += ybar_prev[j];
                    dcur[i * q + theta.idx_b(i, j)] += prev[j];
                }
            }

            if let Some(d2l) = d2l.as_mut() {
                let (hb, ha) = d2l.split_at_mut(t * k * q * q);
                let hprev = &hb[(t - 1) * k * q * q..];
                let hcur = &mut ha[..k * q * q];
                for i in 0..k {
                    for p in 0..q {
                        for r in 0..q {
                            let mut acc = T::zero();
                            for j in 0..k {
                                acc += theta.b[(i, j)] * hprev[(j * q + p) * q + r];
                            }
                            hcur[(i * q + p) * q + r] = acc;
                        }
                    }
                    // ∂B/∂B(i,j) = E(i,j): contributes ∂λ_{j,t−1}/∂θ_r to row i.
                    for j in 0..k {
                        let pb = theta.idx_b(i, j);
                        for r in 0..q {
                            hcur[(i * q + pb) * q + r] += dprev[j * q + r];
                            hcur[(i * q + r) * q + pb] += dprev[j * q + r];
                        }
                    }
                }
            }
        }
    }

    Ok(LatentPath { n, k, q, lambda, dlambda: dl, d2lambda: d2l })
}

/// Default deterministic start: for positive-latent coordinates the sample
/// mean of g_i(Y_i) (floored at 1e-6), zero otherwise.
pub fn default_lambda0<T: Scalar>(families: &[MarginalFamily], data: &SeriesFrame<T>) -> Vec<T> {
    let n = T::from_usize_lossy(data.n().max(1));
    families
        .iter()
        .enumerate()
        .map(|(i, fam)| match fam.latent_domain() {
            LatentDomain::PositiveReal => {
                let mean = (0..data.n())
                    .map(|t| fam.transform_unchecked(data.y[(t, i)]))
                    .sum::<T>()
                    / n;
                mean.max(T::c(1e-6))
            }
            LatentDomain::Real => T::zero(),
        })
        .collect()
}

/// Single-equation recursion for a diagonal-B model.
///
/// `params` is θ⁽ⁱ⁾ = (d_i, Γ(i,·), A(i,·), B(i,i)). Writes λ̄_{i,t} into
/// `lam` and, when `dlam` is given, ∂λ̄_{i,t}/∂θ⁽ⁱ⁾ row-major (n × p).
pub fn equation_filter<T: Scalar>(
    family: MarginalFamily,
    coord: usize,
    params: &[T],
    ybar: &Matrix<T>,
    x: &Matrix<T>,
    lambda0: T,
    lam: &mut Vec<T>,
    mut dlam: Option<&mut Vec<T>>,
) -> Result<()> {
    let (n, k, m) = (ybar.rows(), ybar.cols(), x.cols());
    let p = ThetaLinear::<T>::equation_len(k, m);
    assert_eq!(params.len(), p, "equation parameter length");
    let b = params[p - 1];
    lam.clear();
    lam.resize(n, T::zero());
    lam[0] = lambda0;
    if let Some(d) = dlam.as_deref_mut() {
        d.clear();
        d.resize(n * p, T::zero());
    }
    for t in 1..n {
        let yb = ybar.row(t - 1);
        let xr = x.row(t - 1);
        let mut v = params[0] + b * lam[t - 1];
        for l in 0..m {
            v += params[1 + l] * xr[l];
        }
        for j in 0..k {
            v += params[1 + m + j] * yb[j];
        }
        check_domain(family, t, coord, v)?;
        lam[t] = v;
        if let Some(d) = dlam.as_deref_mut() {
            let (before, after) = d.split_at_mut(t * p);
            let prev = &before[(t - 1) * p..];
            let cur = &mut after[..p];
            for c in 0..p {
                cur[c] = b * prev[c];
            }
            cur[0] += T::one();
            for l in 0..m {
                cur[1 + l] += xr[l];
            }
            for j in 0..k {
                cur[1 + m + j] += yb[j];
            }
            cur[p - 1] += lam[t - 1];
        }
    }
    Ok(())
}
