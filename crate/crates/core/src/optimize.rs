//! Box-constrained projected L-BFGS and Brent's one-dimensional minimizer.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> BoxBounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Input("box bounds must satisfy lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [T]) {
        for ((xi, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.max(l).min(u);
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (l, u))| xi >= l && xi <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions<T> {
    pub max_iter: usize,
    /// Stop when ‖x − P(x − ∇f)‖_∞ ≤ grad_tol·(1 + |f|).
    pub grad_tol: T,
    /// Stop when an accepted step changes f by ≤ f_tol·(1 + |f|).
    pub f_tol: T,
    pub memory: usize,
}

impl<T: Scalar> Default for OptimOptions<T> {
    fn default() -> Self {
        Self { max_iter: 2000, grad_tol: T::c(1e-6), f_tol: T::c(1e-10), memory: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    GradientConverged,
    ObjectiveConverged,
    MaxIterations,
    LineSearchFailed,
}

impl OptimStatus {
    pub fn converged(self) -> bool {
        matches!(self, OptimStatus::GradientConverged | OptimStatus::ObjectiveConverged)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimStatus::GradientConverged => "converged_gradient",
            OptimStatus::ObjectiveConverged => "converged_objective",
            OptimStatus::MaxIterations => "max_iterations",
            OptimStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult<T> {
    pub x: Vec<T>,
    pub f: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: OptimStatus,
    /// Objective after each accepted step, starting with f(x0).
    pub trace: Vec<T>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn projected_gradient_norm<T: Scalar>(x: &[T], g: &[T], bounds: &BoxBounds<T>) -> T {
    let mut m = T::zero();
    for i in 0..x.len() {
        let step = (x[i] - g[i]).max(bounds.lower[i]).min(bounds.upper[i]);
        m = m.max((x[i] - step).abs());
    }
    m
}

/// Minimizes `f` over a box. `f(x, grad)` returns `None` when x lies outside
/// the objective's domain; such trial points are treated as failed steps.
pub fn minimize_box<T, F>(
    mut f: F,
    x0: &[T],
    bounds: &BoxBounds<T>,
    opts: &OptimOptions<T>,
) -> Result<OptimResult<T>>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]) -> Option<T>,
{
    let n = x0.len();
    if bounds.dim() != n {
        return Err(Error::Input("bounds and start point differ in dimension".into()));
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g)
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Numeric("objective undefined at the start point".into()))?;
    let mut evaluations = 1;
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::new();
    let mut status = OptimStatus::MaxIterations;
    let mut iterations = 0;
    let c1 = T::c(1e-4);
    let mut xt = vec![T::zero(); n];
    let mut gt = vec![T::zero(); n];

    while iterations < opts.max_iter {
        let pg = projected_gradient_norm(&x, &g, bounds);
        if pg <= opts.grad_tol * (T::one() + fx.abs()) {
            status = OptimStatus::GradientConverged;
            break;
        }
        iterations += 1;
        let eps = pg.min(T::c(1e-3));
        let active: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= bounds.lower[i] + eps && g[i] > T::zero())
                    || (x[i] >= bounds.upper[i] - eps && g[i] < T::zero())
            })
            .collect();

        let mut accepted = false;
        for attempt in 0..2 {
            if attempt == 1 {
                if history.is_empty() {
                    break;
                }
                history.clear();
            }
            let d = direction(&g, &active, &history);
            let mut alpha = if history.is_empty() {
                T::one().min(g.iter().fold(T::zero(), |m, v| m.max(v.abs())).recip())
            } else {
                T::one()
            };
            for _ in 0..60 {
                for i in 0..n {
                    xt[i] = x[i] + alpha * d[i];
                }
                bounds.project(&mut xt);
                let step: Vec<T> = xt.iter().zip(&x).map(|(a, b)| *a - *b).collect();
                let decrease = dot(&g, &step);
                if step.iter().all(|s| *s == T::zero()) {
                    break;
                }
                evaluations += 1;
                if let Some(ft) = f(&xt, &mut gt).filter(|v| v.is_finite()) {
                    if ft <= fx + c1 * decrease && decrease < T::zero() {
                        let y: Vec<T> = gt.iter().zip(&g).map(|(a, b)| *a - *b).collect();
                        let sy = dot(&step, &y);
                        if sy > T::c(1e-10) * dot(&step, &step).sqrt() * dot(&y, &y).sqrt() {
                            history.push_back((step, y, sy));
                            if history.len() > opts.memory {
                                history.pop_front();
                            }
                        }
                        let change = fx - ft;
                        x.copy_from_slice(&xt);
                        g.copy_from_slice(&gt);
                        fx = ft;
                        trace.push(fx);
                        accepted = true;
                        if change <= opts.f_tol * (T::one() + fx.abs()) {
                            status = OptimStatus::ObjectiveConverged;
                        }
                        break;
                    }
                }
                alpha *= T::c(0.5);
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            status = if projected_gradient_norm(&x, &g, bounds) <= opts.grad_tol.sqrt() {
                OptimStatus::ObjectiveConverged
            } else {
                OptimStatus::LineSearchFailed
            };
            break;
        }
        if status == OptimStatus::ObjectiveConverged {
            break;
        }
    }
    Ok(OptimResult { x, f: fx, grad: g, iterations, evaluations, status, trace })
}

/// Two-loop L-BFGS direction on the free variables; active ones move by −g.
fn direction<T: Scalar>(g: &[T], active: &[bool], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mask = |v: &[T]| -> Vec<T> {
        v.iter().zip(active).map(|(&x, &a)| if a { T::zero() } else { x }).collect()
    };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, _) in history.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= T::zero() {
            alphas.push(None);
            continue;
        }
        let a = dot(&s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * *yi;
        }
        alphas.push(Some((a, sy)));
    }
    if let Some((s, y, _)) = history.back() {
        let (s, y) = (mask(s), mask(y));
        let yy = dot(&y, &y);
        let sy = dot(&s, &y);
        if yy > T::zero() && sy > T::zero() {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, _), a) in history.iter().zip(alphas.iter().rev()) {
        if let Some((a, sy)) = a {
            let (s, y) = (mask(s), mask(y));
            let b = dot(&y, &q) / *sy;
            for (qi, si) in q.iter_mut().zip(&s) {
                *qi += (*a - b) * *si;
            }
        }
    }
    let mut d: Vec<T> = q.iter().map(|v| -*v).collect();
    for i in 0..d.len() {
        if active[i] {
            d[i] = -g[i];
        }
    }
    if dot(&d, g) >= T::zero() {
        return g.iter().map(|v| -*v).collect();
    }
    d
}

/// Brent's parabolic/golden-section minimizer on [a, b] to absolute
/// tolerance `tol` in x. Returns (x_min, f(x_min)).
pub fn brent_minimize<T, F>(mut f: F, a: T, b: T, tol: T) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let golden = T::c(0.381_966_011_250_105_1);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x = lo + golden * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut e = T::zero();
    let mut d = T::zero();
    let half = T::c(0.5);
    for _ in 0..200 {
        let mid = half * (lo + hi);
        let tol1 = tol * T::c(0.5) + T::epsilon() * x.abs();
        let tol2 = tol1 * T::c(2.0);
        if (x - mid).abs() <= tol2 - half * (hi - lo) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = T::c(2.0) * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (half * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= mid { lo - x } else { hi - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > T::zero() { x + tol1 } else { x - tol1 };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Option<f64> {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        Some((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let bounds = BoxBounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let opts = OptimOptions { grad_tol: 1e-10, f_tol: 0.0, ..Default::default() };
        let res = minimize_box(rosenbrock, &[-1.2, 1.0], &bounds, &opts).unwrap();
        assert!(res.status.converged(), "{:?}", res.status);
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6, "{:?}", res.x);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn active_bound() {
        // min (x-2)² + (y+1)² on [0,1]²  ->  (1, 0)
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 2.0);
            g[1] = 2.0 * (x[1] + 1.0);
            Some((x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2))
        };
        let bounds = BoxBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let res = minimize_box(f, &[0.5, 0.5], &bounds, &OptimOptions::default()).unwrap();
        assert_eq!(res.x, vec![1.0, 0.0]);
        assert!(res.status.converged());
    }

    #[test]
    fn domain_failures_shrink_the_step() {
        // -ln(x) + x, minimum at 1, undefined for x <= 0.
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return None;
            }
            g[0] = -1.0 / x[0] + 1.0;
            Some(-x[0].ln() + x[0])
        };
        let bounds = BoxBounds::new(vec![-10.0], vec![10.0]).unwrap();
        let res = minimize_box(f, &[8.0], &bounds, &OptimOptions::default()).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn brent_quadratic_and_edge() {
        let (x, fx) = brent_minimize(|x: f64| Ok((x - 0.3).powi(2) + 1.0), -1.0, 1.0, 1e-8).unwrap();
        assert!((x - 0.3).abs() < 1e-7 && (fx - 1.0).abs() < 1e-14);
        let (x, _) = brent_minimize(|x: f64| Ok(x), 0.0, 1.0, 1e-8).unwrap();
        assert!(x < 1e-7);
    }
}
