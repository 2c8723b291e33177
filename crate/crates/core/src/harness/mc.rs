//! Monte-Carlo experiments: simulate, refit and tabulate over a grid of
//! copula correlations and sample sizes.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions};
use crate::latent::ThetaLinear;
use crate::model::ModelSpec;
use crate::rng::RngStreams;
use crate::scalar::Scalar;
use crate::simulate::{simulate, CovariateProcess, SimConfig};

#[derive(Debug, Clone)]
pub struct McDesign<T> {
    /// Model template; its correlation is replaced by each grid value.
    pub spec: ModelSpec<T>,
    pub covariate: CovariateProcess<T>,
    pub burn_in: usize,
    pub r_grid: Vec<T>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> McDesign<T> {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.spec.k() != 2 {
            return Err(Error::Unsupported("Monte-Carlo grids are defined for bivariate models".into()));
        }
        if self.reps == 0 {
            return Err(Error::Input("mc: reps must be >= 1".into()));
        }
        if self.r_grid.is_empty() || self.r_grid.iter().any(|r| !(r.abs() < T::one())) {
            return Err(Error::Input("mc: r_grid must be a nonempty subset of (-1, 1)".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 3) {
            return Err(Error::Input("mc: sample sizes must be >= 3".into()));
        }
        Ok(())
    }

    /// Names of the estimated coordinates, in stacked per-equation order.
    pub fn param_names(&self) -> Vec<String> {
        let (k, m) = (self.spec.k(), self.spec.m());
        (0..k)
            .flat_map(|i| ThetaLinear::<T>::equation_param_names(i, k, m))
            .filter(|name| !self.fit.pinned.iter().any(|(p, _)| p == name))
            .collect()
    }
}

/// Summary of one parameter across the converged replications of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStat<T> {
    pub truth: T,
    pub avg: T,
    pub sd: T,
    pub mse: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCell<T> {
    pub n: usize,
    pub r: T,
    pub reps: usize,
    pub converged: usize,
    pub failed: usize,
    /// One entry per [`McTable::param_names`].
    pub params: Vec<McStat<T>>,
    pub r_hat: Option<McStat<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTable<T> {
    pub param_names: Vec<String>,
    pub cells: Vec<McCell<T>>,
}

enum Outcome<T> {
    Converged { theta: Vec<T>, r_hat: Option<T> },
    NotConverged,
    Failed,
}

fn stat<T: Scalar>(truth: T, xs: &[T]) -> McStat<T> {
    let n = T::from_usize_lossy(xs.len());
    if xs.is_empty() {
        let nan = T::nan();
        return McStat { truth, avg: nan, sd: nan, mse: nan };
    }
    let avg = xs.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let ss = xs.iter().map(|&x| (x - avg) * (x - avg)).fold(T::zero(), |a, b| a + b);
    let sd = if xs.len() > 1 { (ss / (n - T::one())).sqrt() } else { T::zero() };
    let mse = xs.iter().map(|&x| (x - truth) * (x - truth)).fold(T::zero(), |a, b| a + b) / n;
    McStat { truth, avg, sd, mse }
}

fn replicate<T: Scalar>(design: &McDesign<T>, n: usize, r: T, rep: usize, names: &[String]) -> Outcome<T> {
    let streams = RngStreams::new(design.seed).derive(&format!("mc:n={n}:r={r}:rep={rep}"));
    let Ok(spec) = ModelSpec::bivariate([design.spec.families[0], design.spec.families[1]], design.spec.theta.clone(), r)
    else {
        return Outcome::Failed;
    };
    let config = SimConfig::new(n, streams.seed())
        .with_covariate(design.covariate.clone())
        .with_burn_in(design.burn_in);
    let Ok(sim) = simulate(&spec, &config) else {
        return Outcome::Failed;
    };
    let mut options = design.fit.clone();
    options.mc_seed = streams.derive("fit").seed();
    match fit(&spec.families, &sim.frame, &options) {
        Err(_) => Outcome::Failed,
        Ok(res) if !res.all_converged() || (options.fit_copula && res.r_hat.is_none()) => Outcome::NotConverged,
        Ok(res) => {
            let all = res.theta_hat.to_vec();
            let full_names = res.theta_hat.param_names();
            let theta = names
                .iter()
                .map(|name| all[full_names.iter().position(|f| f == name).expect("known parameter")])
                .collect();
            Outcome::Converged { theta, r_hat: res.r_hat }
        }
    }
}

/// Runs every (n, r, replication) combination; replications run in parallel
/// and results are reduced in grid order, so the table depends only on the
/// design and its seed.
pub fn run_mc<T: Scalar>(design: &McDesign<T>) -> Result<McTable<T>> {
    design.validate()?;
    let names = design.param_names();
    let full_names = design.spec.theta.param_names();
    let truth_all = design.spec.theta.to_vec();
    let truth: Vec<T> = names
        .iter()
        .map(|name| truth_all[full_names.iter().position(|f| f == name).expect("known parameter")])
        .collect();

    let jobs: Vec<(usize, T, usize)> = design
        .sample_sizes
        .iter()
        .flat_map(|&n| design.r_grid.iter().flat_map(move |&r| (0..design.reps).map(move |rep| (n, r, rep))))
        .collect();
    let outcomes: Vec<Outcome<T>> =
        jobs.par_iter().map(|&(n, r, rep)| replicate(design, n, r, rep, &names)).collect();

    let mut cells = Vec::new();
    for (chunk, jobs) in outcomes.chunks(design.reps).zip(jobs.chunks(design.reps)) {
        let (n, r, _) = jobs[0];
        let mut thetas: Vec<Vec<T>> = vec![Vec::new(); names.len()];
        let mut rs = Vec::new();
        let (mut converged, mut failed) = (0, 0);
        for o in chunk {
            match o {
                Outcome::Converged { theta, r_hat } => {
                    converged += 1;
                    for (col, v) in thetas.iter_mut().zip(theta) {
                        col.push(*v);
                    }
                    if let Some(rh) = r_hat {
                        rs.push(*rh);
                    }
                }
                Outcome::NotConverged => {}
                Outcome::Failed => failed += 1,
            }
        }
        cells.push(McCell {
            n,
            r,
            reps: design.reps,
            converged,
            failed,
            params: truth.iter().zip(&thetas).map(|(&t, xs)| stat(t, xs)).collect(),
            r_hat: design.fit.fit_copula.then(|| stat(r, &rs)),
        });
    }
    Ok(McTable { param_names: names, cells })
}

impl<T: Scalar> McTable<T> {
    pub fn cell(&self, n: usize, r: T) -> Option<&McCell<T>> {
        self.cells.iter().find(|c| c.n == n && (c.r - r).abs() < T::c(1e-12))
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|p| p == name)
    }

    /// Wide CSV: one row per cell, avg/sd/mse columns per parameter and for r̂.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,r,reps,converged,failed");
        for name in self.param_names.iter().map(String::as_str).chain(std::iter::once("r_hat")) {
            let _ = write!(s, ",{name}.avg,{name}.sd,{name}.mse");
        }
        s.push('\n');
        for c in &self.cells {
            let _ = write!(s, "{},{},{},{},{}", c.n, c.r, c.reps, c.converged, c.failed);
            for st in &c.params {
                let _ = write!(s, ",{},{},{}", st.avg, st.sd, st.mse);
            }
            match &c.r_hat {
                Some(st) => {
                    let _ = write!(s, ",{},{},{}", st.avg, st.sd, st.mse);
                }
                None => s.push_str(",,,"),
            }
            s.push('\n');
        }
        s
    }
}
