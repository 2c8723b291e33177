//! Flat `key = value` configuration shared by simulate, check, fit and mc.
//!
//! ```text
//! # GAIN design
//! k = 2
//! m = 0
//! family.1 = gaussian_garch
//! family.2 = poisson_linear
//! d.1 = 0.03
//! A.1.1 = 0.05
//! B.1.1 = 0.7
//! r = 0.3
//! ```
//!
//! Unlisted coefficients default to zero. Indices are 1-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::copula::BipIntegration;
use crate::error::{Error, Result};
use crate::latent::ThetaLinear;
use crate::linalg::Matrix;
use crate::marginals::MarginalFamily;
use crate::model::ModelSpec;
use crate::scalar::Scalar;
use crate::simulate::CovariateProcess;

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings<T> {
    pub r_grid: Vec<T>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub spec: ModelSpec<T>,
    pub covariate: CovariateProcess<T>,
    pub burn_in: usize,
    pub moment_order: T,
    pub lambda0: Option<Vec<T>>,
    pub integration: BipIntegration,
    pub mc_seed: u64,
    pub mc: Option<McSettings<T>>,
}

impl<T: Scalar> ModelConfig<T> {
    pub fn new(spec: ModelSpec<T>) -> Self {
        Self {
            spec,
            covariate: CovariateProcess::None,
            burn_in: 500,
            moment_order: T::c(2.0),
            lambda0: None,
            integration: BipIntegration::default(),
            mc_seed: 0,
            mc: None,
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn number<T: Scalar>(&mut self, key: &str) -> Result<Option<T>> {
        self.take(key)
            .map(|e| parse_real(&e.value).map_err(|msg| Error::Parse { line: e.line, msg: format!("{key}: {msg}") }))
            .transpose()
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|e| {
                e.value.parse::<usize>().map_err(|_| Error::Parse {
                    line: e.line,
                    msg: format!("{key}: expected a nonnegative integer, got '{}'", e.value),
                })
            })
            .transpose()
    }
}

fn parse_real<T: Scalar>(s: &str) -> std::result::Result<T, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value '{s}'"));
    }
    Ok(T::c(v))
}

fn parse_list<T, F>(e: &Entry, key: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> std::result::Result<T, String>,
{
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).map_err(|msg| Error::Parse { line: e.line, msg: format!("{key}: {msg}") }))
        .collect()
}

/// Parses a configuration text.
pub fn parse_config<T: Scalar>(text: &str) -> Result<ModelConfig<T>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected 'key = value', got '{content}'") })?;
        let key = key.trim().to_string();
        if map.contains_key(&key) {
            return Err(Error::Parse { line, msg: format!("duplicate key '{key}'") });
        }
        map.insert(key, Entry { line, value: value.trim().to_string() });
    }
    let mut e = Entries { map };

    let k = e.count("k")?.ok_or_else(|| Error::Input("config: missing key 'k'".into()))?;
    if k == 0 {
        return Err(Error::Input("config: k must be >= 1".into()));
    }
    let m = e.count("m")?.unwrap_or(0);
    let mut families = Vec::with_capacity(k);
    for i in 1..=k {
        let key = format!("family.{i}");
        let entry = e.take(&key).ok_or_else(|| Error::Input(format!("config: missing key '{key}'")))?;
        let fam: MarginalFamily = entry
            .value
            .parse()
            .map_err(|err: Error| Error::Parse { line: entry.line, msg: err.to_string() })?;
        families.push(fam);
    }
    let mut theta = ThetaLinear::zeros(k, m);
    for i in 0..k {
        if let Some(v) = e.number(&format!("d.{}", i + 1))? {
            theta.d[i] = v;
        }
        for j in 0..k {
            if let Some(v) = e.number(&format!("A.{}.{}", i + 1, j + 1))? {
                theta.a[(i, j)] = v;
            }
            if let Some(v) = e.number(&format!("B.{}.{}", i + 1, j + 1))? {
                theta.b[(i, j)] = v;
            }
        }
        for l in 0..m {
            if let Some(v) = e.number(&format!("Gamma.{}.{}", i + 1, l + 1))? {
                theta.gamma[(i, l)] = v;
            }
        }
    }
    let mut corr = Matrix::identity(k);
    if let Some(entry) = e.take("r") {
        if k != 2 {
            return Err(Error::Parse { line: entry.line, msg: "'r' is only valid for k = 2; use R.i.j".into() });
        }
        let r: T = parse_real(&entry.value).map_err(|msg| Error::Parse { line: entry.line, msg })?;
        corr[(0, 1)] = r;
        corr[(1, 0)] = r;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if let Some(v) = e.number(&format!("R.{}.{}", i + 1, j + 1))? {
                corr[(i, j)] = v;
                corr[(j, i)] = v;
            }
        }
    }
    let spec = ModelSpec::new(families, theta, corr)?;

    let covariate = match e.take("covariate") {
        None => CovariateProcess::None,
        Some(entry) => match entry.value.as_str() {
            "none" => CovariateProcess::None,
            "ar1" => CovariateProcess::Ar1 {
                phi: e.number("covariate.phi")?.unwrap_or(T::zero()),
                sigma: e.number("covariate.sigma")?.unwrap_or(T::one()),
            },
            other => {
                return Err(Error::Parse {
                    line: entry.line,
                    msg: format!("covariate: expected 'none' or 'ar1', got '{other}'"),
                })
            }
        },
    };
    if let CovariateProcess::Ar1 { phi, sigma } = &covariate {
        if !(phi.abs() < T::one()) || !(*sigma >= T::zero()) {
            return Err(Error::Input("config: ar1 needs |phi| < 1 and sigma >= 0".into()));
        }
    }
    let burn_in = e.count("burn_in")?.unwrap_or(500);
    let moment_order = e.number("moment_order")?.unwrap_or(T::c(2.0));
    if !(moment_order >= T::one()) {
        return Err(Error::Input("config: moment_order must be >= 1".into()));
    }
    let mut lambda0 = Vec::new();
    for i in 1..=k {
        if let Some(v) = e.number(&format!("lambda0.{i}"))? {
            lambda0.push(v);
        }
    }
    let lambda0 = match lambda0.len() {
        0 => None,
        n if n == k => Some(lambda0),
        _ => return Err(Error::Input("config: give lambda0.i for every coordinate or none".into())),
    };
    let mc_draws = e.count("fit.mc_draws")?.unwrap_or(10_000);
    let quad_nodes = e.count("fit.quad_nodes")?.unwrap_or(16);
    let integration = match e.take("fit.integration") {
        None => BipIntegration::MonteCarlo { draws: mc_draws },
        Some(entry) => match entry.value.as_str() {
            "mc" => BipIntegration::MonteCarlo { draws: mc_draws },
            "quadrature" => BipIntegration::GaussLegendre { nodes: quad_nodes },
            other => {
                return Err(Error::Parse {
                    line: entry.line,
                    msg: format!("fit.integration: expected 'mc' or 'quadrature', got '{other}'"),
                })
            }
        },
    };
    if matches!(integration, BipIntegration::MonteCarlo { draws: 0 } | BipIntegration::GaussLegendre { nodes: 0 }) {
        return Err(Error::Input("config: integration needs at least one draw/node".into()));
    }
    let mc_seed = e.count("fit.mc_seed")?.unwrap_or(0) as u64;

    let mc = if let Some(entry) = e.take("mc.r_grid") {
        let r_grid: Vec<T> = parse_list(&entry, "mc.r_grid", parse_real)?;
        if r_grid.iter().any(|r| !(r.abs() < T::one())) {
            return Err(Error::Parse { line: entry.line, msg: "mc.r_grid values must lie in (-1, 1)".into() });
        }
        let sizes = match e.take("mc.sample_sizes") {
            Some(s) => parse_list(&s, "mc.sample_sizes", |v| {
                v.parse::<usize>().map_err(|_| format!("expected a count, got '{v}'"))
            })?,
            None => vec![500, 1000],
        };
        Some(McSettings {
            r_grid,
            sample_sizes: sizes,
            reps: e.count("mc.reps")?.unwrap_or(500),
            seed: e.count("mc.seed")?.unwrap_or(0) as u64,
        })
    } else {
        None
    };

    if let Some((key, entry)) = e.map.iter().next() {
        return Err(Error::Parse { line: entry.line, msg: format!("unknown key '{key}'") });
    }
    Ok(ModelConfig { spec, covariate, burn_in, moment_order, lambda0, integration, mc_seed, mc })
}

/// Emits a configuration that [`parse_config`] reads back unchanged.
pub fn emit_config<T: Scalar>(cfg: &ModelConfig<T>) -> String {
    let spec = &cfg.spec;
    let (k, m) = (spec.k(), spec.m());
    let th = &spec.theta;
    let mut s = String::new();
    let _ = writeln!(s, "k = {k}");
    let _ = writeln!(s, "m = {m}");
    for (i, f) in spec.families.iter().enumerate() {
        let _ = writeln!(s, "family.{} = {f}", i + 1);
    }
    for i in 0..k {
        let _ = writeln!(s, "d.{} = {}", i + 1, th.d[i]);
    }
    for i in 0..k {
        for j in 0..k {
            let _ = writeln!(s, "A.{}.{} = {}", i + 1, j + 1, th.a[(i, j)]);
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i == j || th.b[(i, j)] != T::zero() {
                let _ = writeln!(s, "B.{}.{} = {}", i + 1, j + 1, th.b[(i, j)]);
            }
        }
    }
    for i in 0..k {
        for l in 0..m {
            let _ = writeln!(s, "Gamma.{}.{} = {}", i + 1, l + 1, th.gamma[(i, l)]);
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let _ = writeln!(s, "R.{}.{} = {}", i + 1, j + 1, spec.correlation[(i, j)]);
        }
    }
    match &cfg.covariate {
        CovariateProcess::Ar1 { phi, sigma } => {
            let _ = writeln!(s, "covariate = ar1\ncovariate.phi = {phi}\ncovariate.sigma = {sigma}");
        }
        _ => {
            let _ = writeln!(s, "covariate = none");
        }
    }
    let _ = writeln!(s, "burn_in = {}", cfg.burn_in);
    let _ = writeln!(s, "moment_order = {}", cfg.moment_order);
    if let Some(l0) = &cfg.lambda0 {
        for (i, v) in l0.iter().enumerate() {
            let _ = writeln!(s, "lambda0.{} = {v}", i + 1);
        }
    }
    match cfg.integration {
        BipIntegration::MonteCarlo { draws } => {
            let _ = writeln!(s, "fit.integration = mc\nfit.mc_draws = {draws}");
        }
        BipIntegration::GaussLegendre { nodes } => {
            let _ = writeln!(s, "fit.integration = quadrature\nfit.quad_nodes = {nodes}");
        }
    }
    let _ = writeln!(s, "fit.mc_seed = {}", cfg.mc_seed);
    if let Some(mc) = &cfg.mc {
        let join = |v: Vec<String>| v.join(", ");
        let _ = writeln!(s, "mc.r_grid = {}", join(mc.r_grid.iter().map(|r| r.to_string()).collect()));
        let _ = writeln!(s, "mc.sample_sizes = {}", join(mc.sample_sizes.iter().map(|n| n.to_string()).collect()));
        let _ = writeln!(s, "mc.reps = {}", mc.reps);
        let _ = writeln!(s, "mc.seed = {}", mc.seed);
    }
    s
}
