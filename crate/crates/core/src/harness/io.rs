//! CSV series files and the fit-result text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::latent::ThetaLinear;
use crate::linalg::Matrix;
use crate::marginals::MarginalFamily;
use crate::model::SeriesFrame;
use crate::scalar::Scalar;

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, msg: format!("{kind:?}") },
    }
}

/// Reads a series from CSV text with header `y1..yk[,x1..xm]`.
///
/// With `families`, every response value is checked against its state space.
pub fn parse_series<T: Scalar>(text: &str, families: Option<&[MarginalFamily]>) -> Result<SeriesFrame<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_error)?.clone();
    let mut k = 0;
    let mut m = 0;
    for (pos, name) in header.iter().enumerate() {
        let expect_y = format!("y{}", k + 1);
        let expect_x = format!("x{}", m + 1);
        if m == 0 && name == expect_y {
            k += 1;
        } else if k > 0 && name == expect_x {
            m += 1;
        } else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header column {}: expected '{expect_y}' or '{expect_x}', got '{name}'", pos + 1),
            });
        }
    }
    if k == 0 {
        return Err(Error::Parse { line: 1, msg: "header has no response columns".into() });
    }
    if let Some(f) = families {
        if f.len() != k {
            return Err(Error::Parse { line: 1, msg: format!("header has {k} response columns, model has {}", f.len()) });
        }
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(n + 2, |p| p.line() as usize);
        for (col, field) in rec.iter().enumerate() {
            let name = &header[col];
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("column {name}: '{field}' is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("column {name}: non-finite value '{field}'") });
            }
            let v = T::c(v);
            if col < k {
                if let Some(f) = families {
                    f[col]
                        .check_observation(v)
                        .map_err(|e| Error::Parse { line, msg: format!("column {name}: {e}") })?;
                }
                y.push(v);
            } else {
                x.push(v);
            }
        }
        n += 1;
    }
    SeriesFrame::new(Matrix::from_vec(n, k, y), Matrix::from_vec(n, m, x))
}

pub fn read_series<T: Scalar>(path: &Path, families: Option<&[MarginalFamily]>) -> Result<SeriesFrame<T>> {
    parse_series(&std::fs::read_to_string(path)?, families)
}

/// CSV text of a series; values use shortest round-trip formatting.
pub fn format_series<T: Scalar>(frame: &SeriesFrame<T>) -> String {
    let (k, m) = (frame.k(), frame.m());
    let mut s = String::new();
    let names: Vec<String> =
        (1..=k).map(|i| format!("y{i}")).chain((1..=m).map(|l| format!("x{l}"))).collect();
    s.push_str(&names.join(","));
    s.push('\n');
    for t in 0..frame.n() {
        let row: Vec<String> = frame
            .y
            .row(t)
            .iter()
            .chain(frame.x.row(t))
            .map(|v| v.to_f64_lossy().to_string())
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_series<T: Scalar>(frame: &SeriesFrame<T>, path: &Path) -> Result<()> {
    std::fs::write(path, format_series(frame))?;
    Ok(())
}

/// CSV of a latent path with header `lambda1..lambdak`.
pub fn format_latent<T: Scalar>(lambda: &Matrix<T>) -> String {
    let mut s = (1..=lambda.cols()).map(|i| format!("lambda{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for t in 0..lambda.rows() {
        let row: Vec<String> = lambda.row(t).iter().map(|v| v.to_f64_lossy().to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Fit output as `key = value` lines.
pub fn format_fit<T: Scalar>(fit: &FitResult<T>) -> String {
    let th = &fit.theta_hat;
    let mut s = String::new();
    let fams: Vec<&str> = fit.families.iter().map(|f| f.name()).collect();
    let _ = writeln!(s, "families = {}", fams.join(", "));
    let _ = writeln!(s, "k = {}", th.k());
    let _ = writeln!(s, "m = {}", th.m());
    let _ = writeln!(s, "n_eff = {}", fit.diagnostics.n_eff);
    let _ = writeln!(s, "converged = {}", fit.all_converged());
    for (name, v) in th.param_names().iter().zip(th.to_vec()) {
        let _ = writeln!(s, "theta.{name} = {v}");
    }
    if let Some(se) = &fit.std_errors {
        for (name, v) in fit.param_names.iter().zip(se) {
            let _ = writeln!(s, "se.{name} = {v}");
        }
    }
    for (i, v) in fit.per_equation_objective.iter().enumerate() {
        let _ = writeln!(s, "objective.{} = {v}", i + 1);
    }
    let opt = |s: &mut String, key: &str, v: Option<T>| {
        if let Some(v) = v {
            let _ = writeln!(s, "{key} = {v}");
        }
    };
    opt(&mut s, "r_hat", fit.r_hat);
    opt(&mut s, "loglik", fit.loglik);
    opt(&mut s, "aic", fit.aic);
    opt(&mut s, "r_boot_se", fit.r_boot_se);
    if let Some(b) = fit.bootstrap_b {
        let _ = writeln!(s, "bootstrap.B = {b}");
    }
    for note in &fit.diagnostics.notes {
        let _ = writeln!(s, "# {note}");
    }
    s
}

/// The parts of a fit file needed to rebuild or compare a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary<T> {
    pub families: Vec<MarginalFamily>,
    pub theta: ThetaLinear<T>,
    pub converged: bool,
    pub std_errors: BTreeMap<String, T>,
    pub r_hat: Option<T>,
    pub loglik: Option<T>,
    pub aic: Option<T>,
    pub r_boot_se: Option<T>,
    pub bootstrap_b: Option<usize>,
}

pub fn parse_fit<T: Scalar>(text: &str) -> Result<FitSummary<T>> {
    let mut kv = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("expected 'key = value', got '{content}'") })?;
        kv.insert(k.trim().to_string(), (idx + 1, v.trim().to_string()));
    }
    let get = |key: &str| kv.get(key).ok_or_else(|| Error::Input(format!("fit file: missing key '{key}'")));
    let num = |key: &str| -> Result<Option<T>> {
        kv.get(key)
            .map(|(line, v)| {
                v.parse::<f64>()
                    .map(T::c)
                    .map_err(|_| Error::Parse { line: *line, msg: format!("{key}: '{v}' is not a number") })
            })
            .transpose()
    };
    let count = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse().map_err(|_| Error::Parse { line: *line, msg: format!("{key}: '{v}' is not a count") })
    };
    let k = count("k")?;
    let m = count("m")?;
    let (fline, fams) = get("families")?;
    let families = fams
        .split(',')
        .map(|f| f.parse().map_err(|e: Error| Error::Parse { line: *fline, msg: e.to_string() }))
        .collect::<Result<Vec<MarginalFamily>>>()?;
    if families.len() != k {
        return Err(Error::Parse { line: *fline, msg: format!("{} families for k = {k}", families.len()) });
    }
    let names = ThetaLinear::<T>::zeros(k, m).param_names();
    let mut values = Vec::with_capacity(names.len());
    for name in &names {
        let key = format!("theta.{name}");
        values.push(num(&key)?.ok_or_else(|| Error::Input(format!("fit file: missing key '{key}'")))?);
    }
    let theta = ThetaLinear::from_vec(k, m, &values)?;
    let mut std_errors = BTreeMap::new();
    for key in kv.keys().filter_map(|key| key.strip_prefix("se.")) {
        if let Some(v) = num(&format!("se.{key}"))? {
            std_errors.insert(key.to_string(), v);
        }
    }
    let bootstrap_b = match kv.contains_key("bootstrap.B") {
        true => Some(count("bootstrap.B")?),
        false => None,
    };
    Ok(FitSummary {
        families,
        theta,
        converged: kv.get("converged").is_some_and(|(_, v)| v == "true"),
        std_errors,
        r_hat: num("r_hat")?,
        loglik: num("loglik")?,
        aic: num("aic")?,
        r_boot_se: num("r_boot_se")?,
        bootstrap_b,
    })
}
