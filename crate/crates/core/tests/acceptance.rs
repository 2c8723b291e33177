//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`) and exits nonzero
//! when any criterion fails.

mod common;

use std::time::Instant;

use common::{bip_covariate, bip_spec, gain_spec};
use mixts::copula::{bip_objective, gain_objective, BipIntegration};
use mixts::estimate::{boundary_test, fit, EquationObjective, FitOptions};
use mixts::harness::{run_mc, McDesign, McTable};
use mixts::marginals::LatentDomain;
use mixts::special::{chi2_quantile, norm_quantile};
use mixts::stability::{check, check_bip, spectral_radius, spectral_radius_iterative};
use mixts::{
    simulate, CovariateProcess, GaussianCopula, MarginalFamily, Matrix, ModelSpec, RngStreams, SeriesFrame,
    SimConfig,
};
use rand::Rng;

const R_GRID: [f64; 3] = [-0.9, 0.0, 0.9];

/// Published replication averages at n = 1000 for the GAIN design, in the
/// order d.1, A.1.1, A.1.2, B.1.1, d.2, A.2.1, A.2.2, B.2.2.
const GAIN_REFERENCE: [(f64, [f64; 8]); 3] = [
    (-0.9, [0.0395, 0.0514, 0.0534, 0.6593, 0.3270, 0.3088, 0.0992, 0.4703]),
    (0.0, [0.0407, 0.0523, 0.0536, 0.6532, 0.3357, 0.3096, 0.1029, 0.4578]),
    (0.9, [0.0410, 0.0530, 0.0539, 0.6510, 0.3214, 0.3016, 0.1001, 0.4777]),
];
const GAIN_NAMES: [&str; 8] = ["d.1", "A.1.1", "A.1.2", "B.1.1", "d.2", "A.2.1", "A.2.2", "B.2.2"];

/// Published replication averages at n = 1000 for the BIP design.
const BIP_REFERENCE: [(f64, [f64; 10]); 3] = [
    (-0.9, [1.0748, 0.3091, 0.3047, 0.1571, -0.1001, -1.0251, 0.4092, -0.6038, 0.1958, 0.1001]),
    (0.0, [1.0356, 0.3050, 0.3024, 0.1790, -0.1002, -0.9926, 0.3925, -0.6007, 0.1811, 0.0985]),
    (0.9, [1.0237, 0.3135, 0.2955, 0.1767, -0.1002, -0.9708, 0.3798, -0.5872, 0.1746, 0.0991]),
];
const BIP_NAMES: [&str; 10] =
    ["d.1", "A.1.1", "A.1.2", "B.1.1", "Gamma.1.1", "d.2", "A.2.1", "A.2.2", "B.2.2", "Gamma.2.1"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn mc_reproduction(
    spec: ModelSpec<f64>,
    covariate: CovariateProcess<f64>,
    reference: &[(f64, Vec<f64>)],
    names: &[&str],
    tol: f64,
    integration: BipIntegration,
) -> Verdict {
    let design = McDesign {
        spec,
        covariate,
        burn_in: 500,
        r_grid: R_GRID.to_vec(),
        sample_sizes: vec![1000],
        reps: 100,
        seed: 2024,
        fit: FitOptions { integration, ..FitOptions::default() },
    };
    let table: McTable<f64> = match run_mc(&design) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    let mut worst_r = 0.0f64;
    let mut conv = Vec::new();
    for (r, values) in reference {
        let cell = table.cell(1000, *r).expect("grid cell");
        conv.push(cell.converged);
        for (name, target) in names.iter().zip(values) {
            let avg = cell.params[table.param_index(name).expect("parameter")].avg;
            let dev = (avg - target).abs();
            pass &= dev <= tol;
            if dev > worst.0 || dev.is_nan() {
                worst = (dev, format!("{name} at r={r}: {avg:.4} vs {target:.4}"));
            }
        }
        let r_avg = cell.r_hat.map_or(f64::NAN, |s| s.avg);
        let dev = (r_avg - r).abs();
        pass &= dev <= 0.03;
        worst_r = worst_r.max(dev);
    }
    verdict(
        pass,
        format!(
            "max |avg - reference| = {:.4} ({}), tol {tol}; max |mean r_hat - r| = {worst_r:.4}, tol 0.03; converged {conv:?} of 100",
            worst.0, worst.1
        ),
    )
}

fn criterion_1() -> Verdict {
    let reference: Vec<(f64, Vec<f64>)> = GAIN_REFERENCE.iter().map(|(r, v)| (*r, v.to_vec())).collect();
    mc_reproduction(gain_spec(0.0), CovariateProcess::None, &reference, &GAIN_NAMES, 0.05, BipIntegration::default())
}

fn criterion_2() -> Verdict {
    let reference: Vec<(f64, Vec<f64>)> = BIP_REFERENCE.iter().map(|(r, v)| (*r, v.to_vec())).collect();
    mc_reproduction(
        bip_spec(0.0),
        bip_covariate(),
        &reference,
        &BIP_NAMES,
        0.07,
        BipIntegration::GaussLegendre { nodes: 16 },
    )
}

fn random_equation_params<R: Rng>(family: MarginalFamily, p: usize, m: usize, rng: &mut R) -> Vec<f64> {
    // Layout: d, Gamma row (m), A row (k), B diagonal entry.
    let mut v = Vec::with_capacity(p);
    if family.latent_domain() == LatentDomain::PositiveReal {
        v.push(rng.random_range(0.01..1.0));
        v.extend((0..p - 2).map(|_| rng.random_range(0.0..0.5)));
        v.push(rng.random_range(0.0..0.9));
    } else {
        v.push(rng.random_range(-2.0..2.0));
        v.extend((0..m).map(|_| rng.random_range(-0.5..0.5)));
        v.extend((0..p - 2 - m).map(|_| rng.random_range(-1.0..1.0)));
        v.push(rng.random_range(-0.9..0.9));
    }
    v
}

fn gradient_max_error(spec: &ModelSpec<f64>, data: &SeriesFrame<f64>, draws: usize, seed: u64) -> f64 {
    let mut rng = RngStreams::new(seed).stream("gradient");
    let ybar = data.transformed(&spec.families);
    let lambda0 = mixts::default_lambda0(&spec.families, data);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        for (i, fam) in spec.families.iter().enumerate() {
            let obj = EquationObjective::new(*fam, i, data, &ybar, lambda0[i]).unwrap();
            let p = obj.dim();
            let x = random_equation_params(*fam, p, data.m(), &mut rng);
            let mut g = vec![0.0; p];
            obj.eval(&x, Some(&mut g)).unwrap();
            let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for q in 0..p {
                let h = 1e-6 * x[q].abs().max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[q] += h;
                xm[q] -= h;
                let fd = (obj.eval(&xp, None).unwrap() - obj.eval(&xm, None).unwrap()) / (2.0 * h);
                worst = worst.max((g[q] - fd).abs() / scale);
            }
        }
    }
    worst
}

fn criterion_3() -> Verdict {
    let gain = gain_spec(0.3);
    let gain_data = simulate(&gain, &SimConfig::new(500, 31)).unwrap().frame;
    let bip = bip_spec(0.3);
    let bip_data = simulate(&bip, &SimConfig::new(500, 32).with_covariate(bip_covariate())).unwrap().frame;
    let eg = gradient_max_error(&gain, &gain_data, 50, 1);
    let eb = gradient_max_error(&bip, &bip_data, 50, 2);
    verdict(
        eg <= 1e-5 && eb <= 1e-5,
        format!("max relative gradient error GAIN {eg:.2e}, BIP {eb:.2e} over 50 draws each, tol 1e-5"),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = RngStreams::new(4).stream("quantile");
    let fams = MarginalFamily::ALL;
    let mut discrete_bad = 0;
    let mut cont_err = 0.0f64;
    for _ in 0..1000 {
        let fam = fams[rng.random_range(0..fams.len())];
        let s: f64 = match fam {
            MarginalFamily::GaussianGarch => rng.random_range(0.01..10.0),
            MarginalFamily::PoissonLinear => rng.random_range(0.01..50.0),
            MarginalFamily::PoissonLog => rng.random_range(-3.0..4.0),
            MarginalFamily::BernoulliLogit => rng.random_range(-6.0..6.0),
        };
        let u: f64 = rng.random_range(1e-9..1.0 - 1e-9);
        let q = fam.quantile(s, u).unwrap();
        if fam.is_discrete() {
            let below = if q >= 1.0 { fam.cdf(s, q - 1.0).unwrap() } else { 0.0 };
            if !(below < u && u <= fam.cdf(s, q).unwrap()) {
                discrete_bad += 1;
            }
        } else {
            cont_err = cont_err.max((fam.cdf(s, q).unwrap() - u).abs());
        }
    }
    verdict(
        discrete_bad == 0 && cont_err <= 1e-9,
        format!("discrete identity violations {discrete_bad}/1000 draws; max continuous |F(Q(u)) - u| = {cont_err:.2e}, tol 1e-9"),
    )
}

fn radius_oracle(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let tr = a + d;
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        (a * d - b * c).abs().sqrt()
    }
}

fn criterion_5() -> Verdict {
    let mut rng = RngStreams::new(5).stream("radius");
    let mut err = 0.0f64;
    let mut err_iter = 0.0f64;
    for i in 0..1000 {
        let lo = if i % 2 == 0 { -1.0 } else { 0.0 };
        let e: Vec<f64> = (0..4).map(|_| rng.random_range(lo..1.0)).collect();
        let m: Matrix<f64> = Matrix::from_f64_rows(&[&[e[0], e[1]], &[e[2], e[3]]]);
        let oracle = radius_oracle(e[0], e[1], e[2], e[3]);
        err = err.max((spectral_radius(&m).unwrap() - oracle).abs());
        if lo == 0.0 {
            err_iter = err_iter.max((spectral_radius_iterative(&m).unwrap() - oracle).abs());
        }
    }
    let gain = gain_spec(0.0);
    let rho_gain = check(&gain.theta, &gain.families, 2.0).unwrap().rho_stationarity;
    let sum = gain.theta.a.add(&gain.theta.b);
    let gain_oracle = radius_oracle(sum[(0, 0)], sum[(0, 1)], sum[(1, 0)], sum[(1, 1)]);
    let bip = bip_spec(0.0);
    // Binary-first reading: |B| + |A| diag(1/4, 1).
    let rho_bip = check_bip(&bip.theta).unwrap().rho_stationarity;
    let (a, b) = (&bip.theta.a, &bip.theta.b);
    let bip_oracle = radius_oracle(
        b[(0, 0)].abs() + a[(0, 0)].abs() / 4.0,
        b[(0, 1)].abs() + a[(0, 1)].abs(),
        b[(1, 0)].abs() + a[(1, 0)].abs() / 4.0,
        b[(1, 1)].abs() + a[(1, 1)].abs(),
    );
    let design_ok = (rho_gain - gain_oracle).abs() <= 1e-8
        && (rho_bip - bip_oracle).abs() <= 1e-8
        && (rho_gain - 0.81861).abs() <= 1e-5
        && (rho_bip - 0.84815).abs() <= 1e-5;
    verdict(
        err <= 1e-8 && err_iter <= 1e-8 && design_ok,
        format!(
            "max error {err:.1e} over 1000 matrices (iterative route on nonnegative half {err_iter:.1e}); designs GAIN {rho_gain:.6}, BIP {rho_bip:.6}"
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = RngStreams::new(6).stream("copula");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 500;
        let mut z = Vec::with_capacity(n);
        let mut zm = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            zm.push(lo);
            z.push(if hi - lo < 1e-6 { lo + 1e-6 } else { hi });
        }
        let zc: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.999)).collect();
        let zj: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
        let zjm: Vec<f64> = zj.iter().map(|v| v - 0.5).collect();
        let draws: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let exact: f64 = -z.iter().zip(&zm).map(|(a, b)| (a - b).ln()).sum::<f64>();
        let g = gain_objective(0.0, &zc, &z, &zm).unwrap().value;
        let b = bip_objective(0.0, &z, &zm, &zj, &zjm, &draws).unwrap().value;
        let tol = exact.abs().max(1.0);
        worst = worst.max((g - exact).abs() / tol).max((b - exact).abs() / tol);
    }
    let n = 100_000;
    let mut corr_dev = 0.0f64;
    for (idx, r) in [-0.9, -0.45, 0.0, 0.45, 0.9].into_iter().enumerate() {
        let cop = GaussianCopula::bivariate(r).unwrap();
        let u = cop.sample(n, &mut RngStreams::new(60 + idx as u64).stream("sampler"));
        let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|t| (norm_quantile(u[(t, 0)]), norm_quantile(u[(t, 1)]))).unzip();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for t in 0..n {
            sxy += (x[t] - mx) * (y[t] - my);
            sxx += (x[t] - mx) * (x[t] - mx);
            syy += (y[t] - my) * (y[t] - my);
        }
        corr_dev = corr_dev.max((sxy / (sxx * syy).sqrt() - r).abs());
    }
    let bound = 3.0 / (n as f64).sqrt();
    verdict(
        worst <= 1e-12 && corr_dev <= bound,
        format!("r=0 objective relative error {worst:.1e}, tol 1e-12; sampler max |corr - r| = {corr_dev:.4}, bound {bound:.4}"),
    )
}

fn criterion_7() -> Verdict {
    let spec = gain_spec(0.3);
    let reps = 200;
    let root = RngStreams::new(7);
    let options = FitOptions { fit_copula: false, ..FitOptions::default() };
    let truth = [("A.2.1", 0.3), ("B.2.2", 0.5)];
    let results: Vec<Option<[bool; 2]>> = {
        use rayon::prelude::*;
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let seed = root.derive(&format!("coverage:{rep}")).seed();
                let sim = simulate(&spec, &SimConfig::new(1000, seed)).ok()?;
                let res = fit(&spec.families, &sim.frame, &options).ok()?;
                let mut hit = [false; 2];
                for (h, (name, value)) in hit.iter_mut().zip(truth) {
                    let idx = res.param_names.iter().position(|p| p == name)?;
                    let est = res.theta_hat.to_vec()[res.theta_hat.param_names().iter().position(|p| p == name)?];
                    let se = res.std_errors.as_ref()?[idx];
                    *h = (est - value).abs() <= 1.959963984540054 * se;
                }
                Some(hit)
            })
            .collect()
    };
    let usable: Vec<[bool; 2]> = results.iter().flatten().copied().collect();
    let cov: Vec<f64> =
        (0..2).map(|j| usable.iter().filter(|h| h[j]).count() as f64 / usable.len().max(1) as f64).collect();
    verdict(
        usable.len() == reps && cov.iter().all(|c| (0.90..=0.98).contains(c)),
        format!(
            "95% interval coverage A.2.1 {:.3}, B.2.2 {:.3} over {} of {reps} fits, band [0.90, 0.98]",
            cov[0],
            cov[1],
            usable.len()
        ),
    )
}

fn criterion_8() -> Verdict {
    use statrs::function::erf::erf;
    // P(χ²₁ ≤ x) = erf(√(x/2)).
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf((mid / 2.0).sqrt()) < 0.9 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let q = chi2_quantile(0.9, 1.0);
    let threshold = boundary_test(0.1, 1.0, 100, 0.05).unwrap().threshold;
    verdict(
        (q - oracle).abs() <= 1e-4 && (q - 2.70554).abs() <= 1e-4 && threshold == q,
        format!("quantile {q:.8}, bisection {oracle:.8}, boundary threshold at alpha=0.05 {threshold:.8}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        ("GAIN Monte-Carlo reproduction", criterion_1),
        ("BIP Monte-Carlo reproduction", criterion_2),
        ("gradient vs finite differences", criterion_3),
        ("quantile identities", criterion_4),
        ("spectral radius", criterion_5),
        ("copula objective at r=0 and sampler", criterion_6),
        ("sandwich coverage", criterion_7),
        ("boundary test threshold", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{status}] {name}: {} ({:.1}s)", i + 1, v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
