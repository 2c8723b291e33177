mod common;

use common::{bip_covariate, bip_spec, gain_spec};
use mixts::bootstrap::{bootstrap_r, BootstrapConfig};
use mixts::copula::{fit_r, BipIntegration};
use mixts::estimate::{boundary_test, pair_objective, pit_sequences, FitOptions};
use mixts::harness::{emit_config, format_fit, format_series, parse_config, parse_fit, parse_series, ModelConfig};
use mixts::latent::{filter, Derivatives};
use mixts::special::norm_cdf;
use mixts::{fit, simulate, CovariateProcess, MarginalFamily, Matrix, ModelSpec, SimConfig, ThetaLinear};
use proptest::prelude::*;

fn quadrature() -> FitOptions<f64> {
    FitOptions { integration: BipIntegration::GaussLegendre { nodes: 16 }, ..FitOptions::default() }
}

#[test]
fn series_roundtrip_is_exact() {
    let spec = bip_spec(0.5);
    let sim = simulate(&spec, &SimConfig::new(1000, 12).with_covariate(bip_covariate())).unwrap();
    let back = parse_series(&format_series(&sim.frame), Some(&spec.families)).unwrap();
    assert_eq!(back, sim.frame);
    let gain = simulate(&gain_spec(-0.3), &SimConfig::new(1000, 13)).unwrap();
    let back = parse_series(&format_series(&gain.frame), Some(&[MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear]))
        .unwrap();
    assert_eq!(back, gain.frame);
}

#[test]
fn fit_file_roundtrip() {
    let spec = gain_spec(0.4);
    let sim = simulate(&spec, &SimConfig::new(800, 14)).unwrap();
    let res = fit(&spec.families, &sim.frame, &FitOptions::default()).unwrap();
    let back = parse_fit::<f64>(&format_fit(&res)).unwrap();
    assert_eq!(back.theta, res.theta_hat);
    assert_eq!(back.families, spec.families);
    assert_eq!(back.r_hat, res.r_hat);
    assert_eq!(back.aic, res.aic);
    assert_eq!(back.std_errors.get("B.2.2").copied(), res.std_error("B.2.2"));
    assert!(back.converged);
}

fn arbitrary_config() -> impl Strategy<Value = ModelConfig<f64>> {
    (prop::collection::vec(-5.0f64..5.0, 2 + 4 + 2 + 2), -0.95f64..0.95, 0usize..1000, prop::bool::ANY).prop_map(
        |(v, r, burn_in, ar)| {
            let theta = ThetaLinear::new(
                vec![v[0], v[1]],
                Matrix::from_vec(2, 2, v[2..6].to_vec()),
                Matrix::from_vec(2, 2, vec![v[6], 0.0, 0.0, v[7]]),
                Matrix::from_vec(2, 1, v[8..10].to_vec()),
            )
            .unwrap();
            let spec = ModelSpec::bivariate([MarginalFamily::PoissonLog, MarginalFamily::BernoulliLogit], theta, r)
                .unwrap();
            let mut cfg = ModelConfig::new(spec);
            cfg.burn_in = burn_in;
            if ar {
                cfg.covariate = CovariateProcess::Ar1 { phi: v[0] / 6.0, sigma: v[1].abs() };
            }
            cfg
        },
    )
}

proptest! {
    #[test]
    fn config_roundtrip(cfg in arbitrary_config()) {
        let once: ModelConfig<f64> = parse_config(&emit_config(&cfg)).unwrap();
        prop_assert_eq!(&once, &cfg);
        let twice: ModelConfig<f64> = parse_config(&emit_config(&once)).unwrap();
        prop_assert_eq!(twice.spec, cfg.spec);
    }
}

#[test]
fn degenerate_dynamics_have_closed_form_marginals() {
    let n = 4000;
    let theta = ThetaLinear::new(vec![2.0, 3.0], Matrix::zeros(2, 2), Matrix::zeros(2, 2), Matrix::zeros(2, 0)).unwrap();
    let spec = ModelSpec::bivariate([MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear], theta, 0.6).unwrap();
    let sim = simulate(&spec, &SimConfig::new(n, 21)).unwrap();

    // Kolmogorov-Smirnov against N(0, 2); 1% critical value 1.628/√n.
    let mut y: Vec<f64> = sim.frame.y.column(0);
    y.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = norm_cdf(v / 2.0f64.sqrt());
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / (n as f64).sqrt(), "KS {ks}");

    // Chi-square against Poisson(3) on cells 0..=7 and 8+; 1% critical value for 8 df.
    let counts = sim.frame.y.column(1);
    let fam = MarginalFamily::PoissonLinear;
    let mut chi2 = 0.0;
    for cell in 0..=8 {
        let observed = counts.iter().filter(|&&c| if cell < 8 { c == cell as f64 } else { c >= 8.0 }).count() as f64;
        let p = if cell < 8 { fam.pmf(3.0, cell as f64).unwrap() } else { 1.0 - fam.cdf(3.0, 7.0).unwrap() };
        chi2 += (observed - n as f64 * p).powi(2) / (n as f64 * p);
    }
    assert!(chi2 < 20.09, "chi-square {chi2}");
}

#[test]
fn scores_are_martingale_differences() {
    let spec = gain_spec(0.5);
    let n = 5000;
    let sim = simulate(&spec, &SimConfig::new(n, 22)).unwrap();
    for (i, fam) in spec.families.iter().enumerate() {
        let scores: Vec<f64> =
            (0..n).map(|t| fam.contrast_terms(sim.latent[(t, i)], sim.frame.y[(t, i)]).1).collect();
        let mean = scores.iter().sum::<f64>() / n as f64;
        let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() <= 4.0 * sd / (n as f64).sqrt(), "coordinate {}: {mean} (sd {sd})", i + 1);
    }
}

#[test]
fn copula_fit_has_no_hidden_state() {
    let spec = bip_spec(0.6);
    let sim = simulate(&spec, &SimConfig::new(600, 23).with_covariate(bip_covariate())).unwrap();
    let options = FitOptions { mc_seed: 5, ..quadrature() };
    let res = fit(&spec.families, &sim.frame, &options).unwrap();
    let model = res.model().unwrap();
    let path = filter(&res.theta_hat, &model, &sim.frame, &res.diagnostics.lambda0, Derivatives::None).unwrap();
    let lam = path.lambda_matrix();
    let pits: Vec<_> = (0..2)
        .map(|i| pit_sequences(spec.families[i], &lam.column(i), &sim.frame.y.column(i)).unwrap())
        .collect();
    let obj = pair_objective(&spec.families, &pits, options.integration, options.mc_seed).unwrap();
    let again = fit_r(&obj, &options.r_options).unwrap();
    assert!((again.r_hat - res.r_hat.unwrap()).abs() < 1e-10);
}

#[test]
fn monte_carlo_integration_agrees_with_quadrature() {
    let spec = bip_spec(-0.5);
    let sim = simulate(&spec, &SimConfig::new(500, 24).with_covariate(bip_covariate())).unwrap();
    let mc_options = FitOptions { integration: BipIntegration::MonteCarlo { draws: 2000 }, ..FitOptions::default() };
    let mc = fit(&spec.families, &sim.frame, &mc_options).unwrap();
    let gl = fit(&spec.families, &sim.frame, &quadrature()).unwrap();
    let (a, b) = (mc.r_hat.unwrap(), gl.r_hat.unwrap());
    assert!((a - b).abs() < 0.02, "{a} vs {b}");
    assert!(mc.diagnostics.r_mc_se.unwrap() > 0.0);
}

/// Binary state with an integer-valued rate and a slowly varying covariate.
#[test]
fn binary_count_fixture_with_covariate() {
    let theta = ThetaLinear::new(
        vec![-1.2, 1.44],
        Matrix::from_f64_rows(&[&[0.5, 0.05], &[0.1, 0.5]]),
        Matrix::from_f64_rows(&[&[0.3, 0.0], &[0.0, 0.2]]),
        Matrix::from_f64_rows(&[&[0.2], &[-0.05]]),
    )
    .unwrap();
    let spec =
        ModelSpec::bivariate([MarginalFamily::BernoulliLogit, MarginalFamily::PoissonLog], theta, 0.35).unwrap();
    let covariate = CovariateProcess::Ar1 { phi: 0.9, sigma: 0.3 };
    let sim = simulate(&spec, &SimConfig::new(1024, 25).with_covariate(covariate.clone())).unwrap();
    let res = fit(&spec.families, &sim.frame, &quadrature()).unwrap();
    assert!(res.all_converged());
    assert!(res.aic.unwrap().is_finite());
    assert!(res.std_errors.as_ref().unwrap().iter().all(|s| s.is_finite() && *s > 0.0));

    let restricted_options = FitOptions {
        pinned: vec![("Gamma.1.1".into(), 0.0), ("Gamma.2.1".into(), 0.0)],
        ..quadrature()
    };
    let restricted = fit(&spec.families, &sim.frame, &restricted_options).unwrap();
    assert!(restricted.aic.unwrap().is_finite());
    assert_eq!(restricted.theta_hat.gamma[(0, 0)], 0.0);
    assert_eq!(restricted.std_error("Gamma.1.1"), Some(0.0));

    let config = BootstrapConfig { covariate, fit: quadrature(), ..BootstrapConfig::new(10, 1024, 3) };
    let boot = bootstrap_r(&res, &config).unwrap();
    assert_eq!(boot.b, 10);
    assert!(boot.se > 0.0 && boot.se < 0.2);
}

/// Returns driving a count with no feedback from counts to volatility.
#[test]
fn return_count_fixture_with_boundary_test() {
    let theta = ThetaLinear::new(
        vec![0.05, 0.5],
        Matrix::from_f64_rows(&[&[0.1, 0.0], &[0.8, 0.3]]),
        Matrix::from_f64_rows(&[&[0.8, 0.0], &[0.0, 0.4]]),
        Matrix::zeros(2, 0),
    )
    .unwrap();
    let spec = ModelSpec::bivariate([MarginalFamily::GaussianGarch, MarginalFamily::PoissonLinear], theta, 0.2).unwrap();
    let n = 1500;
    let sim = simulate(&spec, &SimConfig::new(n, 26)).unwrap();
    let res = fit(&spec.families, &sim.frame, &FitOptions::<f64>::default()).unwrap();
    assert!(res.all_converged());
    assert!(res.aic.unwrap().is_finite());
    let alpha = 0.05;
    let strong = boundary_test(res.theta_hat.a[(1, 0)], res.asymptotic_variance("A.2.1").unwrap(), n - 1, alpha).unwrap();
    assert!(strong.reject, "{strong:?}");
    let boot = bootstrap_r(&res, &BootstrapConfig::new(10, n, 4)).unwrap();
    assert!(boot.r_stars.windows(2).all(|w| w[0] <= w[1]));
    assert!(boot.se > 0.0 && boot.se < 0.2);
}

#[test]
fn bootstrap_se_tracks_replication_spread() {
    use mixts::harness::{run_mc, McDesign};
    let spec = gain_spec(0.3);
    let design = McDesign {
        spec: spec.clone(),
        covariate: CovariateProcess::None,
        burn_in: 500,
        r_grid: vec![0.3],
        sample_sizes: vec![1000],
        reps: 100,
        seed: 27,
        fit: FitOptions::default(),
    };
    let spread = run_mc(&design).unwrap().cells[0].r_hat.unwrap().sd;
    let sim = simulate(&spec, &SimConfig::new(1000, 28)).unwrap();
    let res = fit(&spec.families, &sim.frame, &FitOptions::default()).unwrap();
    let boot = bootstrap_r(&res, &BootstrapConfig::new(50, 1000, 29)).unwrap();
    assert_eq!(boot.dropped, 0);
    assert!(boot.se > spread / 2.0 && boot.se < spread * 2.0, "bootstrap {} vs replication sd {spread}", boot.se);
}
