use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixts::bootstrap::{bootstrap_r, BootstrapConfig};
use mixts::harness::{self, McDesign, ModelConfig};
use mixts::stability;
use mixts::{CovariateProcess, Error, FitOptions, SimConfig};

/// Simulate, check and fit mixed-type observation-driven time series.
#[derive(Parser)]
#[command(name = "mixts", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path from a model configuration and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Simulate even when the stationarity condition fails.
        #[arg(long)]
        override_stability: bool,
        /// Also write the latent path.
        #[arg(long)]
        latent_out: Option<PathBuf>,
    },
    /// Print stability and identifiability diagnostics for a configuration.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the model families of a configuration to a CSV series.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Parametric bootstrap replications for the copula correlation.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Seed of the bootstrap replications.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte-Carlo experiment and write the summary table as CSV.
    Mc {
        #[arg(long)]
        design: PathBuf,
        /// Replications per cell; overrides the design file.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ModelConfig<f64>, Error> {
    harness::parse_config(&std::fs::read_to_string(path)?)
}

fn fit_options(cfg: &ModelConfig<f64>) -> FitOptions<f64> {
    FitOptions {
        lambda0: cfg.lambda0.clone(),
        integration: cfg.integration,
        mc_seed: cfg.mc_seed,
        ..FitOptions::default()
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, n, seed, out, override_stability, latent_out } => {
            let cfg = load_config(&config)?;
            let mut sim_config = SimConfig::new(n, seed).with_covariate(cfg.covariate).with_burn_in(cfg.burn_in);
            sim_config.override_stability = override_stability;
            let sim = mixts::simulate(&cfg.spec, &sim_config)?;
            harness::write_series(&sim.frame, &out)?;
            if let Some(path) = latent_out {
                std::fs::write(path, harness::format_latent(&sim.latent))?;
            }
        }
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            let report = stability::check(&cfg.spec.theta, &cfg.spec.families, cfg.moment_order)?;
            print!("{report}");
        }
        Command::Fit { config, data, out, bootstrap, seed } => {
            let cfg = load_config(&config)?;
            let frame = harness::read_series(&data, Some(&cfg.spec.families))?;
            if frame.m() != cfg.spec.m() {
                return Err(Error::Input(format!(
                    "data has {} covariate columns, configuration has m = {}",
                    frame.m(),
                    cfg.spec.m()
                )));
            }
            let options = fit_options(&cfg);
            let mut res = mixts::fit(&cfg.spec.families, &frame, &options)?;
            if let Some(b) = bootstrap {
                let covariate = match cfg.covariate {
                    CovariateProcess::None if frame.m() > 0 => CovariateProcess::Fixed(frame.x.clone()),
                    other => other,
                };
                let boot_config =
                    BootstrapConfig { covariate, burn_in: cfg.burn_in, fit: options, ..BootstrapConfig::new(b, frame.n(), seed) };
                let boot = bootstrap_r(&res, &boot_config)?;
                res.r_boot_se = Some(boot.se);
                res.bootstrap_b = Some(boot.b);
                if boot.dropped > 0 {
                    res.diagnostics.notes.push(format!("bootstrap: {} replications dropped", boot.dropped));
                }
            }
            std::fs::write(&out, harness::format_fit(&res))?;
        }
        Command::Mc { design, reps, out } => {
            let cfg = load_config(&design)?;
            let fit = fit_options(&cfg);
            let mc = cfg.mc.ok_or_else(|| Error::Input("design file has no 'mc.r_grid' key".into()))?;
            let design = McDesign {
                spec: cfg.spec,
                covariate: cfg.covariate,
                burn_in: cfg.burn_in,
                r_grid: mc.r_grid,
                sample_sizes: mc.sample_sizes,
                reps: reps.unwrap_or(mc.reps),
                seed: mc.seed,
                fit,
            };
            let table = harness::run_mc(&design)?;
            std::fs::write(&out, table.to_csv())?;
            for c in &table.cells {
                eprintln!("n={} r={}: {} converged, {} failed of {}", c.n, c.r, c.converged, c.failed, c.reps);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
