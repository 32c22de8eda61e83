//! Command-line front end: fit real data, generate simulated samples, run
//! Monte Carlo studies, and emit plot-ready band tables.

use crate::additive::fit_additive;
use crate::config::{FitFileConfig, SimFileConfig};
use crate::density::marginal_kde;
use crate::error::Result;
use crate::inference::{convergence_rate, normal_ci, sigma_plugin, InferencePieces};
use crate::io;
use crate::kernels::ProductKernel;
use crate::regression::{fit_surface, FSource, FitDiagnostics, GSource, SurfaceSpec};
use crate::simulate::{generate, reproduce_figure, run_study};
use crate::survival::StepSurvival;
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "censadd",
    version,
    about = "Additive regression under right-censoring: IPCW kernel fits, \
             confidence bands, and seeded simulation studies"
)]
struct Cli {
    /// Worker threads (falls back to the CENSADD_THREADS variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a censored data file and write per-axis confidence bands.
    Fit {
        /// CSV with header z,delta,x1,...,xd.
        #[arg(long)]
        data: PathBuf,
        /// JSON fit configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Generate one sample from a configured data-generating process.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Sample size override.
        #[arg(long)]
        n: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run a replicated Monte Carlo study of the component estimator.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        /// Replicate count override.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// One full benchmark fit with truth, estimates and 95% bands per axis.
    #[command(name = "reproduce-figure")]
    ReproduceFigure {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

/// Parses arguments, dispatches, and maps errors onto the exit-code
/// contract: 0 success (possibly with warnings), 1 validation error,
/// 2 numerical failure.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    let result = match cli.command {
        Command::Fit {
            data,
            config,
            out_dir,
        } => cmd_fit(&data, &config, &out_dir),
        Command::Simulate {
            config,
            n,
            seed,
            out_dir,
        } => cmd_simulate(&config, n, seed, &out_dir),
        Command::Study {
            config,
            n,
            replicates,
            seed,
            out_dir,
        } => cmd_study(&config, n, replicates, seed, &out_dir),
        Command::ReproduceFigure { n, seed, out_dir } => cmd_reproduce_figure(n, seed, &out_dir),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads(cli_threads: Option<usize>) {
    let threads = cli_threads.or_else(|| {
        std::env::var("CENSADD_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t > 0 {
            // ignore the error when a pool already exists (tests, repeat calls)
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
    }
}

/// Bandwidths and inference constants recorded with every fit.
#[derive(Debug, Clone, Serialize)]
pub struct BandwidthReport {
    pub regression: f64,
    pub density: f64,
    pub c_effective: f64,
    pub k: usize,
    pub z: f64,
    pub undersmoothed: bool,
}

/// Fit metadata emitted as `fit.json` and through the C interface.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub d: usize,
    pub bandwidths: BandwidthReport,
    pub constant: f64,
    pub diagnostics: FitDiagnostics,
    pub warnings: Vec<String>,
    pub inference: Vec<InferencePieces>,
    pub censoring_survival: Option<StepSurvival>,
}

/// The full fit pipeline shared by the CLI and the C interface: IPCW surface,
/// marginal integration, variance plug-in and confidence intervals.
pub fn fit_bands(
    sample: &crate::survival::CensoredSample,
    cfg: &FitFileConfig,
) -> Result<(crate::additive::AdditiveFit, FitReport)> {
    let n = sample.n();
    let d = sample.dim();
    let plan = cfg.resolve(n, d)?;

    let spec = SurfaceSpec {
        kernels: vec![plan.reg_kernel.clone(); d],
        bandwidths: vec![plan.reg_bandwidth; d],
        psi: plan.psi.clone(),
        g_source: GSource::KaplanMeier,
        f_source: FSource::Kde {
            kernel: ProductKernel::isotropic(plan.density_kernel.clone(), d),
            bandwidth: plan.density_bandwidth,
            floor: plan.density_floor,
        },
    };
    let mut surface = fit_surface(sample, &spec)?;
    surface.set_undersmoothed(plan.undersmooth);

    let mut fit = fit_additive(&surface, &plan.q, &plan.domain, &plan.quad)?;
    let mut warnings = surface.diagnostics().warnings.clone();
    if plan.q.iter().any(|q| !q.is_smooth()) {
        warnings.push(
            "integrating density is not smooth at its support edges; the component bias \
             expansion is heuristic here"
                .into(),
        );
    }
    if !plan.undersmooth {
        warnings.push(
            "bandwidth not undersmoothed: confidence intervals carry first-order bias".into(),
        );
    }
    let f_model = surface.density_model().expect("kde-backed fit");
    let k = surface.kernel_order();
    let mut inference = Vec::with_capacity(d);
    for ell in 0..d {
        let grid = plan.domain.grid(ell).to_vec();
        let f_axis = marginal_kde(
            sample.x_col(ell).to_vec(),
            plan.density_kernel.clone(),
            f_model.bandwidth(),
        )?;
        let est = sigma_plugin(&surface, f_model, &f_axis, &plan.q, ell, &grid, &plan.quad)?;
        if est.floored_nodes > 0 {
            warnings.push(format!(
                "axis {}: joint density fell below the floor at {} quadrature nodes of the \
                 variance plug-in",
                ell + 1,
                est.floored_nodes
            ));
        }
        let eta = fit.components[ell].eta.clone();
        let (lo, hi) = normal_ci(&eta, &est.values, n, k, plan.z);
        inference.push(InferencePieces {
            axis: ell,
            grid,
            bias: None,
            sigma: est.values.clone(),
            rate: convergence_rate(n, k),
            z: plan.z,
        });
        fit.set_inference(ell, est.values, lo, hi);
    }

    let report = FitReport {
        n,
        d,
        bandwidths: BandwidthReport {
            regression: plan.reg_bandwidth,
            density: plan.density_bandwidth,
            c_effective: plan.c_effective,
            k,
            z: plan.z,
            undersmoothed: plan.undersmooth,
        },
        constant: fit.constant,
        diagnostics: surface.diagnostics().clone(),
        warnings,
        inference,
        censoring_survival: surface.fitted_censoring_survival().cloned(),
    };
    Ok((fit, report))
}

pub fn cmd_fit(data: &Path, config: &Path, out_dir: &Path) -> Result<()> {
    let sample = io::read_data_csv(data)?;
    let cfg = FitFileConfig::load(config)?;
    let (fit, report) = fit_bands(&sample, &cfg)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_bands_csv(&out_dir.join("bands.csv"), &fit)?;
    io::write_json(&out_dir.join("fit.json"), &report)?;
    println!(
        "fit: n = {}, d = {}, uncensored fraction = {:.4}",
        report.n, report.d, report.diagnostics.uncensored_rate
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

pub fn cmd_simulate(
    config: &Path,
    n: Option<usize>,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<()> {
    let cfg = SimFileConfig::load(config)?;
    let n = n.unwrap_or(cfg.n);
    let seed = seed.unwrap_or(cfg.seed);
    let dgp = cfg.dgp.to_spec(cfg.psi.to_spec(), seed)?;
    let sample = generate(&dgp, n)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_sample_csv(&out_dir.join("sample.csv"), &sample)?;
    println!(
        "simulate: n = {n}, seed = {seed}, empirical uncensored fraction (delta=1) = {:.4}, \
         censored fraction (delta=0) = {:.4}",
        sample.uncensored_rate(),
        1.0 - sample.uncensored_rate()
    );
    Ok(())
}

pub fn cmd_study(
    config: &Path,
    n: Option<usize>,
    replicates: Option<usize>,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<()> {
    let cfg = SimFileConfig::load(config)?;
    let n = n.unwrap_or(cfg.n);
    let seed = seed.unwrap_or(cfg.seed);
    let dgp = cfg.dgp.to_spec(cfg.psi.to_spec(), seed)?;
    let opts = cfg.study_options(replicates)?;
    let result = run_study(&dgp, n, &opts)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_json(&out_dir.join("study.json"), &result)?;
    io::write_replicates_csv(&out_dir.join("replicates.csv"), &result)?;
    println!(
        "study: n = {n}, replicates = {}, mean uncensored fraction = {:.4}",
        result.replicates, result.mean_uncensored_rate
    );
    for p in &result.probes {
        let mut line = format!(
            "probe axis {} at x = {}: eta_true = {:.6}, mean estimate = {:.6}, rescaled mse = {:.4}",
            p.axis + 1,
            p.x,
            p.eta_true,
            p.mean_eta_hat,
            p.rescaled_mse
        );
        if let (Some(m), Some(v)) = (p.mean_stat, p.var_stat) {
            line.push_str(&format!(", stat mean = {m:.4}, stat var = {v:.4}"));
        }
        if let Some(ks) = p.ks_distance {
            line.push_str(&format!(", ks = {ks:.4}"));
        }
        if let Some(cov) = p.coverage {
            line.push_str(&format!(", coverage = {cov:.4}"));
        }
        println!("{line}");
    }
    Ok(())
}

pub fn cmd_reproduce_figure(n: usize, seed: u64, out_dir: &Path) -> Result<()> {
    let out = reproduce_figure(n, seed)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_bands_csv(&out_dir.join("bands.csv"), &out.fit)?;
    io::write_json(&out_dir.join("fit.json"), &out)?;
    println!(
        "reproduce-figure: n = {n}, seed = {seed}, empirical uncensored fraction (delta=1) \
         = {:.4}",
        out.uncensored_rate
    );
    Ok(())
}
