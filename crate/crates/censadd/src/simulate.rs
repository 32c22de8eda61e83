//! Seeded data generation for censored additive regression and the Monte
//! Carlo study harness that checks the limit behaviour of the component
//! estimator: asymptotic normality of the standardized statistic, pointwise
//! interval coverage, and the rescaled mean-squared-error expansion.

use crate::additive::{
    marginal_component_with_shared, shared_constant, AdditiveOptions, EvaluationDomain,
    IntegrationDensity,
};
use crate::additive::{fit_additive, AdditiveFit};
use crate::density::{density_bandwidth, marginal_kde, DEFAULT_DENSITY_FLOOR};
use crate::error::{Error, Result};
use crate::inference::{
    bias_oracle, convergence_rate, normal_ci, sigma_from_pieces, sigma_plugin, standardized_stat,
    undersmoothed_bandwidth, SigmaPieces,
};
use crate::kernels::{Kernel1D, ProductKernel};
use crate::regression::{
    fit_surface, regression_bandwidth, FitDiagnostics, FSource, GSource, PsiSpec,
    SurfaceSpec,
};
use crate::survival::CensoredSample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Marginal law of one covariate axis.
#[derive(Debug, Clone, Copy)]
pub enum CovariateLaw {
    Uniform { a: f64, b: f64 },
}

/// How the latent response is produced from the additive truth.
#[derive(Debug, Clone, Copy)]
pub enum ResponseMechanism {
    /// `Y | X` uniform on a unit window placed so that
    /// `P(Y <= threshold | X) = sum_l m_l(X_l)`.
    IndicatorModel { threshold: f64 },
    /// `Y = offset + sum_l m_l(X_l) + noise_sd * N(0, 1)`.
    LocationModel { offset: f64, noise_sd: f64 },
}

/// Law of the censoring variable.
#[derive(Debug, Clone, Copy)]
pub enum CensoringLaw {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    None,
}

/// One true additive component with optional analytic derivatives
/// (the order-k derivative feeds the bias oracle).
#[derive(Clone)]
pub struct TrueComponent {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl TrueComponent {
    pub fn new(f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        Self {
            f,
            derivs: Vec::new(),
        }
    }

    pub fn derivative(&self, order: usize) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        if order == 0 {
            return Some(self.f.clone());
        }
        self.derivs.get(order - 1).cloned()
    }
}

/// A complete data-generating process.
#[derive(Clone)]
pub struct DgpSpec {
    pub covariates: Vec<CovariateLaw>,
    pub components: Vec<TrueComponent>,
    pub response: ResponseMechanism,
    pub censoring: CensoringLaw,
    pub psi: PsiSpec,
    pub seed: u64,
}

impl DgpSpec {
    pub fn dim(&self) -> usize {
        self.covariates.len()
    }

    /// The additive regression truth `p(x) = sum_l m_l(x_l)` (plus the
    /// location offset when applicable).
    pub fn truth(&self, x: &[f64]) -> f64 {
        let base: f64 = self
            .components
            .iter()
            .zip(x)
            .map(|(c, &xi)| (c.f)(xi))
            .sum();
        match self.response {
            ResponseMechanism::IndicatorModel { .. } => base,
            ResponseMechanism::LocationModel { offset, .. } => base + offset,
        }
    }
}

/// The benchmark scenario: two uniform covariates on `[-1, 1]`, additive
/// truth `0.5 cos^2(x1) + 0.5 sin^2(x2)`, indicator response at 0.9 and
/// uniform censoring on `(0, 1)`, which censors roughly four observations in
/// five.
pub fn reference_dgp(seed: u64) -> DgpSpec {
    let m1 = TrueComponent {
        f: Arc::new(|x: f64| 0.5 * x.cos().powi(2)),
        derivs: vec![
            Arc::new(|x: f64| -0.5 * (2.0 * x).sin()),
            Arc::new(|x: f64| -(2.0 * x).cos()),
        ],
    };
    let m2 = TrueComponent {
        f: Arc::new(|x: f64| 0.5 * x.sin().powi(2)),
        derivs: vec![
            Arc::new(|x: f64| 0.5 * (2.0 * x).sin()),
            Arc::new(|x: f64| (2.0 * x).cos()),
        ],
    };
    DgpSpec {
        covariates: vec![
            CovariateLaw::Uniform { a: -1.0, b: 1.0 },
            CovariateLaw::Uniform { a: -1.0, b: 1.0 },
        ],
        components: vec![m1, m2],
        response: ResponseMechanism::IndicatorModel { threshold: 0.9 },
        censoring: CensoringLaw::Uniform { a: 0.0, b: 1.0 },
        psi: PsiSpec::indicator(0.9),
        seed,
    }
}

/// Uniform integrating densities matching the benchmark covariate support.
pub fn reference_q() -> Vec<IntegrationDensity> {
    vec![
        IntegrationDensity::uniform(-1.0, 1.0),
        IntegrationDensity::uniform(-1.0, 1.0),
    ]
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-replicate seed derived from the master seed by a
/// counter scheme, so replicates are order- and thread-independent.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    splitmix64(master ^ splitmix64(replicate.wrapping_add(1)))
}

/// Latent draws behind one generated sample; exposed for distributional
/// oracle checks.
pub struct LatentSample {
    pub y: Vec<f64>,
    pub c: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

/// Generates a sample of size `n`; deterministic given the spec's seed.
pub fn generate(dgp: &DgpSpec, n: usize) -> Result<CensoredSample> {
    generate_with_latent(dgp, n).map(|(s, _)| s)
}

/// As [`generate`], also returning the latent response and censoring draws.
pub fn generate_with_latent(dgp: &DgpSpec, n: usize) -> Result<(CensoredSample, LatentSample)> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let d = dgp.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(dgp.seed);
    let mut x_cols = vec![Vec::with_capacity(n); d];
    let mut y_all = Vec::with_capacity(n);
    let mut c_all = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for row in 0..n {
        let mut xi = Vec::with_capacity(d);
        for (axis, law) in dgp.covariates.iter().enumerate() {
            let u: f64 = rng.random();
            let v = match law {
                CovariateLaw::Uniform { a, b } => a + (b - a) * u,
            };
            x_cols[axis].push(v);
            xi.push(v);
        }
        let location: f64 = dgp
            .components
            .iter()
            .zip(&xi)
            .map(|(c, &v)| (c.f)(v))
            .sum();
        let y = match dgp.response {
            ResponseMechanism::IndicatorModel { threshold } => {
                if location <= 0.0 || location >= 1.0 {
                    return Err(Error::ProbabilityOutOfRange { row, p: location });
                }
                let u: f64 = rng.random();
                threshold - location + u
            }
            ResponseMechanism::LocationModel { offset, noise_sd } => {
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                let normal =
                    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                offset + location + noise_sd * normal
            }
        };
        let c = match dgp.censoring {
            CensoringLaw::Uniform { a, b } => {
                let u: f64 = rng.random();
                a + (b - a) * u
            }
            CensoringLaw::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            CensoringLaw::None => f64::INFINITY,
        };
        y_all.push(y);
        c_all.push(c);
        if y <= c {
            z.push(y);
            delta.push(1u8);
        } else {
            z.push(c);
            delta.push(0u8);
        }
    }
    let sample = CensoredSample::from_columns(z, delta, x_cols.clone())?;
    Ok((
        sample,
        LatentSample {
            y: y_all,
            c: c_all,
            x: x_cols,
        },
    ))
}

/// Estimator configuration for simulation fits: kernels, bandwidth
/// constants, integration densities and inference knobs.
#[derive(Clone)]
pub struct EstimatorSettings {
    pub reg_kernel: Kernel1D,
    pub density_kernel: Kernel1D,
    /// Component bandwidth constant of `h = c n^(-1/(2k+1))`.
    pub c: f64,
    /// Density bandwidth constant of `h = c' (log n / n)^(1/(2k'+d))`.
    pub c_prime: f64,
    pub undersmooth: bool,
    pub density_floor: f64,
    pub z: f64,
    pub quad: AdditiveOptions,
}

impl EstimatorSettings {
    /// Benchmark settings: second-order kernels everywhere, with both
    /// bandwidth constants calibrated so every bandwidth equals `h_ref` at
    /// sample size `n_ref`.
    pub fn reference(n_ref: usize, h_ref: f64, d: usize) -> Self {
        let k = 2usize;
        let k_prime = 2usize;
        let nf = n_ref as f64;
        let c = h_ref * nf.powf(1.0 / (2.0 * k as f64 + 1.0));
        let c_prime = h_ref / (nf.ln() / nf).powf(1.0 / (2.0 * k_prime as f64 + d as f64));
        Self {
            reg_kernel: Kernel1D::epanechnikov(),
            density_kernel: Kernel1D::epanechnikov(),
            c,
            c_prime,
            undersmooth: false,
            density_floor: DEFAULT_DENSITY_FLOOR,
            z: 1.96,
            quad: AdditiveOptions::default(),
        }
    }

    pub fn regression_bandwidth_at(&self, n: usize) -> Result<f64> {
        if self.undersmooth {
            undersmoothed_bandwidth(n, self.c, self.reg_kernel.order)
        } else {
            regression_bandwidth(n, self.c, self.reg_kernel.order)
        }
    }

    pub fn density_bandwidth_at(&self, n: usize, d: usize) -> Result<f64> {
        density_bandwidth(n, self.c_prime, self.density_kernel.order, d)
    }

    pub fn surface_spec(&self, n: usize, d: usize, psi: PsiSpec) -> Result<SurfaceSpec> {
        let h = self.regression_bandwidth_at(n)?;
        let h_density = self.density_bandwidth_at(n, d)?;
        Ok(SurfaceSpec {
            kernels: vec![self.reg_kernel.clone(); d],
            bandwidths: vec![h; d],
            psi,
            g_source: GSource::KaplanMeier,
            f_source: FSource::Kde {
                kernel: ProductKernel::isotropic(self.density_kernel.clone(), d),
                bandwidth: h_density,
                floor: self.density_floor,
            },
        })
    }
}

/// Closed-form model functions available when the DGP admits them; used for
/// the analytic standardization in normality studies.
pub struct AnalyticPieces {
    pub density: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub axis_density: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub second_moment: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub censoring_survival: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Derives closed forms for indicator-model DGPs with uniform covariates and
/// uniform censoring starting at zero; returns `None` otherwise.
pub fn analytic_pieces(dgp: &DgpSpec) -> Option<AnalyticPieces> {
    let threshold = match dgp.response {
        ResponseMechanism::IndicatorModel { threshold } => threshold,
        _ => return None,
    };
    let tau0 = dgp.psi.tau0()?;
    if (tau0 - threshold).abs() > 1e-12 {
        return None;
    }
    let cb = match dgp.censoring {
        CensoringLaw::Uniform { a, b } if a == 0.0 && b > threshold => b,
        _ => return None,
    };
    let mut widths = Vec::new();
    let mut axis_density: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = Vec::new();
    for law in &dgp.covariates {
        let CovariateLaw::Uniform { a, b } = *law;
        widths.push(b - a);
        axis_density.push(Arc::new(move |x: f64| {
            if x >= a && x <= b {
                1.0 / (b - a)
            } else {
                0.0
            }
        }));
    }
    let joint: f64 = widths.iter().map(|w| 1.0 / w).product();
    let covs = dgp.covariates.clone();
    let density = Arc::new(move |x: &[f64]| {
        for (law, &xi) in covs.iter().zip(x) {
            let CovariateLaw::Uniform { a, b } = *law;
            if xi < a || xi > b {
                return 0.0;
            }
        }
        joint
    }) as Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
    let components = dgp.components.clone();
    // H(x) = ∫_{threshold - p}^{threshold} dy / G(y) with G(y) = 1 - y / cb
    let second_moment = Arc::new(move |x: &[f64]| {
        let p: f64 = components.iter().zip(x).map(|(c, &v)| (c.f)(v)).sum();
        cb * ((cb - threshold + p) / (cb - threshold)).ln()
    }) as Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
    let censoring_survival = Arc::new(move |y: f64| {
        if y <= 0.0 {
            1.0
        } else if y >= cb {
            0.0
        } else {
            1.0 - y / cb
        }
    }) as Arc<dyn Fn(f64) -> f64 + Send + Sync>;
    Some(AnalyticPieces {
        density,
        axis_density,
        second_moment,
        censoring_survival,
    })
}

/// A probe: one axis and one point at which replicated estimates are
/// collected.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeSpec {
    pub axis: usize,
    pub x: f64,
}

/// Which standard deviation standardizes or widens the intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Closed-form variance from the analytic model pieces.
    Analytic,
    /// Kernel plug-in estimates refitted on every replicate.
    PlugIn,
}

/// Study controls on top of the estimator settings.
#[derive(Clone)]
pub struct StudyOptions {
    pub replicates: usize,
    pub probes: Vec<ProbeSpec>,
    pub sigma_mode: SigmaMode,
    pub q: Vec<IntegrationDensity>,
    pub settings: EstimatorSettings,
}

/// Per-replicate record kept in the study output.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub uncensored_rate: f64,
    pub eta_hat: Vec<f64>,
    /// Standardized statistics (analytic sigma mode).
    pub stat: Vec<f64>,
    /// Plug-in standard deviations (plug-in sigma mode).
    pub sigma_hat: Vec<f64>,
    /// Interval coverage indicators (plug-in sigma mode).
    pub covered: Vec<bool>,
}

/// Aggregated study output for one probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub axis: usize,
    pub x: f64,
    pub eta_true: f64,
    pub bias: f64,
    pub sigma_analytic: Option<f64>,
    pub mean_eta_hat: f64,
    pub mean_stat: Option<f64>,
    pub var_stat: Option<f64>,
    pub ks_distance: Option<f64>,
    pub coverage: Option<f64>,
    /// `n^(2k/(2k+1))` times the empirical mean squared error.
    pub rescaled_mse: f64,
    pub lag1_autocorr: f64,
}

/// Full study result; deterministic given `(seed, options)`.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    pub undersmoothed: bool,
    pub mean_uncensored_rate: f64,
    pub probes: Vec<ProbeSummary>,
    pub per_replicate: Vec<ReplicateRecord>,
}

/// Runs `replicates` independent fits of the DGP at sample size `n` and
/// aggregates probe-level statistics. Replicates run in parallel; all
/// aggregation is an ordered reduction, so results are thread-count
/// independent.
pub fn run_study(dgp: &DgpSpec, n: usize, opts: &StudyOptions) -> Result<StudyResult> {
    let d = dgp.dim();
    let k = opts.settings.reg_kernel.order;
    for probe in &opts.probes {
        if probe.axis >= d {
            return Err(Error::AxisOutOfRange { axis: probe.axis, d });
        }
    }
    if opts.q.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: opts.q.len(),
        });
    }

    // truth, bias and (optionally) analytic sigma per probe, computed once
    let h_reg = opts.settings.regression_bandwidth_at(n)?;
    let c_eff = h_reg * (n as f64).powf(1.0 / (2.0 * k as f64 + 1.0));
    let analytic = analytic_pieces(dgp);
    if opts.sigma_mode == SigmaMode::Analytic && analytic.is_none() {
        return Err(Error::Config(
            "analytic sigma mode requires an indicator-model DGP with uniform covariates \
             and uniform censoring from zero"
                .into(),
        ));
    }
    let mut eta_true = Vec::with_capacity(opts.probes.len());
    let mut bias_at = Vec::with_capacity(opts.probes.len());
    let mut sigma_analytic = Vec::with_capacity(opts.probes.len());
    for probe in &opts.probes {
        let comp = &dgp.components[probe.axis];
        let truth_fn = crate::additive::true_component_oracle(
            |x| (comp.f)(x),
            &opts.q[probe.axis],
            64,
        );
        eta_true.push(truth_fn(probe.x));
        let deriv = comp
            .derivative(k)
            .ok_or(Error::DensityDerivativeUnavailable(k))?;
        let b_fn = bias_oracle(
            |x| deriv(x),
            |x| (comp.f)(x),
            &opts.q[probe.axis],
            &opts.settings.reg_kernel,
            c_eff,
            k,
        )?;
        bias_at.push(b_fn(probe.x));
        if let Some(pieces) = &analytic {
            let sm = pieces.second_moment.clone();
            let dens = pieces.density.clone();
            let ax = pieces.axis_density[probe.axis].clone();
            let sm_ref = move |x: &[f64]| sm(x);
            let dens_ref = move |x: &[f64]| dens(x);
            let ax_ref = move |t: f64| ax(t);
            let est = sigma_from_pieces(
                &SigmaPieces {
                    second_moment: &sm_ref,
                    density: &dens_ref,
                    axis_density: &ax_ref,
                    floor: 1e-12,
                },
                &opts.q,
                probe.axis,
                &opts.settings.reg_kernel,
                c_eff,
                &[probe.x],
                &opts.settings.quad,
            )?;
            sigma_analytic.push(est.values[0]);
        } else {
            sigma_analytic.push(f64::NAN);
        }
    }

    let records: Vec<ReplicateRecord> = (0..opts.replicates)
        .into_par_iter()
        .map(|rep| -> Result<ReplicateRecord> {
            let mut rep_dgp = dgp.clone();
            rep_dgp.seed = replicate_seed(dgp.seed, rep as u64);
            let sample = generate(&rep_dgp, n)?;
            let spec = opts.settings.surface_spec(n, d, dgp.psi.clone())?;
            let mut surface = fit_surface(&sample, &spec)?;
            surface.set_undersmoothed(opts.settings.undersmooth);

            let shared = shared_constant(&surface, &opts.q, &opts.settings.quad);
            let mut eta_hat = Vec::with_capacity(opts.probes.len());
            for probe in &opts.probes {
                let vals = marginal_component_with_shared(
                    &surface,
                    &opts.q,
                    probe.axis,
                    &[probe.x],
                    &opts.settings.quad,
                    shared,
                )?;
                eta_hat.push(vals[0]);
            }

            let mut stat = Vec::new();
            let mut sigma_hat = Vec::new();
            let mut covered = Vec::new();
            match opts.sigma_mode {
                SigmaMode::Analytic => {
                    for (i, _probe) in opts.probes.iter().enumerate() {
                        stat.push(standardized_stat(
                            eta_hat[i],
                            eta_true[i],
                            bias_at[i],
                            sigma_analytic[i],
                            n,
                            k,
                        )?);
                    }
                }
                SigmaMode::PlugIn => {
                    let f_model = surface
                        .density_model()
                        .expect("plug-in sigma requires a fitted density model");
                    for (i, probe) in opts.probes.iter().enumerate() {
                        let f_axis = marginal_kde(
                            sample.x_col(probe.axis).to_vec(),
                            opts.settings.density_kernel.clone(),
                            f_model.bandwidth(),
                        )?;
                        let est = sigma_plugin(
                            &surface,
                            f_model,
                            &f_axis,
                            &opts.q,
                            probe.axis,
                            &[probe.x],
                            &opts.settings.quad,
                        )?;
                        let s = est.values[0];
                        sigma_hat.push(s);
                        let (lo, hi) =
                            normal_ci(&[eta_hat[i]], &[s], n, k, opts.settings.z);
                        covered.push(lo[0] <= eta_true[i] && eta_true[i] <= hi[0]);
                    }
                }
            }
            Ok(ReplicateRecord {
                replicate: rep,
                uncensored_rate: sample.uncensored_rate(),
                eta_hat,
                stat,
                sigma_hat,
                covered,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Replicate { .. } => e,
            other => Error::Replicate {
                replicate: usize::MAX,
                source: Box::new(other),
            },
        })?;

    let m = records.len();
    let mean_uncensored_rate =
        records.iter().map(|r| r.uncensored_rate).sum::<f64>() / m as f64;
    let distributional = m >= 50;
    let rate2 = convergence_rate(n, k).powi(2);
    let mut probes = Vec::with_capacity(opts.probes.len());
    for (i, probe) in opts.probes.iter().enumerate() {
        let etas: Vec<f64> = records.iter().map(|r| r.eta_hat[i]).collect();
        let mean_eta_hat = etas.iter().sum::<f64>() / m as f64;
        let mse =
            etas.iter().map(|&e| (e - eta_true[i]).powi(2)).sum::<f64>() / m as f64;
        let (mean_stat, var_stat, ks) = if opts.sigma_mode == SigmaMode::Analytic {
            let stats: Vec<f64> = records.iter().map(|r| r.stat[i]).collect();
            let mean = stats.iter().sum::<f64>() / m as f64;
            let var = stats.iter().map(|&s| (s - mean).powi(2)).sum::<f64>()
                / (m as f64 - 1.0).max(1.0);
            let ks = if distributional {
                Some(ks_distance_to_std_normal(&stats))
            } else {
                None
            };
            (Some(mean), Some(var), ks)
        } else {
            (None, None, None)
        };
        let coverage = if opts.sigma_mode == SigmaMode::PlugIn {
            Some(records.iter().filter(|r| r.covered[i]).count() as f64 / m as f64)
        } else {
            None
        };
        probes.push(ProbeSummary {
            axis: probe.axis,
            x: probe.x,
            eta_true: eta_true[i],
            bias: bias_at[i],
            sigma_analytic: if sigma_analytic[i].is_nan() {
                None
            } else {
                Some(sigma_analytic[i])
            },
            mean_eta_hat,
            mean_stat,
            var_stat,
            ks_distance: ks,
            coverage,
            rescaled_mse: rate2 * mse,
            lag1_autocorr: lag1_autocorrelation(&etas),
        });
    }

    Ok(StudyResult {
        n,
        replicates: m,
        seed: dgp.seed,
        sigma_mode: opts.sigma_mode,
        undersmoothed: opts.settings.undersmooth,
        mean_uncensored_rate,
        probes,
        per_replicate: records,
    })
}

fn lag1_autocorrelation(series: &[f64]) -> f64 {
    let m = series.len();
    if m < 3 {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / m as f64;
    let var: f64 = series.iter().map(|&v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = series
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    cov / var
}

/// Standard normal CDF via the Abramowitz–Stegun rational approximation
/// (absolute error below 1e-7, ample for Kolmogorov–Smirnov distances).
pub fn std_normal_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.2316419 * x.abs());
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let tail = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * poly;
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Kolmogorov–Smirnov distance between the sample and the standard normal.
pub fn ks_distance_to_std_normal(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = std_normal_cdf(x);
        d = d.max((cdf - i as f64 / m).abs());
        d = d.max(((i + 1) as f64 / m - cdf).abs());
    }
    d
}

/// Everything the figure-reproduction command emits: per-axis grids with
/// truth, estimate and interval bounds, plus fit metadata.
#[derive(Debug, Clone, Serialize)]
pub struct FigureOutput {
    pub n: usize,
    pub seed: u64,
    pub uncensored_rate: f64,
    pub bandwidth_regression: f64,
    pub bandwidth_density: f64,
    pub fit: AdditiveFit,
    pub diagnostics: FitDiagnostics,
    pub warnings: Vec<String>,
}

/// One full benchmark fit: generates the reference DGP, fits the surface
/// with the benchmark settings (every bandwidth 0.2 at n = 1000, scaled by
/// the bandwidth rules elsewhere), and tabulates truth, estimate and 95%
/// bands on an 81-point grid per axis.
pub fn reproduce_figure(n: usize, seed: u64) -> Result<FigureOutput> {
    let dgp = reference_dgp(seed);
    let settings = EstimatorSettings::reference(1000, 0.2, dgp.dim());
    let q = reference_q();
    let sample = generate(&dgp, n)?;
    let spec = settings.surface_spec(n, dgp.dim(), dgp.psi.clone())?;
    let surface = fit_surface(&sample, &spec)?;
    let domain = EvaluationDomain::for_densities(&q, 81, 0.9)?;
    let mut fit = fit_additive(&surface, &q, &domain, &settings.quad)?;

    let mut warnings = surface.diagnostics().warnings.clone();
    if q.iter().any(|qi| !qi.is_smooth()) {
        warnings.push(
            "integrating density is not smooth at its support edges; the bias expansion \
             for the components is heuristic here"
                .into(),
        );
    }
    if !settings.undersmooth {
        warnings.push(
            "bandwidth not undersmoothed: confidence intervals carry first-order bias".into(),
        );
    }

    let k = settings.reg_kernel.order;
    let f_model = surface.density_model().expect("kde source");
    for ell in 0..dgp.dim() {
        let grid = domain.grid(ell).to_vec();
        let f_axis = marginal_kde(
            sample.x_col(ell).to_vec(),
            settings.density_kernel.clone(),
            f_model.bandwidth(),
        )?;
        let est = sigma_plugin(&surface, f_model, &f_axis, &q, ell, &grid, &settings.quad)?;
        let eta = fit.components[ell].eta.clone();
        let (lo, hi) = normal_ci(&eta, &est.values, n, k, settings.z);
        fit.set_inference(ell, est.values, lo, hi);
        let comp = &dgp.components[ell];
        let truth_fn = crate::additive::true_component_oracle(|x| (comp.f)(x), &q[ell], 64);
        let truth: Vec<f64> = grid.iter().map(|&x| truth_fn(x)).collect();
        fit.set_truth(ell, truth);
    }

    Ok(FigureOutput {
        n,
        seed,
        uncensored_rate: sample.uncensored_rate(),
        bandwidth_regression: settings.regression_bandwidth_at(n)?,
        bandwidth_density: settings.density_bandwidth_at(n, dgp.dim())?,
        fit,
        diagnostics: surface.diagnostics().clone(),
        warnings,
    })
}
