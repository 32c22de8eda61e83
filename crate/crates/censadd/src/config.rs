//! JSON configuration schema. Unknown keys are rejected everywhere.

use crate::additive::{AdditiveOptions, EvaluationDomain, IntegrationDensity};
use crate::density::DEFAULT_DENSITY_FLOOR;
use crate::error::{Error, Result};
use crate::inference::undersmoothed_bandwidth;
use crate::kernels::{construct_higher_order, Kernel1D};
use crate::regression::{regression_bandwidth, PsiSpec};
use crate::simulate::{
    CensoringLaw, CovariateLaw, DgpSpec, EstimatorSettings, ProbeSpec, ResponseMechanism,
    SigmaMode, TrueComponent,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum PsiConfig {
    IndicatorLeqTau0 { tau0: f64 },
    IdentityTruncatedTau0 { tau0: f64 },
}

impl PsiConfig {
    pub fn to_spec(&self) -> PsiSpec {
        match *self {
            PsiConfig::IndicatorLeqTau0 { tau0 } => PsiSpec::indicator(tau0),
            PsiConfig::IdentityTruncatedTau0 { tau0 } => PsiSpec::identity_truncated(tau0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    2
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel1D> {
        let base = match self.family.as_str() {
            "epanechnikov" => Kernel1D::epanechnikov(),
            "uniform" => Kernel1D::uniform(),
            other => {
                return Err(Error::Config(format!(
                    "unknown kernel family {other:?}; expected epanechnikov or uniform"
                )))
            }
        };
        if self.order == base.order {
            Ok(base)
        } else {
            construct_higher_order(&base, self.order)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    #[serde(default)]
    pub regression: Option<KernelConfig>,
    /// Defaults to the smallest even order exceeding
    /// `regression order * dimension`.
    #[serde(default)]
    pub density: Option<KernelConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthConfig {
    /// Constant of the component bandwidth rule `c n^(-1/(2k+1))`.
    #[serde(default = "default_one")]
    pub c: f64,
    /// Constant of the density bandwidth rule `c' (log n / n)^(1/(2k'+d))`.
    #[serde(default = "default_one")]
    pub c_prime: f64,
    /// Explicit component bandwidth overriding the rule.
    #[serde(default)]
    pub h: Option<f64>,
    /// Explicit density bandwidth overriding the rule.
    #[serde(default)]
    pub h_density: Option<f64>,
    /// Shrink the component bandwidth by `(log n)^(-1/2)` so the interval
    /// bias vanishes.
    #[serde(default)]
    pub undersmooth: bool,
}

fn default_one() -> f64 {
    1.0
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_prime: 1.0,
            h: None,
            h_density: None,
            undersmooth: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum QConfig {
    Uniform { a: f64, b: f64 },
    CosineBump { a: f64, b: f64 },
}

impl QConfig {
    pub fn build(&self) -> IntegrationDensity {
        match *self {
            QConfig::Uniform { a, b } => IntegrationDensity::uniform(a, b),
            QConfig::CosineBump { a, b } => IntegrationDensity::cosine_bump(a, b),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid_points")]
    pub points: usize,
    #[serde(default = "default_grid_span")]
    pub span: f64,
}

fn default_grid_points() -> usize {
    81
}

fn default_grid_span() -> f64 {
    0.9
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 81,
            span: 0.9,
        }
    }
}

/// Configuration of a real-data fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFileConfig {
    pub psi: PsiConfig,
    #[serde(default)]
    pub kernels: KernelsConfig,
    #[serde(default)]
    pub bandwidths: BandwidthConfig,
    pub q: Vec<QConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_floor")]
    pub density_floor: f64,
}

fn default_nodes() -> usize {
    48
}

fn default_z() -> f64 {
    1.96
}

fn default_floor() -> f64 {
    DEFAULT_DENSITY_FLOOR
}

/// Fully resolved estimator plan for a given sample size and dimension.
pub struct ResolvedFit {
    pub reg_kernel: Kernel1D,
    pub density_kernel: Kernel1D,
    pub reg_bandwidth: f64,
    pub density_bandwidth: f64,
    pub undersmooth: bool,
    pub psi: PsiSpec,
    pub q: Vec<IntegrationDensity>,
    pub domain: EvaluationDomain,
    pub quad: AdditiveOptions,
    pub z: f64,
    pub density_floor: f64,
    pub c_effective: f64,
}

impl FitFileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn resolve(&self, n: usize, d: usize) -> Result<ResolvedFit> {
        if self.q.len() != d {
            return Err(Error::Config(format!(
                "config lists {} integrating densities but the data has {d} covariates",
                self.q.len()
            )));
        }
        let reg_kernel = match &self.kernels.regression {
            Some(cfg) => cfg.build()?,
            None => Kernel1D::epanechnikov(),
        };
        let k = reg_kernel.order;
        let density_kernel = match &self.kernels.density {
            Some(cfg) => cfg.build()?,
            None => {
                // smallest even order above k * d keeps the density bias
                // negligible relative to the component bias
                let needed = k * d + 1;
                let order = if needed % 2 == 0 { needed } else { needed + 1 };
                construct_higher_order(&Kernel1D::epanechnikov(), order.max(2))?
            }
        };
        let reg_bandwidth = match self.bandwidths.h {
            Some(h) if h > 0.0 => h,
            Some(h) => return Err(Error::InvalidBandwidth(h)),
            None => {
                if self.bandwidths.undersmooth {
                    undersmoothed_bandwidth(n, self.bandwidths.c, k)?
                } else {
                    regression_bandwidth(n, self.bandwidths.c, k)?
                }
            }
        };
        let density_bw = match self.bandwidths.h_density {
            Some(h) if h > 0.0 => h,
            Some(h) => return Err(Error::InvalidBandwidth(h)),
            None => crate::density::density_bandwidth(
                n,
                self.bandwidths.c_prime,
                density_kernel.order,
                d,
            )?,
        };
        let q: Vec<IntegrationDensity> = self.q.iter().map(QConfig::build).collect();
        let domain = EvaluationDomain::for_densities(&q, self.grid.points, self.grid.span)?;
        let c_effective = reg_bandwidth * (n as f64).powf(1.0 / (2.0 * k as f64 + 1.0));
        Ok(ResolvedFit {
            reg_kernel,
            density_kernel,
            reg_bandwidth,
            density_bandwidth: density_bw,
            undersmooth: self.bandwidths.undersmooth,
            psi: self.psi.to_spec(),
            q,
            domain,
            quad: AdditiveOptions {
                quad_nodes: self.quadrature_nodes,
                ..AdditiveOptions::default()
            },
            z: self.z,
            density_floor: self.density_floor,
            c_effective,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "law", rename_all = "snake_case")]
pub enum CovariateConfig {
    Uniform { a: f64, b: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ComponentConfig {
    /// `0.5 cos^2(x)`.
    HalfCosSquared,
    /// `0.5 sin^2(x)`.
    HalfSinSquared,
    /// `sum_i coefficients[i] x^i`.
    Polynomial { coefficients: Vec<f64> },
}

impl ComponentConfig {
    pub fn build(&self) -> TrueComponent {
        match self {
            ComponentConfig::HalfCosSquared => TrueComponent {
                f: Arc::new(|x: f64| 0.5 * x.cos().powi(2)),
                derivs: vec![
                    Arc::new(|x: f64| -0.5 * (2.0 * x).sin()),
                    Arc::new(|x: f64| -(2.0 * x).cos()),
                ],
            },
            ComponentConfig::HalfSinSquared => TrueComponent {
                f: Arc::new(|x: f64| 0.5 * x.sin().powi(2)),
                derivs: vec![
                    Arc::new(|x: f64| 0.5 * (2.0 * x).sin()),
                    Arc::new(|x: f64| (2.0 * x).cos()),
                ],
            },
            ComponentConfig::Polynomial { coefficients } => {
                let eval_poly = |c: Vec<f64>| {
                    move |x: f64| {
                        let mut acc = 0.0;
                        for &ci in c.iter().rev() {
                            acc = acc * x + ci;
                        }
                        acc
                    }
                };
                let deriv_coeffs = |c: &[f64]| -> Vec<f64> {
                    c.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(i, &ci)| i as f64 * ci)
                        .collect()
                };
                let d1 = deriv_coeffs(coefficients);
                let d2 = deriv_coeffs(&d1);
                TrueComponent {
                    f: Arc::new(eval_poly(coefficients.clone())),
                    derivs: vec![
                        Arc::new(eval_poly(d1)),
                        Arc::new(eval_poly(d2)),
                    ],
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ResponseConfig {
    IndicatorModel { threshold: f64 },
    LocationModel { offset: f64, noise_sd: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum CensoringConfig {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub covariates: Vec<CovariateConfig>,
    pub components: Vec<ComponentConfig>,
    pub response: ResponseConfig,
    pub censoring: CensoringConfig,
}

impl DgpConfig {
    pub fn to_spec(&self, psi: PsiSpec, seed: u64) -> Result<DgpSpec> {
        if self.covariates.len() != self.components.len() {
            return Err(Error::Config(
                "one additive component per covariate axis is required".into(),
            ));
        }
        Ok(DgpSpec {
            covariates: self
                .covariates
                .iter()
                .map(|c| match *c {
                    CovariateConfig::Uniform { a, b } => CovariateLaw::Uniform { a, b },
                })
                .collect(),
            components: self.components.iter().map(ComponentConfig::build).collect(),
            response: match self.response {
                ResponseConfig::IndicatorModel { threshold } => {
                    ResponseMechanism::IndicatorModel { threshold }
                }
                ResponseConfig::LocationModel { offset, noise_sd } => {
                    ResponseMechanism::LocationModel { offset, noise_sd }
                }
            },
            censoring: match self.censoring {
                CensoringConfig::Uniform { a, b } => CensoringLaw::Uniform { a, b },
                CensoringConfig::Exponential { rate } => CensoringLaw::Exponential { rate },
                CensoringConfig::None => CensoringLaw::None,
            },
            psi,
            seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// One-based axis index.
    pub axis: usize,
    pub x: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SigmaModeConfig {
    Analytic,
    PlugIn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub probes: Vec<ProbeConfig>,
    #[serde(default = "default_sigma_mode")]
    pub sigma_mode: SigmaModeConfig,
}

fn default_replicates() -> usize {
    500
}

fn default_sigma_mode() -> SigmaModeConfig {
    SigmaModeConfig::Analytic
}

/// Configuration of the simulation commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFileConfig {
    pub dgp: DgpConfig,
    pub psi: PsiConfig,
    #[serde(default)]
    pub kernels: KernelsConfig,
    #[serde(default)]
    pub bandwidths: BandwidthConfig,
    /// Defaults to uniform densities over each covariate support.
    #[serde(default)]
    pub q: Option<Vec<QConfig>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_floor")]
    pub density_floor: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub study: Option<StudyBlock>,
}

fn default_n() -> usize {
    1000
}

impl SimFileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn q_densities(&self) -> Vec<IntegrationDensity> {
        match &self.q {
            Some(list) => list.iter().map(QConfig::build).collect(),
            None => self
                .dgp
                .covariates
                .iter()
                .map(|c| match *c {
                    CovariateConfig::Uniform { a, b } => IntegrationDensity::uniform(a, b),
                })
                .collect(),
        }
    }

    pub fn estimator_settings(&self) -> Result<EstimatorSettings> {
        let reg_kernel = match &self.kernels.regression {
            Some(cfg) => cfg.build()?,
            None => Kernel1D::epanechnikov(),
        };
        let density_kernel = match &self.kernels.density {
            Some(cfg) => cfg.build()?,
            None => Kernel1D::epanechnikov(),
        };
        Ok(EstimatorSettings {
            reg_kernel,
            density_kernel,
            c: self.bandwidths.c,
            c_prime: self.bandwidths.c_prime,
            undersmooth: self.bandwidths.undersmooth,
            density_floor: self.density_floor,
            z: self.z,
            quad: AdditiveOptions {
                quad_nodes: self.quadrature_nodes,
                ..AdditiveOptions::default()
            },
        })
    }

    pub fn study_options(&self, replicates_override: Option<usize>) -> Result<crate::simulate::StudyOptions> {
        let block = self.study.as_ref().ok_or_else(|| {
            Error::Config("config has no study block; add \"study\": {...}".into())
        })?;
        let d = self.dgp.covariates.len();
        let mut probes = Vec::with_capacity(block.probes.len());
        for p in &block.probes {
            if p.axis == 0 || p.axis > d {
                return Err(Error::Config(format!(
                    "probe axis {} out of range 1..={d}",
                    p.axis
                )));
            }
            probes.push(ProbeSpec {
                axis: p.axis - 1,
                x: p.x,
            });
        }
        Ok(crate::simulate::StudyOptions {
            replicates: replicates_override.unwrap_or(block.replicates),
            probes,
            sigma_mode: match block.sigma_mode {
                SigmaModeConfig::Analytic => SigmaMode::Analytic,
                SigmaModeConfig::PlugIn => SigmaMode::PlugIn,
            },
            q: self.q_densities(),
            settings: self.estimator_settings()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_config_minimal_and_unknown_keys() {
        let json = r#"{
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "q": [{"family": "uniform", "a": -1.0, "b": 1.0}]
        }"#;
        let cfg: FitFileConfig = serde_json::from_str(json).unwrap();
        let resolved = cfg.resolve(1000, 1).unwrap();
        assert_eq!(resolved.reg_kernel.order, 2);
        // auto density kernel order: smallest even order above 2 * 1 = 2 -> 4
        assert_eq!(resolved.density_kernel.order, 4);
        assert_eq!(resolved.z, 1.96);

        let bad = r#"{
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "q": [{"family": "uniform", "a": -1.0, "b": 1.0}],
            "mystery": 1
        }"#;
        assert!(serde_json::from_str::<FitFileConfig>(bad).is_err());
    }

    #[test]
    fn fit_config_dimension_check() {
        let json = r#"{
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "q": [{"family": "uniform", "a": -1.0, "b": 1.0}]
        }"#;
        let cfg: FitFileConfig = serde_json::from_str(json).unwrap();
        assert!(cfg.resolve(1000, 2).is_err());
    }

    #[test]
    fn density_kernel_default_for_two_axes() {
        let json = r#"{
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "q": [
                {"family": "uniform", "a": -1.0, "b": 1.0},
                {"family": "uniform", "a": -1.0, "b": 1.0}
            ]
        }"#;
        let cfg: FitFileConfig = serde_json::from_str(json).unwrap();
        let resolved = cfg.resolve(1000, 2).unwrap();
        // k*d = 4 -> smallest even order above it is 6
        assert_eq!(resolved.density_kernel.order, 6);
    }

    #[test]
    fn explicit_bandwidths_override_rules() {
        let json = r#"{
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "bandwidths": {"h": 0.2, "h_density": 0.2},
            "kernels": {"density": {"family": "epanechnikov", "order": 2}},
            "q": [{"family": "uniform", "a": -1.0, "b": 1.0}]
        }"#;
        let cfg: FitFileConfig = serde_json::from_str(json).unwrap();
        let resolved = cfg.resolve(777, 1).unwrap();
        assert_eq!(resolved.reg_bandwidth, 0.2);
        assert_eq!(resolved.density_bandwidth, 0.2);
    }

    #[test]
    fn polynomial_component_derivatives() {
        let comp = ComponentConfig::Polynomial {
            coefficients: vec![1.0, 0.0, 3.0],
        }
        .build();
        assert_eq!((comp.f)(2.0), 13.0);
        let d1 = comp.derivative(1).unwrap();
        assert_eq!(d1(2.0), 12.0);
        let d2 = comp.derivative(2).unwrap();
        assert_eq!(d2(2.0), 6.0);
    }

    #[test]
    fn sim_config_round_trip() {
        let json = r#"{
            "dgp": {
                "covariates": [
                    {"law": "uniform", "a": -1.0, "b": 1.0},
                    {"law": "uniform", "a": -1.0, "b": 1.0}
                ],
                "components": [{"kind": "half_cos_squared"}, {"kind": "half_sin_squared"}],
                "response": {"kind": "indicator_model", "threshold": 0.9},
                "censoring": {"kind": "uniform", "a": 0.0, "b": 1.0}
            },
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "seed": 42,
            "study": {
                "replicates": 10,
                "probes": [{"axis": 1, "x": 0.0}],
                "sigma_mode": "analytic"
            }
        }"#;
        let cfg: SimFileConfig = serde_json::from_str(json).unwrap();
        let psi = cfg.psi.to_spec();
        let dgp = cfg.dgp.to_spec(psi, cfg.seed).unwrap();
        assert_eq!(dgp.dim(), 2);
        let opts = cfg.study_options(Some(3)).unwrap();
        assert_eq!(opts.replicates, 3);
        assert_eq!(opts.probes[0].axis, 0);
        assert!(cfg.study_options(None).unwrap().replicates == 10);
    }

    #[test]
    fn probe_axis_validation() {
        let json = r#"{
            "dgp": {
                "covariates": [{"law": "uniform", "a": -1.0, "b": 1.0}],
                "components": [{"kind": "half_cos_squared"}],
                "response": {"kind": "indicator_model", "threshold": 0.9},
                "censoring": {"kind": "none"}
            },
            "psi": {"kind": "indicator_leq_tau0", "tau0": 0.9},
            "study": {"replicates": 2, "probes": [{"axis": 2, "x": 0.0}]}
        }"#;
        let cfg: SimFileConfig = serde_json::from_str(json).unwrap();
        assert!(cfg.study_options(None).is_err());
    }
}
