//! IPCW kernel regression surface.
//!
//! The estimator weights each uncensored observation by the inverse of the
//! estimated censoring survival at its observed time, then smooths the
//! weighted responses with a product of one-dimensional kernels and an
//! internal density correction evaluated at the data points:
//!
//! `m(x) = sum_i W_i(x) * delta_i psi(z_i) / g(z_i)` with
//! `W_i(x) = prod_l K_l((x_l - X_il) / h_l) / h_l / (n f(X_i))`.
//!
//! Both the censoring survival and the covariate density can be replaced by
//! analytic functions, which yields the known-density and known-censoring
//! oracle variants used as test fixtures.

use crate::density::{fit_kde_floored, DensityModel};
use crate::error::{Error, Result};
use crate::kernels::{Kernel1D, ProductKernel};
use crate::survival::{fit_censoring_survival, ipcw_response, CensoredSample, StepSurvival};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Bounded transform of the response applied before averaging.
#[derive(Clone)]
pub struct PsiSpec {
    kind: PsiKind,
    tau0: Option<f64>,
    bound: f64,
    custom: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiKind {
    IndicatorLeqTau0,
    IdentityTruncatedTau0,
    CustomBounded,
}

impl fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiSpec")
            .field("kind", &self.kind)
            .field("tau0", &self.tau0)
            .field("bound", &self.bound)
            .finish()
    }
}

impl PsiSpec {
    /// `psi(y) = 1{y <= tau0}`.
    pub fn indicator(tau0: f64) -> Self {
        Self {
            kind: PsiKind::IndicatorLeqTau0,
            tau0: Some(tau0),
            bound: 1.0,
            custom: None,
        }
    }

    /// `psi(y) = y 1{y <= tau0}` for non-negative times.
    pub fn identity_truncated(tau0: f64) -> Self {
        Self {
            kind: PsiKind::IdentityTruncatedTau0,
            tau0: Some(tau0),
            bound: tau0.max(0.0),
            custom: None,
        }
    }

    /// Arbitrary bounded transform; `tau0` declares the cutoff beyond which
    /// it is promised to vanish, when one exists.
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        f: F,
        bound: f64,
        tau0: Option<f64>,
    ) -> Self {
        Self {
            kind: PsiKind::CustomBounded,
            tau0,
            bound,
            custom: Some(Arc::new(f)),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self.kind {
            PsiKind::IndicatorLeqTau0 => {
                if y <= self.tau0.unwrap() {
                    1.0
                } else {
                    0.0
                }
            }
            PsiKind::IdentityTruncatedTau0 => {
                if y <= self.tau0.unwrap() {
                    y
                } else {
                    0.0
                }
            }
            PsiKind::CustomBounded => (self.custom.as_ref().unwrap())(y),
        }
    }

    pub fn kind(&self) -> PsiKind {
        self.kind
    }

    pub fn tau0(&self) -> Option<f64> {
        self.tau0
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Source of the censoring survival function used in the IPCW weights.
#[derive(Clone)]
pub enum GSource {
    /// Kaplan–Meier estimate fitted on the sample.
    KaplanMeier,
    /// Known censoring survival (oracle variant).
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Source of the covariate density in the weight denominators.
#[derive(Clone)]
pub enum FSource {
    /// Kernel density estimate with the given product kernel and bandwidth.
    Kde {
        kernel: ProductKernel,
        bandwidth: f64,
        floor: f64,
    },
    /// Known covariate density (oracle variant).
    Analytic(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// Everything the fit needs besides the sample.
#[derive(Clone)]
pub struct SurfaceSpec {
    pub kernels: Vec<Kernel1D>,
    pub bandwidths: Vec<f64>,
    pub psi: PsiSpec,
    pub g_source: GSource,
    pub f_source: FSource,
}

/// Bandwidth rule for the regression axes: `h = c n^(-1 / (2k + 1))` for the
/// kernel order `k`.
pub fn regression_bandwidth(n: usize, c: f64, k: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::SampleTooSmall { n, min: 1 });
    }
    if c <= 0.0 {
        return Err(Error::InvalidBandwidthConstant(c));
    }
    Ok(c * (n as f64).powf(-1.0 / (2.0 * k as f64 + 1.0)))
}

/// Fit-level diagnostics; the regression assumptions fail silently otherwise.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    /// Empirical fraction of uncensored observations.
    pub uncensored_rate: f64,
    /// Number of density evaluations clamped by the divisor floor.
    pub floored_density_count: u64,
    /// Largest absolute synthetic response.
    pub max_synthetic: f64,
    /// Whether the psi cutoff lies strictly below the largest observed time.
    pub tau0_below_max_z: Option<bool>,
    pub warnings: Vec<String>,
}

enum FittedG {
    Step(StepSurvival),
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

enum FittedF {
    Kde(DensityModel),
    Analytic(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// Anything evaluable over the covariate space; marginal integration only
/// needs this much.
pub trait Surface: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

/// A closure wrapped as a [`Surface`]; handy for oracles and synthetic fits.
pub struct FnSurface<F: Fn(&[f64]) -> f64 + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Surface for FnSurface<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Fitted IPCW regression surface, evaluable at any point.
pub struct RegressionSurface {
    x_cols: Vec<Vec<f64>>,
    order_axis0: Vec<u32>,
    sorted_axis0: Vec<f64>,
    kernels: Vec<Kernel1D>,
    bandwidths: Vec<f64>,
    synthetic: Vec<f64>,
    synthetic_sq: Vec<f64>,
    /// Per-observation weight denominator `n * f(X_i)`.
    denom: Vec<f64>,
    psi: PsiSpec,
    g: FittedG,
    f_model: Option<DensityModel>,
    k_order: usize,
    undersmoothed: bool,
    diagnostics: FitDiagnostics,
}

/// Fits the surface: estimates (or adopts) the censoring survival and the
/// covariate density, caches the synthetic responses and weight
/// denominators.
pub fn fit_surface(sample: &CensoredSample, spec: &SurfaceSpec) -> Result<RegressionSurface> {
    let d = sample.dim();
    let n = sample.n();
    if spec.kernels.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.kernels.len(),
        });
    }
    if spec.bandwidths.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.bandwidths.len(),
        });
    }
    for &h in &spec.bandwidths {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::InvalidBandwidth(h));
        }
    }

    let g = match &spec.g_source {
        GSource::KaplanMeier => FittedG::Step(fit_censoring_survival(sample)?),
        GSource::Analytic(f) => FittedG::Analytic(f.clone()),
    };
    let g_eval = |y: f64| match &g {
        FittedG::Step(s) => s.eval(y),
        FittedG::Analytic(f) => f(y),
    };
    let synthetic = ipcw_response(sample, g_eval, &spec.psi, 1)?;
    let synthetic_sq = ipcw_response(sample, g_eval, &spec.psi, 2)?;

    let mut warnings = Vec::new();
    let mut density_order = None;
    let f = match &spec.f_source {
        FSource::Kde {
            kernel,
            bandwidth,
            floor,
        } => {
            density_order = Some(kernel.factors.iter().map(|k| k.order).min().unwrap_or(0));
            FittedF::Kde(fit_kde_floored(
                sample.x_cols().to_vec(),
                kernel.clone(),
                *bandwidth,
                *floor,
            )?)
        }
        FSource::Analytic(f) => FittedF::Analytic(f.clone()),
    };
    let mut denom = Vec::with_capacity(n);
    let mut point = vec![0.0; d];
    for i in 0..n {
        for (axis, p) in point.iter_mut().enumerate() {
            *p = sample.x_col(axis)[i];
        }
        let fi = match &f {
            FittedF::Kde(model) => model.floored_eval(&point),
            FittedF::Analytic(func) => func(&point),
        };
        denom.push(n as f64 * fi);
    }

    let k_order = spec.kernels.iter().map(|k| k.order).min().unwrap_or(2);
    if let Some(kp) = density_order {
        if kp <= k_order * d {
            warnings.push(format!(
                "density kernel order {kp} does not exceed regression order times dimension \
                 ({k_order} * {d}); the density bias may dominate"
            ));
        }
    }
    let all_censored = sample.delta().iter().all(|&di| di == 0);
    if all_censored {
        warnings.push("fully censored sample: the fitted surface is identically zero".into());
    }
    let tau0_below_max_z = spec.psi.tau0().map(|t| t < sample.max_z());
    if tau0_below_max_z == Some(false) {
        warnings.push(format!(
            "psi cutoff {} is not below the largest observed time {}; the tail of the \
             target functional is not identifiable from this sample",
            spec.psi.tau0().unwrap(),
            sample.max_z()
        ));
    }
    if spec.psi.tau0().is_none() {
        warnings.push(
            "psi has no cutoff; identifiability then rests on a tail condition linking the \
             response and censoring distributions that cannot be checked at finite n"
                .into(),
        );
    }

    let floored_density_count = match &f {
        FittedF::Kde(model) => model.floored_count(),
        FittedF::Analytic(_) => 0,
    };
    let diagnostics = FitDiagnostics {
        uncensored_rate: sample.uncensored_rate(),
        floored_density_count,
        max_synthetic: synthetic.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
        tau0_below_max_z,
        warnings,
    };

    let x_cols = sample.x_cols().to_vec();
    let mut order_axis0: Vec<u32> = (0..n as u32).collect();
    order_axis0.sort_by(|&a, &b| x_cols[0][a as usize].total_cmp(&x_cols[0][b as usize]));
    let sorted_axis0: Vec<f64> = order_axis0.iter().map(|&i| x_cols[0][i as usize]).collect();

    Ok(RegressionSurface {
        x_cols,
        order_axis0,
        sorted_axis0,
        kernels: spec.kernels.clone(),
        bandwidths: spec.bandwidths.clone(),
        synthetic,
        synthetic_sq,
        denom,
        psi: spec.psi.clone(),
        g,
        f_model: match f {
            FittedF::Kde(m) => Some(m),
            FittedF::Analytic(_) => None,
        },
        k_order,
        undersmoothed: false,
        diagnostics,
    })
}

/// Dimension-checked surface evaluation.
pub fn eval_surface(surface: &RegressionSurface, x: &[f64]) -> Result<f64> {
    if x.len() != surface.dim() {
        return Err(Error::DimensionMismatch {
            expected: surface.dim(),
            got: x.len(),
        });
    }
    Ok(surface.value(x))
}

impl RegressionSurface {
    pub fn n(&self) -> usize {
        self.denom.len()
    }

    pub fn dim(&self) -> usize {
        self.x_cols.len()
    }

    pub fn kernels(&self) -> &[Kernel1D] {
        &self.kernels
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    pub fn synthetic(&self) -> &[f64] {
        &self.synthetic
    }

    pub fn synthetic_sq(&self) -> &[f64] {
        &self.synthetic_sq
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    /// Minimal order among the regression kernels.
    pub fn kernel_order(&self) -> usize {
        self.k_order
    }

    /// Kaplan–Meier censoring survival, when one was fitted.
    pub fn fitted_censoring_survival(&self) -> Option<&StepSurvival> {
        match &self.g {
            FittedG::Step(s) => Some(s),
            FittedG::Analytic(_) => None,
        }
    }

    /// Density model behind the weights, when one was fitted.
    pub fn density_model(&self) -> Option<&DensityModel> {
        self.f_model.as_ref()
    }

    /// Marks the fit as produced with an undersmoothed bandwidth; confidence
    /// intervals read this flag.
    pub fn set_undersmoothed(&mut self, value: bool) {
        self.undersmoothed = value;
    }

    pub fn undersmoothed(&self) -> bool {
        self.undersmoothed
    }

    /// Effective bandwidth constant `h_l * n^(1 / (2k + 1))` of one axis.
    pub fn effective_bandwidth_constant(&self, axis: usize) -> f64 {
        self.bandwidths[axis] * (self.n() as f64).powf(1.0 / (2.0 * self.k_order as f64 + 1.0))
    }

    /// Indices whose axis-0 coordinate falls in the kernel window around
    /// `x0`, ascending, so that pruned evaluation reproduces a full loop bit
    /// for bit.
    fn candidates(&self, x0: f64) -> Vec<u32> {
        let r = self.bandwidths[0] * self.kernels[0].support_radius;
        let lo = self.sorted_axis0.partition_point(|&v| v < x0 - r);
        let hi = self.sorted_axis0.partition_point(|&v| v <= x0 + r);
        let mut idx: Vec<u32> = self.order_axis0[lo..hi].to_vec();
        idx.sort_unstable();
        idx
    }

    fn fold_weights<F: FnMut(usize, f64)>(&self, x: &[f64], mut visit: F) {
        debug_assert_eq!(x.len(), self.dim());
        for j in self.candidates(x[0]) {
            let j = j as usize;
            let mut w = 1.0;
            for axis in 0..self.dim() {
                let h = self.bandwidths[axis];
                let u = (x[axis] - self.x_cols[axis][j]) / h;
                let k = self.kernels[axis].eval(u);
                if k == 0.0 {
                    w = 0.0;
                    break;
                }
                w *= k / h;
            }
            if w != 0.0 {
                visit(j, w / self.denom[j]);
            }
        }
    }

    /// Weighted sum of arbitrary per-observation values with the surface
    /// weights `W_i(x)`.
    pub fn weighted_sum(&self, x: &[f64], values: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.fold_weights(x, |j, w| acc += w * values[j]);
        acc
    }

    /// Regression value and second-moment plug-in value in one weight pass.
    pub fn value_and_second_moment(&self, x: &[f64]) -> (f64, f64) {
        let mut first = 0.0;
        let mut second = 0.0;
        self.fold_weights(x, |j, w| {
            first += w * self.synthetic[j];
            second += w * self.synthetic_sq[j];
        });
        (first, second)
    }

    /// `sum_i |W_i(x)|`, used by the boundedness diagnostic.
    pub fn weight_abs_sum(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.fold_weights(x, |_, w| acc += w.abs());
        acc
    }
}

impl Surface for RegressionSurface {
    fn dim(&self) -> usize {
        self.x_cols.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weighted_sum(x, &self.synthetic)
    }
}
