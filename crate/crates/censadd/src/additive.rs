//! Marginal integration of a regression surface into additive components.
//!
//! The component along axis `l` at a point `t` is the integral of the
//! surface against the product of the other axes' integrating densities,
//! centred by the integral of the surface against the full product density.
//! That second, grid-independent integral is the fitted constant of the
//! additive predictor.

use crate::error::{Error, Result};
use crate::quad::{tensor_integrate, GaussLegendre, QuadAxis};
use crate::regression::Surface;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// A fixed one-dimensional integrating density with compact support.
///
/// Analytic derivatives may be attached; the bias oracle needs the
/// derivative of the kernel order.
#[derive(Clone)]
pub struct IntegrationDensity {
    support: (f64, f64),
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    smooth: bool,
    sup_value: f64,
}

impl std::fmt::Debug for IntegrationDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrationDensity")
            .field("support", &self.support)
            .field("smooth", &self.smooth)
            .field("derivatives", &self.derivs.len())
            .finish()
    }
}

fn scan_sup(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..=2048 {
        let x = lo + (hi - lo) * i as f64 / 2048.0;
        sup = sup.max(f(x));
    }
    sup * 1.001
}

impl IntegrationDensity {
    /// Uniform density on `[a, b]`. Its derivatives vanish almost everywhere
    /// but it is not smooth at the support edges; fits warn accordingly.
    pub fn uniform(a: f64, b: f64) -> Self {
        assert!(b > a, "support must be non-degenerate");
        let height = 1.0 / (b - a);
        let eval = Arc::new(move |x: f64| if x >= a && x <= b { height } else { 0.0 });
        let zero: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|_| 0.0);
        Self {
            support: (a, b),
            eval,
            derivs: vec![zero.clone(), zero],
            smooth: false,
            sup_value: height * 1.001,
        }
    }

    /// Smooth bump density proportional to `cos^4` on `[a, b]`; vanishes with
    /// three continuous derivatives at the support edges. First and second
    /// derivatives are attached analytically.
    pub fn cosine_bump(a: f64, b: f64) -> Self {
        assert!(b > a, "support must be non-degenerate");
        // on [-1, 1]: q0(u) = (4/3) cos^4(pi u / 2) integrates to one;
        // rescaling to [a, b] multiplies by du/dx and each derivative by
        // another du/dx.
        let scale = 2.0 / (b - a);
        let to_std = move |x: f64| (2.0 * x - a - b) / (b - a);
        let eval = Arc::new(move |x: f64| {
            if x < a || x > b {
                return 0.0;
            }
            let s = std::f64::consts::FRAC_PI_2 * to_std(x);
            let c = s.cos();
            (4.0 / 3.0) * c.powi(4) * scale
        }) as Arc<dyn Fn(f64) -> f64 + Send + Sync>;
        let d1 = Arc::new(move |x: f64| {
            if x < a || x > b {
                return 0.0;
            }
            let s = std::f64::consts::FRAC_PI_2 * to_std(x);
            let (sin, cos) = s.sin_cos();
            -(8.0 * std::f64::consts::PI / 3.0) * cos.powi(3) * sin * scale * scale
        }) as Arc<dyn Fn(f64) -> f64 + Send + Sync>;
        let d2 = Arc::new(move |x: f64| {
            if x < a || x > b {
                return 0.0;
            }
            let s = std::f64::consts::FRAC_PI_2 * to_std(x);
            let (sin, cos) = s.sin_cos();
            let c2 = cos * cos;
            -(4.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0)
                * c2
                * (c2 - 3.0 * sin * sin)
                * scale
                * scale
                * scale
        }) as Arc<dyn Fn(f64) -> f64 + Send + Sync>;
        let sup_value = scan_sup(eval.as_ref(), a, b);
        Self {
            support: (a, b),
            eval,
            derivs: vec![d1, d2],
            smooth: true,
            sup_value,
        }
    }

    /// Arbitrary density with optional analytic derivatives. Validates the
    /// normalization by quadrature.
    pub fn custom(
        support: (f64, f64),
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        derivs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        smooth: bool,
    ) -> Result<Self> {
        let sup_value = scan_sup(eval.as_ref(), support.0, support.1);
        let q = Self {
            support,
            eval,
            derivs,
            smooth,
            sup_value,
        };
        let total = q.integral();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "integrating density must integrate to one, got {total}"
            )));
        }
        Ok(q)
    }

    /// As [`IntegrationDensity::custom`] but skipping the normalization
    /// check; intended for test harnesses that deliberately scale a density.
    pub fn custom_unchecked(
        support: (f64, f64),
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        derivs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        smooth: bool,
    ) -> Self {
        let sup_value = scan_sup(eval.as_ref(), support.0, support.1);
        Self {
            support,
            eval,
            derivs,
            smooth,
            sup_value,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    /// Highest derivative order attached.
    pub fn derivative_order_available(&self) -> usize {
        self.derivs.len()
    }

    pub fn derivative(&self, order: usize) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        if order == 0 {
            return Some(self.eval.clone());
        }
        self.derivs.get(order - 1).cloned()
    }

    /// `∫ q` over the support by composite quadrature.
    pub fn integral(&self) -> f64 {
        let gl = GaussLegendre::new(64);
        gl.integrate_composite(self.support.0, self.support.1, 8, |x| self.eval(x))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let (a, b) = self.support;
        loop {
            let x = a + (b - a) * rng.random::<f64>();
            let u = self.sup_value * rng.random::<f64>();
            if u <= self.eval(x) {
                return x;
            }
        }
    }
}

/// Compact evaluation box and per-axis display grids.
#[derive(Debug, Clone)]
pub struct EvaluationDomain {
    intervals: Vec<(f64, f64)>,
    grids: Vec<Vec<f64>>,
}

impl EvaluationDomain {
    pub fn new(intervals: Vec<(f64, f64)>, grids: Vec<Vec<f64>>) -> Result<Self> {
        if intervals.len() != grids.len() {
            return Err(Error::DimensionMismatch {
                expected: intervals.len(),
                got: grids.len(),
            });
        }
        for ((lo, hi), grid) in intervals.iter().zip(&grids) {
            if grid.is_empty() {
                return Err(Error::InvalidGrid);
            }
            for w in grid.windows(2) {
                if w[1] <= w[0] {
                    return Err(Error::InvalidGrid);
                }
            }
            if grid[0] < *lo || *grid.last().unwrap() > *hi {
                return Err(Error::InvalidGrid);
            }
        }
        Ok(Self { intervals, grids })
    }

    /// Equispaced grids over the middle `span` fraction of each integrating
    /// density's support; the default span of 0.9 keeps the grid away from
    /// kernel boundary effects.
    pub fn for_densities(q: &[IntegrationDensity], points: usize, span: f64) -> Result<Self> {
        let mut intervals = Vec::with_capacity(q.len());
        let mut grids = Vec::with_capacity(q.len());
        for qi in q {
            let (a, b) = qi.support();
            intervals.push((a, b));
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a) * span;
            let grid: Vec<f64> = if points == 1 {
                vec![mid]
            } else {
                (0..points)
                    .map(|i| mid - half + 2.0 * half * i as f64 / (points - 1) as f64)
                    .collect()
            };
            grids.push(grid);
        }
        Self::new(intervals, grids)
    }

    pub fn dim(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, axis: usize) -> &[f64] {
        &self.grids[axis]
    }

    pub fn interval(&self, axis: usize) -> (f64, f64) {
        self.intervals[axis]
    }
}

/// Tensor-product Gauss–Legendre quadrature of `f` over the box described by
/// `(lo, hi, nodes)` axes.
pub fn quad_integrate<F: FnMut(&[f64]) -> f64>(f: F, axes: &[(f64, f64, usize)]) -> f64 {
    let quad_axes: Vec<QuadAxis> = axes
        .iter()
        .map(|&(lo, hi, nodes)| {
            assert!(nodes >= 2, "quadrature axis needs at least two nodes");
            QuadAxis::new(lo, hi, nodes)
        })
        .collect();
    tensor_integrate(&quad_axes, f)
}

/// Tuning knobs for the marginal-integration engine.
#[derive(Debug, Clone, Copy)]
pub struct AdditiveOptions {
    /// Gauss–Legendre nodes per axis for tensor quadrature.
    pub quad_nodes: usize,
    /// Draw count for the Monte Carlo fallback above three integrated axes.
    pub mc_draws: usize,
    /// Seed for the Monte Carlo fallback.
    pub mc_seed: u64,
}

impl Default for AdditiveOptions {
    fn default() -> Self {
        Self {
            quad_nodes: 48,
            mc_draws: 20_000,
            mc_seed: 0x5eed,
        }
    }
}

const MAX_TENSOR_AXES: usize = 3;

/// Integrates `f(point, q_product)` over all axes except `ell`, with
/// `point[ell]` held at `fixed` and `q_product` the product of the other
/// axes' density values. The callback must fold its own density factors in.
/// Falls back to seeded Monte Carlo when more than three axes are integrated.
pub fn integrate_minus_axis<F: FnMut(&[f64], f64) -> f64>(
    q: &[IntegrationDensity],
    ell: usize,
    fixed: f64,
    opts: &AdditiveOptions,
    stream: u64,
    mut f: F,
) -> f64 {
    let d = q.len();
    let others: Vec<usize> = (0..d).filter(|&j| j != ell).collect();
    let mut point = vec![0.0; d];
    point[ell] = fixed;
    if others.is_empty() {
        return f(&point, 1.0);
    }
    if others.len() <= MAX_TENSOR_AXES {
        let axes: Vec<QuadAxis> = others
            .iter()
            .map(|&j| {
                let (a, b) = q[j].support();
                QuadAxis::new(a, b, opts.quad_nodes)
            })
            .collect();
        tensor_integrate(&axes, |coords| {
            let mut q_prod = 1.0;
            for (slot, &j) in others.iter().enumerate() {
                point[j] = coords[slot];
                q_prod *= q[j].eval(coords[slot]);
            }
            f(&point, q_prod)
        })
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(opts.mc_seed ^ stream.wrapping_mul(0x9E3779B97F4A7C15));
        let mut acc = 0.0;
        for _ in 0..opts.mc_draws {
            let mut q_prod = 1.0;
            for &j in &others {
                let xj = q[j].sample(&mut rng);
                point[j] = xj;
                q_prod *= q[j].eval(xj);
            }
            acc += f(&point, q_prod) / q_prod;
        }
        acc / opts.mc_draws as f64
    }
}

/// The grid-independent integral of the surface against the full product
/// density; computed once per fit and shared by every component.
pub fn shared_constant(
    surface: &dyn Surface,
    q: &[IntegrationDensity],
    opts: &AdditiveOptions,
) -> f64 {
    let d = q.len();
    if d <= MAX_TENSOR_AXES + 1 {
        let axes: Vec<QuadAxis> = q
            .iter()
            .map(|qi| {
                let (a, b) = qi.support();
                QuadAxis::new(a, b, opts.quad_nodes)
            })
            .collect();
        tensor_integrate(&axes, |x| {
            let mut q_prod = 1.0;
            for (qi, &xi) in q.iter().zip(x) {
                q_prod *= qi.eval(xi);
            }
            surface.value(x) * q_prod
        })
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(opts.mc_seed ^ 0xC0FFEE);
        let mut point = vec![0.0; d];
        let mut acc = 0.0;
        for _ in 0..opts.mc_draws {
            for (slot, qi) in q.iter().enumerate() {
                point[slot] = qi.sample(&mut rng);
            }
            acc += surface.value(&point);
        }
        acc / opts.mc_draws as f64
    }
}

/// Marginal-integration estimate of the additive component along `ell`,
/// evaluated at each grid point, reusing a precomputed shared constant.
pub fn marginal_component_with_shared(
    surface: &dyn Surface,
    q: &[IntegrationDensity],
    ell: usize,
    grid: &[f64],
    opts: &AdditiveOptions,
    shared: f64,
) -> Result<Vec<f64>> {
    let d = surface.dim();
    if q.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.len(),
        });
    }
    if ell >= d {
        return Err(Error::AxisOutOfRange { axis: ell, d });
    }
    let values: Vec<f64> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, &t)| {
            let stream = (ell as u64) << 32 | gi as u64;
            let first = integrate_minus_axis(q, ell, t, opts, stream, |point, q_prod| {
                surface.value(point) * q_prod
            });
            first - shared
        })
        .collect();
    Ok(values)
}

/// Marginal-integration estimate of the additive component along `ell`; the
/// shared constant is computed internally.
pub fn marginal_component(
    surface: &dyn Surface,
    q: &[IntegrationDensity],
    ell: usize,
    grid: &[f64],
    opts: &AdditiveOptions,
) -> Result<Vec<f64>> {
    let shared = shared_constant(surface, q, opts);
    marginal_component_with_shared(surface, q, ell, grid, opts, shared)
}

/// The true centred component: `x -> m(x) - ∫ m q`, with the centring
/// integral computed by quadrature against the supplied density.
pub fn true_component_oracle<M: Fn(f64) -> f64>(
    m: M,
    q: &IntegrationDensity,
    nodes: usize,
) -> impl Fn(f64) -> f64 {
    let (a, b) = q.support();
    let gl = GaussLegendre::new(nodes);
    let centre = gl.integrate_composite(a, b, 4, |x| m(x) * q.eval(x));
    move |x| m(x) - centre
}

/// One fitted additive component on its display grid.
#[derive(Debug, Clone, Serialize)]
pub struct AxisComponent {
    /// Zero-based axis index.
    pub axis: usize,
    pub grid: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub ci_lo: Option<Vec<f64>>,
    pub ci_hi: Option<Vec<f64>>,
    pub eta_true: Option<Vec<f64>>,
}

/// Complete marginal-integration fit: per-axis components plus the constant
/// term of the additive predictor.
#[derive(Debug, Clone, Serialize)]
pub struct AdditiveFit {
    pub components: Vec<AxisComponent>,
    pub constant: f64,
}

impl AdditiveFit {
    /// Attaches standard deviations and interval bounds to one component.
    pub fn set_inference(&mut self, axis: usize, sigma: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) {
        let comp = &mut self.components[axis];
        comp.sigma = Some(sigma);
        comp.ci_lo = Some(lo);
        comp.ci_hi = Some(hi);
    }

    pub fn set_truth(&mut self, axis: usize, truth: Vec<f64>) {
        self.components[axis].eta_true = Some(truth);
    }
}

/// Fits every additive component over the domain grids.
pub fn fit_additive(
    surface: &dyn Surface,
    q: &[IntegrationDensity],
    domain: &EvaluationDomain,
    opts: &AdditiveOptions,
) -> Result<AdditiveFit> {
    let d = surface.dim();
    if q.len() != d || domain.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.len().min(domain.dim()),
        });
    }
    let shared = shared_constant(surface, q, opts);
    let mut components = Vec::with_capacity(d);
    for ell in 0..d {
        let grid = domain.grid(ell);
        let eta = marginal_component_with_shared(surface, q, ell, grid, opts, shared)?;
        components.push(AxisComponent {
            axis: ell,
            grid: grid.to_vec(),
            eta,
            sigma: None,
            ci_lo: None,
            ci_hi: None,
            eta_true: None,
        });
    }
    Ok(AdditiveFit {
        components,
        constant: shared,
    })
}

/// Additive prediction: interpolated component values plus the constant.
/// Every coordinate must lie within its component grid.
pub fn additive_predict(fit: &AdditiveFit, x: &[f64]) -> Result<f64> {
    if x.len() != fit.components.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.components.len(),
            got: x.len(),
        });
    }
    let mut acc = fit.constant;
    for (comp, &xi) in fit.components.iter().zip(x) {
        acc += interp_linear(&comp.grid, &comp.eta, xi, comp.axis)?;
    }
    Ok(acc)
}

fn interp_linear(grid: &[f64], values: &[f64], x: f64, axis: usize) -> Result<f64> {
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    if x < lo || x > hi {
        return Err(Error::OutsideGrid {
            axis,
            value: x,
            lo,
            hi,
        });
    }
    let idx = grid.partition_point(|&g| g <= x);
    if idx == 0 {
        return Ok(values[0]);
    }
    if idx == grid.len() {
        return Ok(*values.last().unwrap());
    }
    let (x0, x1) = (grid[idx - 1], grid[idx]);
    let t = (x - x0) / (x1 - x0);
    Ok(values[idx - 1] * (1.0 - t) + values[idx] * t)
}
