//! Plug-in inference for the additive components: bias oracle, variance
//! plug-in, standardized statistics and asymptotic-normal confidence
//! intervals.

use crate::additive::{integrate_minus_axis, AdditiveOptions, IntegrationDensity};
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::kernels::{kernel_moment, kernel_roughness, Kernel1D};
use crate::quad::GaussLegendre;
use crate::regression::RegressionSurface;
use serde::Serialize;

/// `n^(k / (2k + 1))`, the convergence rate of the component estimator.
pub fn convergence_rate(n: usize, k: usize) -> f64 {
    (n as f64).powf(k as f64 / (2.0 * k as f64 + 1.0))
}

/// Inference ingredients for one axis, as attached to a fitted component.
#[derive(Debug, Clone, Serialize)]
pub struct InferencePieces {
    pub axis: usize,
    pub grid: Vec<f64>,
    pub bias: Option<Vec<f64>>,
    pub sigma: Vec<f64>,
    /// `n^(k / (2k + 1))`.
    pub rate: f64,
    /// Normal-quantile multiplier of the interval, 1.96 by default.
    pub z: f64,
}

/// Asymptotic bias of one additive component when the truth is known:
/// `b(x) = (c^k / k!) ∫ u^k K(u) du ((-1)^k m^(k)(x) - ∫ m q^(k))`.
///
/// Needs the k-th analytic derivative of the integrating density; the inner
/// integral is computed once.
pub fn bias_oracle<M, Mk>(
    m_deriv_k: Mk,
    m: M,
    q: &IntegrationDensity,
    kernel: &Kernel1D,
    c: f64,
    k: usize,
) -> Result<impl Fn(f64) -> f64>
where
    M: Fn(f64) -> f64,
    Mk: Fn(f64) -> f64,
{
    let q_deriv = q
        .derivative(k)
        .ok_or(Error::DensityDerivativeUnavailable(k))?;
    let (a, b) = q.support();
    let gl = GaussLegendre::new(64);
    let inner = gl.integrate_composite(a, b, 4, |z| m(z) * q_deriv(z));
    let factorial: f64 = (1..=k).map(|i| i as f64).product::<f64>().max(1.0);
    let moment = kernel_moment(kernel, k);
    let factor = c.powi(k as i32) / factorial * moment;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(move |x: f64| factor * (sign * m_deriv_k(x) - inner))
}

/// IPCW plug-in for the conditional second moment
/// `H(x) = E[psi^2(Y) / G(Y) | X = x]`, via the identity
/// `E[delta psi^2(Z) / G^2(Z) | X] = H(X)`.
pub fn h_plugin(surface: &RegressionSurface) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x: &[f64]| surface.weighted_sum(x, surface.synthetic_sq())
}

/// The functions entering the variance formula; estimates and analytic
/// oracles are interchangeable here.
pub struct SigmaPieces<'a> {
    /// Conditional second moment `H(x)`.
    pub second_moment: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Joint covariate density `f(x)`.
    pub density: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Marginal covariate density of the component axis.
    pub axis_density: &'a (dyn Fn(f64) -> f64 + Sync),
    /// Divisor floor for the two densities.
    pub floor: f64,
}

/// Variance plug-in output plus its flooring diagnostic.
#[derive(Debug, Clone)]
pub struct SigmaEstimate {
    pub values: Vec<f64>,
    /// Quadrature nodes where the joint density was clamped by the floor.
    pub floored_nodes: u64,
}

/// Per-grid-point standard deviation
/// `sigma_l(x_l) = sqrt( (∫K_l^2 / (c f_l(x_l))) ∫ H(x) q_{-l}^2(x_{-l}) / f(x_{-l}|x_l) dx_{-l} )`
/// with the conditional density expanded as `f(x) / f_l(x_l)`.
///
/// `c_eff` is the effective bandwidth constant `h_l n^(1/(2k+1))` of the fit
/// the statistic standardizes, so the same formula stays calibrated under
/// undersmoothing.
pub fn sigma_from_pieces(
    pieces: &SigmaPieces<'_>,
    q: &[IntegrationDensity],
    ell: usize,
    kernel: &Kernel1D,
    c_eff: f64,
    grid: &[f64],
    opts: &AdditiveOptions,
) -> Result<SigmaEstimate> {
    if ell >= q.len() {
        return Err(Error::AxisOutOfRange {
            axis: ell,
            d: q.len(),
        });
    }
    if c_eff <= 0.0 {
        return Err(Error::InvalidBandwidthConstant(c_eff));
    }
    let roughness = kernel_roughness(kernel);
    let mut floored_nodes = 0u64;
    let mut values = Vec::with_capacity(grid.len());
    for (gi, &t) in grid.iter().enumerate() {
        let f_axis_raw = (pieces.axis_density)(t);
        let f_axis = if f_axis_raw < pieces.floor {
            floored_nodes += 1;
            pieces.floor
        } else {
            f_axis_raw
        };
        let stream = 0x51D0u64 ^ ((ell as u64) << 40) ^ (gi as u64);
        let integral = integrate_minus_axis(q, ell, t, opts, stream, |point, q_prod| {
            let h = (pieces.second_moment)(point);
            let f_raw = (pieces.density)(point);
            let f = if f_raw < pieces.floor {
                floored_nodes += 1;
                pieces.floor
            } else {
                f_raw
            };
            let conditional = f / f_axis;
            h * q_prod * q_prod / conditional
        });
        let var = roughness / (c_eff * f_axis) * integral;
        values.push(var.max(0.0).sqrt());
    }
    Ok(SigmaEstimate {
        values,
        floored_nodes,
    })
}

/// Fully estimated variance plug-in: second moment from the fitted surface,
/// densities from kernel density estimates sharing the fit's kernels and
/// bandwidths.
pub fn sigma_plugin(
    surface: &RegressionSurface,
    f_model: &DensityModel,
    f_axis_model: &DensityModel,
    q: &[IntegrationDensity],
    ell: usize,
    grid: &[f64],
    opts: &AdditiveOptions,
) -> Result<SigmaEstimate> {
    let second_moment = h_plugin(surface);
    let density = |x: &[f64]| f_model.eval(x);
    let axis_density = |t: f64| f_axis_model.eval(&[t]);
    let pieces = SigmaPieces {
        second_moment: &second_moment,
        density: &density,
        axis_density: &axis_density,
        floor: f_model.floor().max(f64::MIN_POSITIVE),
    };
    sigma_from_pieces(
        &pieces,
        q,
        ell,
        &surface.kernels()[ell],
        surface.effective_bandwidth_constant(ell),
        grid,
        opts,
    )
}

/// Undersmoothed bandwidth: the reference rate times the slowly vanishing
/// factor `(log n)^(-1/2)`, which removes the asymptotic bias from the
/// standardized component.
pub fn undersmoothed_bandwidth(n: usize, c: f64, k: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    if c <= 0.0 {
        return Err(Error::InvalidBandwidthConstant(c));
    }
    let nf = n as f64;
    Ok(c * nf.powf(-1.0 / (2.0 * k as f64 + 1.0)) / nf.ln().sqrt())
}

/// Pointwise asymptotic-normal interval
/// `eta_hat ± z sigma_hat n^(-k/(2k+1))`.
pub fn normal_ci(
    eta_hat: &[f64],
    sigma_hat: &[f64],
    n: usize,
    k: usize,
    z: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(eta_hat.len(), sigma_hat.len());
    let inv_rate = (n as f64).powf(-(k as f64) / (2.0 * k as f64 + 1.0));
    let mut lo = Vec::with_capacity(eta_hat.len());
    let mut hi = Vec::with_capacity(eta_hat.len());
    for (&e, &s) in eta_hat.iter().zip(sigma_hat) {
        let w = z * s * inv_rate;
        lo.push(e - w);
        hi.push(e + w);
    }
    (lo, hi)
}

/// Standardized component statistic
/// `(n^(k/(2k+1)) (eta_hat - eta_true) - b) / sigma`; asymptotically standard
/// normal under the fitted model.
pub fn standardized_stat(
    eta_hat: f64,
    eta_true: f64,
    b: f64,
    sigma: f64,
    n: usize,
    k: usize,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::ZeroSigma(sigma));
    }
    Ok((convergence_rate(n, k) * (eta_hat - eta_true) - b) / sigma)
}

/// Leading term of the rescaled mean squared error: `b^2 + sigma^2`.
pub fn mse_expansion(b: f64, sigma: f64) -> f64 {
    b * b + sigma * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ProductKernel;
    use crate::regression::{fit_surface, FSource, GSource, PsiSpec, SurfaceSpec};
    use crate::survival::CensoredSample;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn bias_oracle_zero_target() {
        let q = IntegrationDensity::cosine_bump(-1.0, 1.0);
        let b = bias_oracle(|_| 0.0, |_| 0.0, &q, &Kernel1D::epanechnikov(), 1.0, 2).unwrap();
        for x in [-0.5, 0.0, 0.7] {
            assert_eq!(b(x), 0.0);
        }
    }

    #[test]
    fn bias_oracle_matches_hand_formula_with_smooth_density() {
        // m(x) = 0.5 cos^2 x, m'' = -cos 2x, k = 2, Epanechnikov moment 0.2
        let q = IntegrationDensity::cosine_bump(-1.0, 1.0);
        let b = bias_oracle(
            |x: f64| -(2.0 * x).cos(),
            |x: f64| 0.5 * x.cos().powi(2),
            &q,
            &Kernel1D::epanechnikov(),
            1.0,
            2,
        )
        .unwrap();
        // independent Simpson rule for the inner integral ∫ m q''
        let q2 = q.derivative(2).unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut inner = 0.0;
        for i in 0..=n {
            let x = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            inner += w * 0.5 * x.cos().powi(2) * q2(x);
        }
        inner *= h / 3.0;
        for x in [-0.6f64, 0.0, 0.4] {
            let expected = 0.1 * (-(2.0 * x).cos() - inner);
            assert_relative_eq!(b(x), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn bias_oracle_scales_with_constant_to_the_k() {
        let q = IntegrationDensity::cosine_bump(-1.0, 1.0);
        let make = |c: f64| {
            bias_oracle(
                |x: f64| -(2.0 * x).cos(),
                |x: f64| 0.5 * x.cos().powi(2),
                &q,
                &Kernel1D::epanechnikov(),
                c,
                2,
            )
            .unwrap()
        };
        let b1 = make(1.0);
        let b2 = make(2.0);
        assert_relative_eq!(b2(0.3), 4.0 * b1(0.3), max_relative = 1e-12);
    }

    #[test]
    fn bias_oracle_requires_density_derivative() {
        let q = IntegrationDensity::custom_unchecked((-1.0, 1.0), Arc::new(|_| 0.5), Vec::new(), false);
        let res = bias_oracle(|_| 0.0, |_| 0.0, &q, &Kernel1D::epanechnikov(), 1.0, 2);
        assert!(matches!(res, Err(Error::DensityDerivativeUnavailable(2))));
    }

    fn small_surface(psi: PsiSpec) -> RegressionSurface {
        let sample = CensoredSample::from_columns(
            vec![0.3, 0.5, 0.7, 0.2],
            vec![1, 1, 0, 1],
            vec![vec![0.1, 0.4, 0.6, 0.8]],
        )
        .unwrap();
        let spec = SurfaceSpec {
            kernels: vec![Kernel1D::epanechnikov()],
            bandwidths: vec![0.4],
            psi,
            g_source: GSource::Analytic(Arc::new(|_| 1.0)),
            f_source: FSource::Kde {
                kernel: ProductKernel::isotropic(Kernel1D::epanechnikov(), 1),
                bandwidth: 0.4,
                floor: 1e-12,
            },
        };
        fit_surface(&sample, &spec).unwrap()
    }

    #[test]
    fn h_plugin_zero_psi() {
        let surface = small_surface(PsiSpec::custom(|_| 0.0, 0.0, Some(0.0)));
        let h = h_plugin(&surface);
        for x in [0.1, 0.4, 0.7] {
            assert_eq!(h(&[x]), 0.0);
        }
    }

    #[test]
    fn h_plugin_equals_squared_psi_regression_without_censoring() {
        let psi = PsiSpec::indicator(0.55);
        let surface = small_surface(psi.clone());
        let h = h_plugin(&surface);
        // with G = 1 the plug-in is exactly the IPCW regression of psi^2
        let squared = small_surface(PsiSpec::custom(
            move |y| psi.eval(y).powi(2),
            1.0,
            Some(0.55),
        ));
        for x in [0.1, 0.35, 0.6, 0.85] {
            assert_eq!(h(&[x]), squared.weighted_sum(&[x], squared.synthetic()));
        }
    }

    #[test]
    fn sigma_zero_when_second_moment_is_zero() {
        let q = vec![
            IntegrationDensity::uniform(-1.0, 1.0),
            IntegrationDensity::uniform(-1.0, 1.0),
        ];
        let zero = |_: &[f64]| 0.0;
        let f = |_: &[f64]| 0.25;
        let fl = |_: f64| 0.5;
        let pieces = SigmaPieces {
            second_moment: &zero,
            density: &f,
            axis_density: &fl,
            floor: 1e-12,
        };
        let est = sigma_from_pieces(
            &pieces,
            &q,
            0,
            &Kernel1D::epanechnikov(),
            1.0,
            &[-0.5, 0.0, 0.5],
            &AdditiveOptions::default(),
        )
        .unwrap();
        assert!(est.values.iter().all(|&v| v == 0.0));
        assert_eq!(est.floored_nodes, 0);
    }

    #[test]
    fn doubling_the_other_density_quadruples_the_variance() {
        // un-normalized harness: scale q_{-l} pointwise by two
        let h = |x: &[f64]| 1.0 + x[1] * x[1];
        let f = |_: &[f64]| 0.25;
        let fl = |_: f64| 0.5;
        let pieces = SigmaPieces {
            second_moment: &h,
            density: &f,
            axis_density: &fl,
            floor: 1e-12,
        };
        let base = vec![
            IntegrationDensity::uniform(-1.0, 1.0),
            IntegrationDensity::uniform(-1.0, 1.0),
        ];
        let doubled = vec![
            IntegrationDensity::uniform(-1.0, 1.0),
            IntegrationDensity::custom_unchecked(
                (-1.0, 1.0),
                Arc::new(|x: f64| if x.abs() <= 1.0 { 1.0 } else { 0.0 }),
                Vec::new(),
                false,
            ),
        ];
        let opts = AdditiveOptions::default();
        let kern = Kernel1D::epanechnikov();
        let a = sigma_from_pieces(&pieces, &base, 0, &kern, 1.0, &[0.0], &opts).unwrap();
        let b = sigma_from_pieces(&pieces, &doubled, 0, &kern, 1.0, &[0.0], &opts).unwrap();
        // sigma scales by 2, variance by 4
        assert_relative_eq!(b.values[0], 2.0 * a.values[0], max_relative = 1e-12);
    }

    #[test]
    fn undersmoothing_examples() {
        let n = 55;
        let direct = undersmoothed_bandwidth(n, 1.0, 2).unwrap();
        assert_relative_eq!(
            direct,
            (n as f64).powf(-0.2) / (n as f64).ln().sqrt(),
            epsilon = 1e-15
        );
        let ratio = direct / crate::regression::regression_bandwidth(n, 1.0, 2).unwrap();
        assert_relative_eq!(ratio, 1.0 / (n as f64).ln().sqrt(), max_relative = 1e-12);
        for n in [3usize, 10, 1000] {
            assert!(
                undersmoothed_bandwidth(n, 1.0, 2).unwrap()
                    < crate::regression::regression_bandwidth(n, 1.0, 2).unwrap()
            );
        }
        assert!(undersmoothed_bandwidth(2, 1.0, 2).is_err());
    }

    #[test]
    fn normal_ci_degenerate_and_halfwidth() {
        let (lo, hi) = normal_ci(&[0.5], &[0.0], 1000, 2, 1.96);
        assert_eq!(lo[0], 0.5);
        assert_eq!(hi[0], 0.5);

        let (lo, hi) = normal_ci(&[0.5], &[1.2], 1000, 2, 1.96);
        let w = hi[0] - 0.5;
        assert_relative_eq!(w, 1.96 * 1.2 * 1000.0f64.powf(-0.4), epsilon = 1e-12);
        assert_relative_eq!(w, 0.1484, epsilon = 1e-3);
        assert_relative_eq!(0.5 - lo[0], w, epsilon = 1e-15);
    }

    #[test]
    fn ci_symmetry_is_exact_on_representable_widths() {
        // dyadic estimate and width stay exact through the interval arithmetic
        let (lo, hi) = normal_ci(&[0.5, -2.25], &[0.0, 0.0], 64, 2, 2.0);
        assert_eq!(hi[0] - 0.5, 0.5 - lo[0]);
        assert_eq!(hi[1] - (-2.25), -2.25 - lo[1]);
        // n = 1 makes the rate exactly one, so the width is 2 * 0.25 = 0.5
        let (lo, hi) = normal_ci(&[0.375], &[0.25], 1, 2, 2.0);
        assert_eq!(hi[0] - 0.375, 0.375 - lo[0]);
        assert_eq!(hi[0], 0.875);
        assert_eq!(lo[0], -0.125);
    }

    #[test]
    fn ci_halfwidth_scales_with_rate() {
        let sigma = [0.7];
        let (lo1, hi1) = normal_ci(&[0.0], &sigma, 500, 2, 1.96);
        let (lo4, hi4) = normal_ci(&[0.0], &sigma, 2000, 2, 1.96);
        let w1 = (hi1[0] - lo1[0]) / 2.0;
        let w4 = (hi4[0] - lo4[0]) / 2.0;
        assert_relative_eq!(w1 / w4, 4.0f64.powf(0.4), max_relative = 1e-12);
    }

    #[test]
    fn standardized_stat_basics() {
        assert_eq!(standardized_stat(0.4, 0.4, 0.0, 1.0, 100, 2).unwrap(), 0.0);
        assert!(matches!(
            standardized_stat(0.4, 0.4, 0.0, 0.0, 100, 2),
            Err(Error::ZeroSigma(_))
        ));
        // affine: adding sigma * n^{-k/(2k+1)} to the estimate adds one
        let n = 1000;
        let sigma = 1.3;
        let shift = sigma * (n as f64).powf(-0.4);
        let s0 = standardized_stat(0.2, 0.1, 0.05, sigma, n, 2).unwrap();
        let s1 = standardized_stat(0.2 + shift, 0.1, 0.05, sigma, n, 2).unwrap();
        assert_relative_eq!(s1 - s0, 1.0, max_relative = 1e-10);
        // scale invariance under (eta_hat - eta, b, sigma) -> lambda * (...)
        let lam = 3.7;
        let a = standardized_stat(0.3, 0.1, 0.02, 0.9, n, 2).unwrap();
        let b = standardized_stat(lam * 0.2 + 0.1, 0.1, lam * 0.02, lam * 0.9, n, 2).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn mse_expansion_values() {
        assert_eq!(mse_expansion(0.0, 1.0), 1.0);
        assert_relative_eq!(mse_expansion(0.3, 0.4), 0.25);
    }
}
