//! Multivariate kernel density estimation for the covariates.

use crate::error::{Error, Result};
use crate::kernels::{Kernel1D, ProductKernel};
use std::sync::atomic::{AtomicU64, Ordering};

/// Fitted kernel density estimator with a single scalar bandwidth shared by
/// all axes: `f(x) = (1 / (n h^d)) * sum_j K((x - X_j) / h)`.
///
/// `floor` guards divisions by near-zero density values; evaluations that hit
/// the floor are counted in a diagnostic.
#[derive(Debug)]
pub struct DensityModel {
    x: Vec<Vec<f64>>,
    kernel: ProductKernel,
    bandwidth: f64,
    floor: f64,
    order_axis0: Vec<u32>,
    sorted_axis0: Vec<f64>,
    floored: AtomicU64,
}

impl Clone for DensityModel {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            kernel: self.kernel.clone(),
            bandwidth: self.bandwidth,
            floor: self.floor,
            order_axis0: self.order_axis0.clone(),
            sorted_axis0: self.sorted_axis0.clone(),
            floored: AtomicU64::new(self.floored.load(Ordering::Relaxed)),
        }
    }
}

/// Default divisor floor applied where a density estimate is used as a
/// denominator.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-12;

/// Bandwidth rule for the density estimator:
/// `h = c' (log n / n)^(1 / (2 k' + d))` for the kernel order `k'`.
pub fn density_bandwidth(n: usize, c_prime: f64, k_prime: usize, d: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if c_prime <= 0.0 {
        return Err(Error::InvalidBandwidthConstant(c_prime));
    }
    let nf = n as f64;
    Ok(c_prime * (nf.ln() / nf).powf(1.0 / (2.0 * k_prime as f64 + d as f64)))
}

/// Fits the kernel density estimator on column-major data.
pub fn fit_kde(x: Vec<Vec<f64>>, kernel: ProductKernel, h: f64) -> Result<DensityModel> {
    fit_kde_floored(x, kernel, h, DEFAULT_DENSITY_FLOOR)
}

/// As [`fit_kde`] with an explicit divisor floor (zero disables flooring).
pub fn fit_kde_floored(
    x: Vec<Vec<f64>>,
    kernel: ProductKernel,
    h: f64,
    floor: f64,
) -> Result<DensityModel> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidBandwidth(h));
    }
    if kernel.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: kernel.dim(),
        });
    }
    let n = x.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptySample);
    }
    for col in &x {
        if col.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: col.len(),
            });
        }
    }
    let mut order_axis0: Vec<u32> = (0..n as u32).collect();
    order_axis0.sort_by(|&a, &b| x[0][a as usize].total_cmp(&x[0][b as usize]));
    let sorted_axis0: Vec<f64> = order_axis0.iter().map(|&i| x[0][i as usize]).collect();
    Ok(DensityModel {
        x,
        kernel,
        bandwidth: h,
        floor,
        order_axis0,
        sorted_axis0,
        floored: AtomicU64::new(0),
    })
}

/// One-dimensional marginal density estimator for a single covariate column.
pub fn marginal_kde(x_col: Vec<f64>, kernel: Kernel1D, h: f64) -> Result<DensityModel> {
    fit_kde(vec![x_col], ProductKernel::new(vec![kernel]), h)
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.sorted_axis0.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Number of floored evaluations so far.
    pub fn floored_count(&self) -> u64 {
        self.floored.load(Ordering::Relaxed)
    }

    /// Indices of data points whose axis-0 coordinate lies within the kernel
    /// window around `x0`, in ascending data order.
    fn candidates(&self, x0: f64) -> Vec<u32> {
        let r = self.bandwidth * self.kernel.factors[0].support_radius;
        let lo = self.sorted_axis0.partition_point(|&v| v < x0 - r);
        let hi = self.sorted_axis0.partition_point(|&v| v <= x0 + r);
        let mut idx: Vec<u32> = self.order_axis0[lo..hi].to_vec();
        idx.sort_unstable();
        idx
    }

    /// Raw density evaluation. Contributions are accumulated in ascending
    /// data order so that pruned and naive evaluation agree bit for bit.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let n = self.n();
        let h = self.bandwidth;
        let mut acc = 0.0;
        let mut u = vec![0.0; self.dim()];
        for j in self.candidates(x[0]) {
            let j = j as usize;
            for (axis, ui) in u.iter_mut().enumerate() {
                *ui = (x[axis] - self.x[axis][j]) / h;
            }
            acc += self.kernel.eval(&u);
        }
        acc / (n as f64 * h.powi(self.dim() as i32))
    }

    /// Density evaluation clamped from below by the divisor floor; the raw
    /// value is returned unchanged when the floor is zero.
    pub fn floored_eval(&self, x: &[f64]) -> f64 {
        let raw = self.eval(x);
        if self.floor > 0.0 && raw < self.floor {
            self.floored.fetch_add(1, Ordering::Relaxed);
            self.floor
        } else {
            raw
        }
    }
}
