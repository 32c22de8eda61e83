//! Compactly supported smoothing kernels.
//!
//! All built-in kernels live on `[-1, 1]`. A kernel of order `k` integrates
//! to one and has vanishing moments `1..k-1`; higher orders are obtained by
//! multiplying a base kernel with an even polynomial whose coefficients solve
//! the moment linear system.

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use serde::{Deserialize, Serialize};

/// Kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Epanechnikov,
    Uniform,
    PolynomialHigherOrder,
}

/// A one-dimensional kernel with compact support `[-support_radius, support_radius]`.
///
/// For the polynomial family, `coefficients[j]` multiplies `u^(2j)` on top of
/// the Epanechnikov-shaped base weight; the other families ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel1D {
    pub family: KernelFamily,
    pub order: usize,
    pub support_radius: f64,
    pub coefficients: Vec<f64>,
}

impl Kernel1D {
    /// The Epanechnikov kernel `0.75 (1 - u^2)` on `[-1, 1]`, order 2.
    pub fn epanechnikov() -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            order: 2,
            support_radius: 1.0,
            coefficients: Vec::new(),
        }
    }

    /// The uniform kernel `1/2` on `[-1, 1]`, order 2.
    pub fn uniform() -> Self {
        Self {
            family: KernelFamily::Uniform,
            order: 2,
            support_radius: 1.0,
            coefficients: Vec::new(),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        eval_kernel(self, u)
    }

    pub fn moment(&self, j: usize) -> f64 {
        kernel_moment(self, j)
    }

    pub fn roughness(&self) -> f64 {
        kernel_roughness(self)
    }
}

/// Evaluates `K(u)`; zero outside the compact support.
pub fn eval_kernel(kernel: &Kernel1D, u: f64) -> f64 {
    if u.abs() > kernel.support_radius {
        return 0.0;
    }
    match kernel.family {
        KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u),
        KernelFamily::Uniform => 0.5,
        KernelFamily::PolynomialHigherOrder => {
            let u2 = u * u;
            // even polynomial in u^2, Horner from the top coefficient
            let mut poly = 0.0;
            for &c in kernel.coefficients.iter().rev() {
                poly = poly * u2 + c;
            }
            0.75 * (1.0 - u2) * poly
        }
    }
}

fn quadrature_on_support<F: FnMut(f64) -> f64>(kernel: &Kernel1D, f: F) -> f64 {
    // 128-node composite rule on the support; exact for every polynomial
    // degree that arises from the built-in families.
    let gl = GaussLegendre::new(128);
    gl.integrate_composite(-kernel.support_radius, kernel.support_radius, 2, f)
}

/// `∫ u^j K(u) du` over the support, by high-resolution quadrature.
pub fn kernel_moment(kernel: &Kernel1D, j: usize) -> f64 {
    quadrature_on_support(kernel, |u| u.powi(j as i32) * eval_kernel(kernel, u))
}

/// `∫ K(u)^2 du` over the support.
pub fn kernel_roughness(kernel: &Kernel1D) -> f64 {
    quadrature_on_support(kernel, |u| {
        let k = eval_kernel(kernel, u);
        k * k
    })
}

/// Multiplies `base` by an even polynomial so that moments `1..target_order-1`
/// vanish while the integral stays one. `target_order` must be even and at
/// least the base order; when they are equal the base is returned unchanged.
pub fn construct_higher_order(base: &Kernel1D, target_order: usize) -> Result<Kernel1D> {
    if target_order % 2 != 0 || target_order < base.order {
        return Err(Error::InvalidKernelOrder(target_order));
    }
    if target_order == base.order {
        return Ok(base.clone());
    }
    let m = target_order / 2;
    // M[i][j] = ∫ u^(2(i+j)) base(u) du, rhs = e_0
    let moments: Vec<f64> = (0..2 * m - 1).map(|r| kernel_moment(base, 2 * r)).collect();
    let mut mat = vec![vec![0.0; m]; m];
    for (i, row) in mat.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = moments[i + j];
        }
    }
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let sol = solve_dense(mat, rhs)?;

    // Fold the correction polynomial into any polynomial part the base
    // already carries, so repeated construction keeps a single coefficient
    // list over the Epanechnikov-shaped weight.
    let coefficients = match base.family {
        KernelFamily::PolynomialHigherOrder => poly_mul(&base.coefficients, &sol),
        KernelFamily::Epanechnikov => sol,
        KernelFamily::Uniform => {
            // express 0.5 * poly(u^2) as 0.75 (1 - u^2) * q(u^2):
            // no exact finite representation exists, so solve directly on the
            // Epanechnikov base instead of the uniform one.
            return construct_higher_order(&Kernel1D::epanechnikov(), target_order);
        }
    };
    Ok(Kernel1D {
        family: KernelFamily::PolynomialHigherOrder,
        order: target_order,
        support_radius: base.support_radius,
        coefficients,
    })
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-13 {
            return Err(Error::SingularMomentSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Tensor product of one-dimensional kernels, one factor per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductKernel {
    pub factors: Vec<Kernel1D>,
}

impl ProductKernel {
    pub fn new(factors: Vec<Kernel1D>) -> Self {
        assert!(!factors.is_empty(), "product kernel needs at least one axis");
        Self { factors }
    }

    /// Same one-dimensional kernel on every axis.
    pub fn isotropic(kernel: Kernel1D, d: usize) -> Self {
        Self::new(vec![kernel; d])
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.factors.len());
        let mut prod = 1.0;
        for (k, &ui) in self.factors.iter().zip(u) {
            prod *= eval_kernel(k, ui);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{tensor_integrate, QuadAxis};
    use approx::assert_relative_eq;

    #[test]
    fn epanechnikov_pointwise() {
        let k = Kernel1D::epanechnikov();
        assert_relative_eq!(eval_kernel(&k, 0.0), 0.75);
        assert_eq!(eval_kernel(&k, 2.0), 0.0);
        assert_eq!(eval_kernel(&k, -1.5), 0.0);
        assert_relative_eq!(eval_kernel(&k, 0.5), 0.75 * 0.75);
    }

    #[test]
    fn epanechnikov_moments() {
        let k = Kernel1D::epanechnikov();
        assert_relative_eq!(kernel_moment(&k, 0), 1.0, epsilon = 1e-12);
        assert!(kernel_moment(&k, 1).abs() < 1e-14);
        // closed form: ∫ 0.75 u^2 (1 - u^2) du on [-1, 1] = 1/5
        assert_relative_eq!(kernel_moment(&k, 2), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn roughness_closed_forms() {
        assert_relative_eq!(
            kernel_roughness(&Kernel1D::epanechnikov()),
            0.6,
            epsilon = 1e-12
        );
        assert_relative_eq!(kernel_roughness(&Kernel1D::uniform()), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn order_four_coefficients_match_hand_solution() {
        // 2x2 moment system [[1, 1/5], [1/5, 3/35]] a = e0 has the exact
        // solution a = (15/8, -35/8).
        let k4 = construct_higher_order(&Kernel1D::epanechnikov(), 4).unwrap();
        assert_eq!(k4.order, 4);
        assert_relative_eq!(k4.coefficients[0], 15.0 / 8.0, epsilon = 1e-12);
        assert_relative_eq!(k4.coefficients[1], -35.0 / 8.0, epsilon = 1e-12);
        assert_relative_eq!(eval_kernel(&k4, 0.0), 0.75 * 15.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn order_four_moments_vanish() {
        let k4 = construct_higher_order(&Kernel1D::epanechnikov(), 4).unwrap();
        assert_relative_eq!(kernel_moment(&k4, 0), 1.0, epsilon = 1e-10);
        for j in 1..4 {
            assert!(kernel_moment(&k4, j).abs() < 1e-8, "moment {j} must vanish");
        }
        assert!(kernel_moment(&k4, 4).abs() > 1e-3);
    }

    #[test]
    fn order_six_coefficients_match_hand_solution() {
        // 3x3 moment system solved by hand: (175/64, -525/32, 1155/64).
        let k6 = construct_higher_order(&Kernel1D::epanechnikov(), 6).unwrap();
        assert_relative_eq!(k6.coefficients[0], 175.0 / 64.0, epsilon = 1e-11);
        assert_relative_eq!(k6.coefficients[1], -525.0 / 32.0, epsilon = 1e-11);
        assert_relative_eq!(k6.coefficients[2], 1155.0 / 64.0, epsilon = 1e-11);
    }

    #[test]
    fn order_six_moments_vanish() {
        let k6 = construct_higher_order(&Kernel1D::epanechnikov(), 6).unwrap();
        assert_relative_eq!(kernel_moment(&k6, 0), 1.0, epsilon = 1e-10);
        for j in 1..6 {
            assert!(kernel_moment(&k6, j).abs() < 1e-8, "moment {j} must vanish");
        }
    }

    #[test]
    fn order_six_roughness_against_independent_quadrature() {
        let k6 = construct_higher_order(&Kernel1D::epanechnikov(), 6).unwrap();
        // trapezoid oracle, deliberately independent of Gauss-Legendre
        let n = 2_000_000usize;
        let h = 2.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let u = -1.0 + i as f64 * h;
            let v = eval_kernel(&k6, u);
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * v * v;
        }
        assert_relative_eq!(kernel_roughness(&k6), acc * h, epsilon = 1e-8);
    }

    #[test]
    fn higher_order_is_idempotent_at_current_order() {
        let base = Kernel1D::epanechnikov();
        let same = construct_higher_order(&base, 2).unwrap();
        assert_eq!(same, base);
        let k4 = construct_higher_order(&base, 4).unwrap();
        let again = construct_higher_order(&k4, 4).unwrap();
        assert_eq!(again, k4);
    }

    #[test]
    fn raising_an_already_raised_kernel() {
        let k4 = construct_higher_order(&Kernel1D::epanechnikov(), 4).unwrap();
        let k6 = construct_higher_order(&k4, 6).unwrap();
        assert_relative_eq!(kernel_moment(&k6, 0), 1.0, epsilon = 1e-10);
        for j in 1..6 {
            assert!(kernel_moment(&k6, j).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_base_falls_back_to_epanechnikov_shape() {
        let k4 = construct_higher_order(&Kernel1D::uniform(), 4).unwrap();
        assert_relative_eq!(kernel_moment(&k4, 0), 1.0, epsilon = 1e-10);
        assert!(kernel_moment(&k4, 2).abs() < 1e-8);
    }

    #[test]
    fn odd_or_shrinking_target_order_rejected() {
        let base = Kernel1D::epanechnikov();
        assert!(construct_higher_order(&base, 3).is_err());
        let k4 = construct_higher_order(&base, 4).unwrap();
        assert!(construct_higher_order(&k4, 2).is_err());
    }

    #[test]
    fn product_kernel_integrates_to_one() {
        let k6 = construct_higher_order(&Kernel1D::epanechnikov(), 6).unwrap();
        let pk = ProductKernel::new(vec![Kernel1D::epanechnikov(), k6]);
        let axes = [QuadAxis::new(-1.0, 1.0, 64), QuadAxis::new(-1.0, 1.0, 64)];
        let v = tensor_integrate(&axes, |x| pk.eval(x));
        assert_relative_eq!(v, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn bounded_on_support() {
        for k in [
            Kernel1D::epanechnikov(),
            Kernel1D::uniform(),
            construct_higher_order(&Kernel1D::epanechnikov(), 6).unwrap(),
        ] {
            let sup = (0..=1000)
                .map(|i| eval_kernel(&k, -1.0 + 2.0 * i as f64 / 1000.0).abs())
                .fold(0.0f64, f64::max);
            assert!(sup.is_finite() && sup > 0.0);
        }
    }
}
