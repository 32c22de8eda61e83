//! Gauss–Legendre quadrature, one-dimensional and tensor-product.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    /// Exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-style initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        assert!(panels >= 1);
        let width = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            acc += self.integrate(lo, lo + width, &mut f);
        }
        acc
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One axis of a tensor-product quadrature: interval plus node count.
#[derive(Debug, Clone, Copy)]
pub struct QuadAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl QuadAxis {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Self {
        Self { lo, hi, nodes }
    }
}

/// Tensor-product Gauss–Legendre integral of `f` over the box described by
/// `axes`. An empty axis list evaluates `f` once at the empty point, so
/// zero-dimensional marginals degenerate to plain evaluation.
pub fn tensor_integrate<F: FnMut(&[f64]) -> f64>(axes: &[QuadAxis], mut f: F) -> f64 {
    if axes.is_empty() {
        return f(&[]);
    }
    let rules: Vec<(Vec<f64>, Vec<f64>)> = axes
        .iter()
        .map(|ax| {
            let gl = GaussLegendre::new(ax.nodes);
            let half = 0.5 * (ax.hi - ax.lo);
            let mid = 0.5 * (ax.lo + ax.hi);
            let pts: Vec<f64> = gl.nodes.iter().map(|&x| mid + half * x).collect();
            let wts: Vec<f64> = gl.weights.iter().map(|&w| w * half).collect();
            (pts, wts)
        })
        .collect();
    let mut point = vec![0.0; axes.len()];
    tensor_recurse(&rules, 0, &mut point, &mut f)
}

fn tensor_recurse<F: FnMut(&[f64]) -> f64>(
    rules: &[(Vec<f64>, Vec<f64>)],
    depth: usize,
    point: &mut [f64],
    f: &mut F,
) -> f64 {
    let (pts, wts) = &rules[depth];
    let mut acc = 0.0;
    if depth + 1 == rules.len() {
        for (&x, &w) in pts.iter().zip(wts) {
            point[depth] = x;
            acc += w * f(point);
        }
    } else {
        for (&x, &w) in pts.iter().zip(wts) {
            point[depth] = x;
            acc += w * tensor_recurse(rules, depth + 1, point, f);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_axis_polynomials_are_exact() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the exactness limit of an 8-point rule
        let v = gl.integrate(0.0, 1.0, |x| x.powi(15));
        assert_relative_eq!(v, 1.0 / 16.0, max_relative = 1e-13);
        let v = gl.integrate(-2.0, 3.0, |x| 4.0 * x * x * x - x + 2.0);
        assert_relative_eq!(v, 65.0 - 2.5 + 10.0, max_relative = 1e-13);
    }

    #[test]
    fn high_order_rule_handles_kernel_degrees() {
        let gl = GaussLegendre::new(128);
        let v = gl.integrate(-1.0, 1.0, |x| x.powi(20) * (1.0 - x * x));
        assert_relative_eq!(v, 2.0 / 21.0 - 2.0 / 23.0, max_relative = 1e-12);
    }

    #[test]
    fn composite_matches_single_panel_for_smooth_integrands() {
        let gl = GaussLegendre::new(32);
        let a = gl.integrate(-1.0, 1.0, |x| (3.0 * x).cos());
        let b = gl.integrate_composite(-1.0, 1.0, 4, |x| (3.0 * x).cos());
        assert_relative_eq!(a, b, max_relative = 1e-13);
        assert_relative_eq!(a, 2.0 * (3.0f64).sin() / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn tensor_constant_over_unit_square() {
        let axes = [QuadAxis::new(0.0, 1.0, 16), QuadAxis::new(0.0, 1.0, 16)];
        let v = tensor_integrate(&axes, |_| 1.0);
        assert_relative_eq!(v, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn tensor_separable_polynomial() {
        let axes = [QuadAxis::new(0.0, 1.0, 16), QuadAxis::new(0.0, 1.0, 16)];
        let v = tensor_integrate(&axes, |x| x[0] * x[1]);
        assert_relative_eq!(v, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn tensor_empty_axis_list_is_plain_evaluation() {
        let v = tensor_integrate(&[], |x| {
            assert!(x.is_empty());
            42.0
        });
        assert_relative_eq!(v, 42.0);
    }

    #[test]
    fn tensor_three_dimensional() {
        let axes = [
            QuadAxis::new(-1.0, 1.0, 12),
            QuadAxis::new(0.0, 2.0, 12),
            QuadAxis::new(0.0, 1.0, 12),
        ];
        let v = tensor_integrate(&axes, |x| x[0] * x[0] + x[1] + x[2]);
        // 2/3*2*1 + 2*2*1 + 2*2*1/2
        assert_relative_eq!(v, 4.0 / 3.0 + 4.0 + 2.0, max_relative = 1e-13);
    }
}
