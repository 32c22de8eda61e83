//! Censored samples, Kaplan–Meier estimation of the censoring survival
//! function, and the IPCW response transform.

use crate::error::{Error, Result};
use crate::regression::PsiSpec;
use serde::{Deserialize, Serialize};

/// Observed right-censored sample: triples `(z_i, delta_i, x_i)` with
/// `z = min(y, c)` and `delta = 1` when the event time was observed.
///
/// Covariates are stored column-major (one vector per axis), which keeps the
/// smoothing loops cache-friendly.
#[derive(Debug, Clone)]
pub struct CensoredSample {
    z: Vec<f64>,
    delta: Vec<u8>,
    x: Vec<Vec<f64>>,
}

impl CensoredSample {
    /// Builds a sample from per-observation rows, validating times, event
    /// indicators and covariate lengths.
    pub fn from_rows(rows: Vec<(f64, u8, Vec<f64>)>, d: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = rows.len();
        let mut z = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        let mut x = vec![Vec::with_capacity(n); d];
        for (row, (zi, di, xi)) in rows.into_iter().enumerate() {
            if !zi.is_finite() || zi < 0.0 {
                return Err(Error::InvalidTime { row, value: zi });
            }
            if di > 1 {
                return Err(Error::InvalidDelta {
                    row,
                    value: di as f64,
                });
            }
            if xi.len() != d {
                return Err(Error::CovariateLength {
                    row,
                    got: xi.len(),
                    expected: d,
                });
            }
            z.push(zi);
            delta.push(di);
            for (col, v) in x.iter_mut().zip(xi) {
                if !v.is_finite() {
                    return Err(Error::InvalidTime { row, value: v });
                }
                col.push(v);
            }
        }
        Ok(Self { z, delta, x })
    }

    /// Builds a sample from already-columnar data; lengths must agree.
    pub fn from_columns(z: Vec<f64>, delta: Vec<u8>, x: Vec<Vec<f64>>) -> Result<Self> {
        let n = z.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if delta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: delta.len(),
            });
        }
        for col in &x {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
        }
        for (row, &zi) in z.iter().enumerate() {
            if !zi.is_finite() || zi < 0.0 {
                return Err(Error::InvalidTime { row, value: zi });
            }
        }
        for (row, &di) in delta.iter().enumerate() {
            if di > 1 {
                return Err(Error::InvalidDelta {
                    row,
                    value: di as f64,
                });
            }
        }
        Ok(Self { z, delta, x })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn delta(&self) -> &[u8] {
        &self.delta
    }

    /// Covariate column for one axis.
    pub fn x_col(&self, axis: usize) -> &[f64] {
        &self.x[axis]
    }

    pub fn x_cols(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Covariate vector of one observation.
    pub fn x_row(&self, row: usize) -> Vec<f64> {
        self.x.iter().map(|col| col[row]).collect()
    }

    /// Fraction of uncensored observations.
    pub fn uncensored_rate(&self) -> f64 {
        self.delta.iter().map(|&d| d as u64).sum::<u64>() as f64 / self.n() as f64
    }

    pub fn max_z(&self) -> f64 {
        self.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Right-continuous, piecewise-constant survival function starting at one.
///
/// `values[j]` is the value on `[jump_times[j], jump_times[j+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    pub jump_times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSurvival {
    /// Constant survival, identically one.
    pub fn one() -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Right-continuous step evaluation; anything below the first jump is one.
    pub fn eval(&self, y: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&t| t <= y);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }
}

/// Right-continuous step evaluation (free-function form of [`StepSurvival::eval`]).
pub fn eval_survival(s: &StepSurvival, y: f64) -> f64 {
    s.eval(y)
}

/// Kaplan–Meier estimator of the censoring survival function.
///
/// Each censored observation at time `t` contributes the factor
/// `(N(t) - 1) / N(t)` with `N(t) = #{j : z_j >= t}`, and the estimate at `y`
/// is the product over censored observations with `t <= y` (empty product is
/// one). Tied censored times each contribute their own factor with the same
/// `N`. The estimate hits zero at `y` exactly when the sample maximum is a
/// unique censored observation at or below `y`.
pub fn fit_censoring_survival(sample: &CensoredSample) -> Result<StepSurvival> {
    if sample.n() == 0 {
        return Err(Error::EmptySample);
    }
    let n = sample.n();
    let mut sorted_z: Vec<f64> = sample.z().to_vec();
    sorted_z.sort_by(f64::total_cmp);

    let mut censored: Vec<f64> = sample
        .z()
        .iter()
        .zip(sample.delta())
        .filter(|(_, &d)| d == 0)
        .map(|(&z, _)| z)
        .collect();
    censored.sort_by(f64::total_cmp);

    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut cum = 1.0;
    let mut i = 0;
    while i < censored.len() {
        let t = censored[i];
        let at_risk = (n - sorted_z.partition_point(|&v| v < t)) as f64;
        while i < censored.len() && censored[i] == t {
            cum *= (at_risk - 1.0) / at_risk;
            i += 1;
        }
        jump_times.push(t);
        values.push(cum);
    }
    Ok(StepSurvival { jump_times, values })
}

/// Empirical survival function of the observed times `z`.
pub fn empirical_z_survival(sample: &CensoredSample) -> Result<StepSurvival> {
    if sample.n() == 0 {
        return Err(Error::EmptySample);
    }
    let n = sample.n();
    let mut sorted_z: Vec<f64> = sample.z().to_vec();
    sorted_z.sort_by(f64::total_cmp);
    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < n {
        let t = sorted_z[i];
        while i < n && sorted_z[i] == t {
            i += 1;
        }
        jump_times.push(t);
        values.push((n - i) as f64 / n as f64);
    }
    Ok(StepSurvival { jump_times, values })
}

/// The IPCW response vector `delta_i psi(z_i)^power / g(z_i)^power` with the
/// convention `0 / 0 = 0`: a censored observation contributes zero no matter
/// what `g` evaluates to.
///
/// `power` one gives the synthetic response of the regression surface;
/// power two serves the conditional second-moment plug-in.
pub fn ipcw_response<G: Fn(f64) -> f64>(
    sample: &CensoredSample,
    g: G,
    psi: &PsiSpec,
    power: u32,
) -> Result<Vec<f64>> {
    assert!(power == 1 || power == 2, "power must be 1 or 2");
    let mut out = Vec::with_capacity(sample.n());
    for (row, (&z, &delta)) in sample.z().iter().zip(sample.delta()).enumerate() {
        if delta == 0 {
            out.push(0.0);
            continue;
        }
        let num = psi.eval(z).powi(power as i32);
        if num == 0.0 {
            out.push(0.0);
            continue;
        }
        let gz = g(z);
        if gz <= 0.0 {
            return Err(Error::InconsistentCensoringSurvival { row, z });
        }
        out.push(num / gz.powi(power as i32));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(z: &[f64], delta: &[u8]) -> CensoredSample {
        let x = vec![vec![0.0; z.len()]];
        CensoredSample::from_columns(z.to_vec(), delta.to_vec(), x).unwrap()
    }

    /// Hand product-limit formula: product over censored z_i <= y of
    /// (N(z_i) - 1) / N(z_i), factors multiplied in ascending time order.
    fn hand_product_limit(z: &[f64], delta: &[u8], y: f64) -> f64 {
        let mut censored: Vec<f64> = z
            .iter()
            .zip(delta)
            .filter(|(_, &d)| d == 0)
            .map(|(&t, _)| t)
            .collect();
        censored.sort_by(f64::total_cmp);
        let mut prod = 1.0;
        for &t in censored.iter().filter(|&&t| t <= y) {
            let at_risk = z.iter().filter(|&&v| v >= t).count() as f64;
            prod *= (at_risk - 1.0) / at_risk;
        }
        prod
    }

    #[test]
    fn all_uncensored_gives_identity() {
        let s = sample(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        let g = fit_censoring_survival(&s).unwrap();
        for y in [-1.0, 0.0, 1.5, 2.0, 10.0] {
            assert_eq!(g.eval(y), 1.0);
        }
    }

    #[test]
    fn single_censored_midpoint() {
        let s = sample(&[1.0, 2.0, 3.0], &[1, 0, 1]);
        let g = fit_censoring_survival(&s).unwrap();
        assert_eq!(g.eval(1.9), 1.0);
        assert_eq!(g.eval(2.0), 0.5);
        assert_eq!(g.eval(5.0), 0.5);
    }

    #[test]
    fn fully_censored_pair_reaches_zero() {
        let s = sample(&[1.0, 2.0], &[0, 0]);
        let g = fit_censoring_survival(&s).unwrap();
        assert_eq!(g.eval(0.5), 1.0);
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.eval(1.5), 0.5);
        assert_eq!(g.eval(2.0), 0.0);
        assert_eq!(g.eval(3.0), 0.0);
    }

    #[test]
    fn eval_before_all_jumps_is_one() {
        let s = sample(&[1.0, 2.0], &[0, 1]);
        let g = fit_censoring_survival(&s).unwrap();
        assert_eq!(g.eval(-1.0), 1.0);
        assert_eq!(eval_survival(&g, -1.0), 1.0);
    }

    #[test]
    fn tied_censored_observations_each_contribute() {
        // literal per-observation product: both factors use N(2) = 2
        let s = sample(&[2.0, 2.0], &[0, 0]);
        let g = fit_censoring_survival(&s).unwrap();
        assert_eq!(g.eval(2.0), 0.25);
    }

    #[test]
    fn zero_value_characterization_distinct_times() {
        // zero exactly when the unique maximum is censored
        let s = sample(&[1.0, 3.0, 2.0], &[1, 0, 0]);
        let g = fit_censoring_survival(&s).unwrap();
        assert_eq!(g.eval(3.0), 0.0);
        assert!(g.eval(2.0) > 0.0);

        let s = sample(&[1.0, 3.0, 2.0], &[1, 1, 0]);
        let g = fit_censoring_survival(&s).unwrap();
        assert!(g.eval(3.0) > 0.0);
    }

    #[test]
    fn exhaustive_patterns_match_hand_formula_exactly() {
        // every censoring pattern for distinct-time samples up to n = 6,
        // compared with zero tolerance
        for n in 1..=6usize {
            let z: Vec<f64> = (0..n).map(|i| (i + 1) as f64 * 0.7).collect();
            for mask in 0..(1u32 << n) {
                let delta: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let s = sample(&z, &delta);
                let g = fit_censoring_survival(&s).unwrap();
                for i in 0..n {
                    let y = z[i];
                    assert_eq!(g.eval(y), hand_product_limit(&z, &delta, y));
                    let y = z[i] + 0.1;
                    assert_eq!(g.eval(y), hand_product_limit(&z, &delta, y));
                }
                assert_eq!(g.eval(0.0), 1.0);
            }
        }
    }

    #[test]
    fn empirical_survival_examples() {
        let s = sample(&[1.0, 2.0], &[1, 1]);
        let h = empirical_z_survival(&s).unwrap();
        assert_eq!(h.eval(1.5), 0.5);
        assert_eq!(h.eval(3.0), 0.0);
        let s = sample(&[5.0, 5.0, 5.0], &[1, 0, 1]);
        let h = empirical_z_survival(&s).unwrap();
        assert_eq!(h.eval(4.0), 1.0);
        assert_eq!(h.eval(5.0), 0.0);
    }

    #[test]
    fn ipcw_response_conventions() {
        let s = sample(&[0.5, 0.5], &[0, 1]);
        let psi = PsiSpec::indicator(1.0);
        let half = StepSurvival {
            jump_times: vec![0.0],
            values: vec![0.5],
        };
        let v = ipcw_response(&s, |y| half.eval(y), &psi, 1).unwrap();
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 2.0);
        let v = ipcw_response(&s, |y| half.eval(y), &psi, 2).unwrap();
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 4.0);
    }

    #[test]
    fn ipcw_rejects_zero_survival_at_uncensored_time() {
        let s = sample(&[0.5], &[1]);
        let psi = PsiSpec::indicator(1.0);
        let err = ipcw_response(&s, |_| 0.0, &psi, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentCensoringSurvival { row: 0, .. }
        ));
    }

    #[test]
    fn ipcw_zero_psi_tolerates_zero_survival() {
        // 0/0 = 0 convention
        let s = sample(&[2.0], &[1]);
        let psi = PsiSpec::indicator(1.0); // psi(2.0) = 0
        let v = ipcw_response(&s, |_| 0.0, &psi, 1).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn sample_validation() {
        assert!(matches!(
            CensoredSample::from_rows(vec![], 1),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            CensoredSample::from_rows(vec![(-1.0, 1, vec![0.0])], 1),
            Err(Error::InvalidTime { row: 0, .. })
        ));
        assert!(matches!(
            CensoredSample::from_rows(vec![(1.0, 2, vec![0.0])], 1),
            Err(Error::InvalidDelta { row: 0, .. })
        ));
        assert!(matches!(
            CensoredSample::from_rows(vec![(1.0, 1, vec![0.0, 1.0])], 1),
            Err(Error::CovariateLength { row: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn survival_is_monotone_and_in_unit_interval(
            times in proptest::collection::vec(0.0f64..10.0, 1..40),
            mask in proptest::collection::vec(0u8..2, 40),
        ) {
            let delta: Vec<u8> = mask.iter().take(times.len()).cloned().collect();
            let s = sample(&times, &delta);
            let g = fit_censoring_survival(&s).unwrap();
            let mut prev = 1.0;
            for j in 0..g.jump_times.len() {
                let v = g.values[j];
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
            // one before the first censored observation
            let min_censored = times.iter().zip(&delta)
                .filter(|(_, &d)| d == 0)
                .map(|(&t, _)| t)
                .fold(f64::INFINITY, f64::min);
            if min_censored.is_finite() {
                prop_assert_eq!(g.eval(min_censored - 1e-9), 1.0);
            }
        }

        #[test]
        fn random_patterns_match_hand_formula(
            seed in 0u64..500,
            n in 1usize..7,
        ) {
            // distinct times from a seeded shuffle
            let mut z: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 101) as f64 / 7.0 + 0.01).collect();
            z.dedup();
            let delta: Vec<u8> = (0..z.len()).map(|i| ((seed >> i) & 1) as u8).collect();
            let s = sample(&z, &delta);
            let g = fit_censoring_survival(&s).unwrap();
            for &t in &z {
                prop_assert_eq!(g.eval(t), hand_product_limit(&z, &delta, t));
            }
        }
    }
}
