//! Standard errors and intervals: a delta method over the stacked probit
//! sandwich, and the nonparametric row bootstrap with percentile intervals.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, ProbitCoefVector};
use crate::numerics::{default_step_scale, numeric_jacobian, Matrix, RngStream};
use crate::probit::{stacked_score_covariance, ProbitFit};
use crate::identification::lambda_hat;

/// Standard errors of `map(Λ̂)` given the covariance `sigma` of
/// `√n (Λ̂ − Λ)`: the square roots of `diag(J Σ Jᵀ)/n`, with `J` the
/// central-difference Jacobian of `map` at `Λ̂`.
///
/// A failure of `map` at `Λ̂` itself is returned as is; a failure at a
/// perturbed point means `Λ̂` sits too close to the edge of the feasible
/// region and is reported as [`Error::FeasibilityBoundary`].
pub fn delta_method_from_covariance<F>(lambda: &[f64], sigma: &Matrix, n: usize, map: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if sigma.nrows() != lambda.len() || sigma.ncols() != lambda.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{} for {} parameters",
            sigma.nrows(),
            sigma.ncols(),
            lambda.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    map(lambda)?;
    let jac = numeric_jacobian(&map, lambda, default_step_scale())
        .map_err(|e| Error::FeasibilityBoundary { coordinate: e.coordinate })?;
    let cov = &jac * sigma * jac.transpose();
    Ok(cov.diagonal().iter().map(|v| (v.max(0.0) / n as f64).sqrt()).collect())
}

/// Delta-method standard errors of an identification map applied to the
/// stacked `Λ̂` of two reduced probits fitted on the same rows.
pub fn delta_method_se<F>(fit_x: &ProbitFit, fit_y: &ProbitFit, map: F) -> Result<(f64, f64)>
where
    F: Fn(&ProbitCoefVector) -> Result<(f64, f64)>,
{
    let sigma = stacked_score_covariance(fit_x, fit_y)?;
    let lambda = lambda_hat(fit_x, fit_y).to_array();
    let se = delta_method_from_covariance(&lambda, &sigma, fit_x.n_obs(), |v| {
        let (a, b) = map(&ProbitCoefVector::from_slice(v)?)?;
        Ok(vec![a, b])
    })?;
    Ok((se[0], se[1]))
}

/// `n` row indices drawn uniformly with replacement.
pub fn resample_indices(n: usize, stream: RngStream) -> Vec<usize> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Sample standard deviation (divisor `m − 1`); NaN for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
}

/// Percentile interval: order statistics at ranks `⌈(α/2)·m⌉` and
/// `⌈(1 − α/2)·m⌉` (1-based, clamped to `[1, m]`), with `α = 1 − level`.
pub fn percentile_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0, 1), got {level}")));
    }
    if values.is_empty() {
        return Err(Error::InvalidParameter("percentile interval of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let alpha = 1.0 - level;
    // guard against ranks like 0.025·200 = 5.000000000000001
    let rank = |q: f64| ((q * m as f64 - 1e-9).ceil() as usize).clamp(1, m);
    Ok((sorted[rank(alpha / 2.0) - 1], sorted[rank(1.0 - alpha / 2.0) - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub level: f64,
    /// Largest tolerated fraction of failed replicates.
    pub max_failure_rate: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { replicates: 200, level: 0.95, max_failure_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub replicates: usize,
    pub successes: usize,
    pub level: f64,
    /// Successful replicate estimates in replicate order.
    pub estimates: Vec<(f64, f64)>,
    pub sd_xy: f64,
    pub sd_yx: f64,
    pub ci_xy: (f64, f64),
    pub ci_yx: (f64, f64),
    /// Failed replicates by error code.
    pub failure_reasons: BTreeMap<String, usize>,
}

/// Row bootstrap of a two-effect estimator.
///
/// Replicate `r` resamples with `stream.substream(r)`, so results do not
/// depend on scheduling. Estimation failures are tallied and dropped;
/// other errors abort. More than `max_failure_rate·B` failures is an error.
pub fn bootstrap<E>(d: &Dataset, estimator: E, opts: &BootstrapOptions, stream: RngStream) -> Result<BootstrapResult>
where
    E: Fn(&Dataset) -> Result<(f64, f64)> + Sync,
{
    if opts.replicates < 2 {
        return Err(Error::InvalidParameter(format!("bootstrap needs B >= 2, got {}", opts.replicates)));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0, 1), got {}", opts.level)));
    }
    let n = d.n();
    let outcomes: Vec<Result<(f64, f64)>> = (0..opts.replicates)
        .into_par_iter()
        .map(|r| estimator(&d.select_rows(&resample_indices(n, stream.substream(r as u64)))))
        .collect();

    let mut estimates = Vec::with_capacity(outcomes.len());
    let mut failure_reasons = BTreeMap::new();
    for outcome in outcomes {
        match outcome {
            Ok(pair) => estimates.push(pair),
            Err(e) if e.is_estimation_failure() => *failure_reasons.entry(e.code().to_string()).or_insert(0) += 1,
            Err(e) => return Err(e),
        }
    }
    let failures = opts.replicates - estimates.len();
    if failures as f64 > opts.max_failure_rate * opts.replicates as f64 || estimates.len() < 2 {
        return Err(Error::ExcessiveFailureRate { failures, replicates: opts.replicates });
    }
    let xs: Vec<f64> = estimates.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = estimates.iter().map(|p| p.1).collect();
    Ok(BootstrapResult {
        replicates: opts.replicates,
        successes: estimates.len(),
        level: opts.level,
        sd_xy: sample_sd(&xs),
        sd_yx: sample_sd(&ys),
        ci_xy: percentile_interval(&xs, opts.level)?,
        ci_yx: percentile_interval(&ys, opts.level)?,
        estimates,
        failure_reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identification::{estimate_alg1, fit_reduced_probits, identify_prop1, Alg1Options};
    use crate::model::{simulate, IvScenario, StructuralParams};
    use proptest::prelude::*;

    fn small_dataset(n: usize, seed: u64) -> Dataset {
        simulate(&StructuralParams::benchmark(), &IvScenario::GaussianIvs, n, RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn percentile_ranks() {
        let v: Vec<f64> = (1..=200).map(f64::from).collect();
        // ranks ⌈0.025·200⌉ = 5 and ⌈0.975·200⌉ = 195
        assert_eq!(percentile_interval(&v, 0.95).unwrap(), (5.0, 195.0));
        let v: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert_eq!(percentile_interval(&v, 0.9).unwrap(), (1.0, 10.0));
        assert!(percentile_interval(&v, 1.0).is_err());
    }

    #[test]
    fn sd_matches_definition() {
        assert!((sample_sd(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(sample_sd(&[1.0]).is_nan());
    }

    #[test]
    fn constant_estimator() {
        let d = small_dataset(50, 1);
        let res = bootstrap(&d, |_| Ok((0.3, -0.1)), &BootstrapOptions::default(), RngStream::new(2, 0)).unwrap();
        assert!(res.sd_xy < 1e-14 && res.sd_yx < 1e-14);
        assert_eq!(res.ci_xy, (0.3, 0.3));
        assert_eq!(res.ci_yx, (-0.1, -0.1));
        assert_eq!(res.successes, 200);
    }

    #[test]
    fn requires_two_replicates() {
        let d = small_dataset(50, 1);
        let opts = BootstrapOptions { replicates: 1, ..BootstrapOptions::default() };
        assert!(matches!(bootstrap(&d, |_| Ok((0.0, 0.0)), &opts, RngStream::new(0, 0)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn failure_ceiling_and_tally() {
        let d = small_dataset(60, 1);
        let opts = BootstrapOptions { replicates: 40, ..BootstrapOptions::default() };
        // fail on resamples whose first row is a positive X
        let flaky = |s: &Dataset| if s.x[0] { Err(Error::Unresolved) } else { Ok((1.0, 1.0)) };
        match bootstrap(&d, flaky, &opts, RngStream::new(5, 0)) {
            Err(Error::ExcessiveFailureRate { failures, replicates }) => {
                assert_eq!(replicates, 40);
                assert!(failures > 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        let rare = |s: &Dataset| if s.z[0] > 2.5 { Err(Error::Unresolved) } else { Ok((1.0, 1.0)) };
        let res = bootstrap(&d, rare, &opts, RngStream::new(5, 0)).unwrap();
        assert_eq!(res.successes + res.failure_reasons.values().sum::<usize>(), 40);
    }

    #[test]
    fn configuration_errors_abort() {
        let d = small_dataset(30, 1);
        let err = bootstrap(&d, |_| Err(Error::Config("bad".into())), &BootstrapOptions::default(), RngStream::new(0, 0));
        assert_eq!(err.unwrap_err(), Error::Config("bad".into()));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let d = small_dataset(2000, 3);
        let opts = BootstrapOptions { replicates: 20, ..BootstrapOptions::default() };
        let est = |s: &Dataset| estimate_alg1(s, &Alg1Options::default()).map(|e| (e.beta_xy, e.beta_yx));
        let a = bootstrap(&d, est, &opts, RngStream::new(9, 0)).unwrap();
        let b = bootstrap(&d, est, &opts, RngStream::new(9, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_xy.0 <= a.ci_xy.1);
    }

    #[test]
    fn identity_map_gives_probit_errors() {
        let d = small_dataset(3000, 4);
        let (fx, fy) = fit_reduced_probits(&d, &Alg1Options::default()).unwrap();
        let sigma = stacked_score_covariance(&fx, &fy).unwrap();
        let lambda = lambda_hat(&fx, &fy).to_array();
        let se = delta_method_from_covariance(&lambda, &sigma, fx.n_obs(), |v| Ok(v.to_vec())).unwrap();
        let rx = fx.robust_std_errors();
        let ry = fy.robust_std_errors();
        let want = [rx[0], rx[1], rx[2], ry[0], ry[1], ry[2]];
        for (a, b) in se.iter().zip(want) {
            assert!((a - b).abs() <= 1e-10 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn boundary_is_reported() {
        // k1² − 1 and k2² − 1 both tiny: sqrt arguments flip sign under perturbation
        let lambda = [0.0, 1.0, 1.0 + 1e-9, 0.0, 1.0 + 1e-9, 1.0];
        let sigma = Matrix::identity(6, 6);
        let map = |v: &[f64]| {
            let (a, b) = identify_prop1(&ProbitCoefVector::from_slice(v)?)?;
            Ok(vec![a, b])
        };
        assert!(matches!(
            delta_method_from_covariance(&lambda, &sigma, 100, map),
            Err(Error::FeasibilityBoundary { .. })
        ));
    }

    proptest! {
        #[test]
        fn interval_brackets_median(values in proptest::collection::vec(-10.0f64..10.0, 2..100), level in 0.5f64..0.99) {
            let (lo, hi) = percentile_interval(&values, level).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[(sorted.len() - 1) / 2];
            prop_assert!(lo <= hi);
            prop_assert!(lo <= median && median <= hi);
            prop_assert!(values.contains(&lo) && values.contains(&hi));
        }
    }
}
