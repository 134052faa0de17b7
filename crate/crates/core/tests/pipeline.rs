//! End-to-end checks on simulated data: probit fits, plug-in estimators and
//! their standard errors against the structural truth.

use bicausal::identification::{
    estimate_alg1, estimate_sensitivity, fit_reduced_probits, identify_prop1, lambda_hat, Alg1Options,
};
use bicausal::inference::{bootstrap, delta_method_se, BootstrapOptions};
use bicausal::model::{probit_coefs, simulate, Dataset, IvScenario, StructuralParams};
use bicausal::numerics::RngStream;
use bicausal::sensitivity::{cell_truth, EtaDeltaMode, SensitivityParams, SolverKind};

fn benchmark_data(n: usize, seed: u64) -> Dataset {
    simulate(&StructuralParams::benchmark(), &IvScenario::GaussianIvs, n, RngStream::new(seed, 0)).unwrap()
}

#[test]
fn reduced_probits_recover_forward_map() {
    let d = benchmark_data(100_000, 11);
    let (fx, fy) = fit_reduced_probits(&d, &Alg1Options::default()).unwrap();
    let est = lambda_hat(&fx, &fy).to_array();
    let truth = probit_coefs(&StructuralParams::benchmark()).unwrap().to_array();
    let se: Vec<f64> = fx.std_errors()[..3].iter().chain(fy.std_errors()[..3].iter()).copied().collect();
    for i in 0..6 {
        assert!((est[i] - truth[i]).abs() < 4.0 * se[i], "coefficient {i}: {} vs {} (se {})", est[i], truth[i], se[i]);
    }
}

#[test]
fn plug_in_estimate_is_consistent() {
    let d = benchmark_data(100_000, 12);
    let est = estimate_alg1(&d, &Alg1Options::default()).unwrap();
    assert!((est.beta_xy + 0.25).abs() < 0.03, "{}", est.beta_xy);
    assert!((est.beta_yx - 0.45).abs() < 0.03, "{}", est.beta_yx);
}

#[test]
fn delta_method_errors_shrink_at_root_n() {
    let se = |n: usize| {
        let d = benchmark_data(n, 13);
        let (fx, fy) = fit_reduced_probits(&d, &Alg1Options::default()).unwrap();
        delta_method_se(&fx, &fy, identify_prop1).unwrap()
    };
    let (small, large) = (se(10_000), se(40_000));
    for ratio in [large.0 / small.0, large.1 / small.1] {
        assert!((0.45..0.55).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn delta_method_agrees_with_bootstrap() {
    let d = benchmark_data(10_000, 14);
    let opts = Alg1Options::default();
    let (fx, fy) = fit_reduced_probits(&d, &opts).unwrap();
    let (se_xy, se_yx) = delta_method_se(&fx, &fy, identify_prop1).unwrap();
    let boot_opts = BootstrapOptions { replicates: 100, ..BootstrapOptions::default() };
    let boot = bootstrap(
        &d,
        |s| estimate_alg1(s, &opts).map(|e| (e.beta_xy, e.beta_yx)),
        &boot_opts,
        RngStream::new(14, 1),
    )
    .unwrap();
    for ratio in [boot.sd_xy / se_xy, boot.sd_yx / se_yx] {
        assert!((0.75..1.3).contains(&ratio), "bootstrap/delta ratio {ratio}");
    }
}

fn sensitivity_case(sp: SensitivityParams, solver: SolverKind, seed: u64) {
    let truth = cell_truth(&StructuralParams::benchmark(), &sp);
    let d = simulate(&truth, &IvScenario::GaussianIvs, 100_000, RngStream::new(seed, 0)).unwrap();
    let est = estimate_sensitivity(&d, solver, &sp, &Alg1Options::default()).unwrap();
    assert!((est.beta_xy - truth.beta_xy).abs() < 0.04, "{solver:?}: {}", est.beta_xy);
    assert!((est.beta_yx - truth.beta_yx).abs() < 0.04, "{solver:?}: {}", est.beta_yx);
}

#[test]
fn correlated_confounders_recovered_by_prop3() {
    let sp = SensitivityParams { gamma1: 0.5, gamma2: 0.3, ..SensitivityParams::baseline() };
    sensitivity_case(sp, SolverKind::Prop3, 21);
}

#[test]
fn invalid_instruments_recovered_by_corollaries() {
    sensitivity_case(SensitivityParams { eta0: 0.12, ..SensitivityParams::baseline() }, SolverKind::Cor1, 22);
    sensitivity_case(SensitivityParams { delta0: -0.1, ..SensitivityParams::baseline() }, SolverKind::Cor2, 23);
    let both = SensitivityParams { gamma1: 0.8, gamma2: 0.2, eta0: 0.1, delta0: 0.1, mode: EtaDeltaMode::RelativeToIv };
    sensitivity_case(both, SolverKind::General, 24);
}

#[test]
fn prop1_is_biased_under_correlated_confounders() {
    let sp = SensitivityParams { gamma1: 1.0, gamma2: 0.6, ..SensitivityParams::baseline() };
    let truth = cell_truth(&StructuralParams::benchmark(), &sp);
    let xi = probit_coefs(&truth).unwrap();
    let (bxy, byx) = identify_prop1(&xi).unwrap();
    assert!((bxy - truth.beta_xy).abs() > 0.05 || (byx - truth.beta_yx).abs() > 0.05);
    assert!(SolverKind::Prop3.candidates(&xi, &sp).unwrap().contains(truth.beta_xy, truth.beta_yx, 1e-9));
}
