use g2mix::analytic::{DelayModel, SourceParams, MEASURED_K, MEASURED_TAU0_FS};
use g2mix::estimators::{estimate_g2, estimate_k_pooled, fit_gaussian, DelayPoint, FitOptions};
use g2mix::hbt::{derive_seed, run_delay_scan, run_hbt, run_with_distribution, DetectorConfig, RunConfig};
use g2mix::oracle::{g2_oracle, photon_number_distribution, PartialStateSpec};

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Expected value of the estimator for ideal threshold detectors, computed
/// from the photon-number distribution rather than from counts.
fn threshold_expectation(p: &[f64]) -> f64 {
    let single: f64 = p.iter().enumerate().map(|(n, pn)| pn * (1.0 - 0.5f64.powi(n as i32))).sum();
    threshold_triples(p) / (single * single)
}

/// Probability that both detectors click on one pulse.
fn threshold_triples(p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(n, pn)| pn * (1.0 - 2.0 * 0.5f64.powi(n as i32)))
        .sum()
}

fn seeded_estimates(spec: PartialStateSpec, pulses: u64, detectors: DetectorConfig, stream: u64) -> Vec<(f64, f64)> {
    (0..25)
        .map(|i| {
            let run = RunConfig {
                detectors,
                ..RunConfig::new(spec, pulses, derive_seed(stream, i))
            };
            let e = estimate_g2(&run_hbt(&run).unwrap()).unwrap();
            (e.value, e.std_error)
        })
        .collect()
}

#[test]
fn twenty_five_seeds_agree_with_oracle() {
    let spec = PartialStateSpec::at_ratio(3e-3, 1.0, 0.5).unwrap();
    let oracle = g2_oracle(&spec).unwrap();
    let estimates = seeded_estimates(spec, 20_000_000, DetectorConfig::default(), 77);
    let values: Vec<f64> = estimates.iter().map(|e| e.0).collect();
    let (mean, sd) = mean_and_sd(&values);
    let predicted = estimates.iter().map(|e| e.1).sum::<f64>() / estimates.len() as f64;
    assert!((mean - oracle).abs() <= 4.0 * predicted / 5.0, "mean {mean} vs oracle {oracle}");
    assert!(sd < 2.0 * predicted && sd > predicted / 2.0, "sd {sd} vs delta-method {predicted}");
}

#[test]
fn detector_loss_leaves_g2_unbiased() {
    let spec = PartialStateSpec::at_ratio(3e-3, 1.0, 0.86).unwrap();
    let lossy = DetectorConfig {
        efficiency_b1: 0.5,
        efficiency_b2: 0.5,
        dark_count_probability: 0.0,
    };
    let ideal: Vec<f64> = seeded_estimates(spec, 10_000_000, DetectorConfig::default(), 5).iter().map(|e| e.0).collect();
    let thinned: Vec<f64> = seeded_estimates(spec, 10_000_000, lossy, 6).iter().map(|e| e.0).collect();
    let (m1, s1) = mean_and_sd(&ideal);
    let (m2, s2) = mean_and_sd(&thinned);
    let combined = (s1 * s1 / 25.0 + s2 * s2 / 25.0).sqrt();
    assert!((m1 - m2).abs() <= 3.0 * combined, "{m1} vs {m2} (combined sigma {combined})");
}

#[test]
fn counts_match_threshold_expectation() {
    // a single long run resolves the detector-model expectation itself
    let spec = PartialStateSpec::at_ratio(0.05, 1.0, 0.86).unwrap();
    let p = photon_number_distribution(&spec).unwrap();
    let expected = threshold_expectation(&p);
    let e = estimate_g2(&run_with_distribution(&p, 50_000_000, 31, &DetectorConfig::default()).unwrap()).unwrap();
    assert!((e.value - expected).abs() <= 3.0 * e.std_error, "{} +- {} vs {expected}", e.value, e.std_error);
}

#[test]
fn zero_versus_far_delay_measures_k() {
    let model = DelayModel::measured();
    let spec = PartialStateSpec::new(SourceParams::new(1.0, 2e-3).unwrap(), MEASURED_K).unwrap();
    let base = RunConfig::new(spec, 10_000_000, 404);
    let scan = run_delay_scan(&base, &[0.0, 10.0 * MEASURED_TAU0_FS], &model).unwrap();
    let k = estimate_k_pooled(scan[0].record.n_ab1b2 as f64, &[scan[1].record.n_ab1b2 as f64]).unwrap();
    assert!((k.value - MEASURED_K).abs() <= 3.0 * k.std_error, "{} +- {}", k.value, k.std_error);
}

#[test]
fn hundred_million_pulse_scan_recovers_delay_model() {
    let model = DelayModel::measured();
    let params = SourceParams::new(1.0, 1e-3).unwrap();
    let spec = PartialStateSpec::new(params, MEASURED_K).unwrap();
    let pulses = 100_000_000;
    let base = RunConfig::new(spec, pulses, 9001);
    let delays: Vec<f64> = (0..21).map(|i| -1000.0 + 100.0 * i as f64).collect();
    let scan = run_delay_scan(&base, &delays, &model).unwrap();
    // Noise-free far-delay reference: the expected triple count at K = 0.
    // A simulated reference would shift every point by the same amount,
    // a correlation the per-point weights cannot express.
    let p_far = photon_number_distribution(&PartialStateSpec::new(params, 0.0).unwrap()).unwrap();
    let far = pulses as f64 * threshold_triples(&p_far);
    let points: Vec<DelayPoint> = scan
        .iter()
        .map(|p| {
            let n = p.record.n_ab1b2 as f64;
            DelayPoint {
                tau_fs: p.tau_fs,
                k_hat: n / far - 1.0,
                sigma: n.sqrt() / far,
            }
        })
        .collect();
    let fit = fit_gaussian(&points, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    // the triple ratio measures slightly less than K at finite r
    let k_expected = threshold_triples(&photon_number_distribution(&spec).unwrap()) / threshold_triples(&p_far) - 1.0;
    assert!(
        (fit.k_hat - k_expected).abs() <= 3.0 * fit.k_std_error(),
        "K {} +- {}",
        fit.k_hat,
        fit.k_std_error()
    );
    assert!(
        (fit.tau0_hat - MEASURED_TAU0_FS).abs() <= 3.0 * fit.tau0_std_error(),
        "tau0 {} +- {}",
        fit.tau0_hat,
        fit.tau0_std_error()
    );
}
