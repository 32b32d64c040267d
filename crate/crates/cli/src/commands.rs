//! The subcommands as library functions returning tables.

use std::path::Path;

use g2mix::analytic::{g2_full_eta, g2_partial, DelayModel, SourceParams};
use g2mix::estimators::{
    estimate_g2, estimate_k_pooled, fit_gaussian, DelayPoint, FitOptions, GaussianFit,
};
use g2mix::hbt::{derive_seed, run_delay_scan, run_hbt, RunConfig};
use g2mix::oracle::{g2_oracle, PartialStateSpec};
use rayon::prelude::*;
use serde_json::{json, Map, Value as Json};

use crate::config::{Method, ScenarioConfig};
use crate::output::{Table, Value};
use crate::CliError;

/// Delays further than this many widths from the center form the `K = 0`
/// reference of a delay scan.
pub const FAR_DELAY_WIDTHS: f64 = 5.0;

/// Points of the dense fitted curve written next to a delay scan.
pub const FIT_CURVE_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridPoint {
    r: f64,
    tau_fs: Option<f64>,
    k: f64,
}

fn sorted_axis(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Grid points in write order: r-major, then K (or tau).
fn grid(config: &ScenarioConfig) -> Result<Vec<GridPoint>, CliError> {
    let rs = sorted_axis(&config.sweep.r);
    if rs.is_empty() {
        return Err(CliError::Config("sweep.r: at least one ratio is required".into()));
    }
    let mut points = Vec::new();
    if !config.sweep.tau_fs.is_empty() {
        let model = match &config.delay_model {
            Some(dm) => dm.model()?,
            None => return Err(CliError::Config("sweep.tau_fs needs a [delay_model] section".into())),
        };
        if !config.sweep.k.is_empty() {
            return Err(CliError::Config("sweep: give either k or tau_fs, not both".into()));
        }
        let taus = sorted_axis(&config.sweep.tau_fs);
        for &r in &rs {
            for &tau in &taus {
                points.push(GridPoint {
                    r,
                    tau_fs: Some(tau),
                    k: model.k_at(tau),
                });
            }
        }
    } else {
        let ks = sorted_axis(&config.sweep.k);
        if ks.is_empty() {
            return Err(CliError::Config("sweep.k: at least one value is required".into()));
        }
        for &r in &rs {
            for &k in &ks {
                points.push(GridPoint { r, tau_fs: None, k });
            }
        }
    }
    Ok(points)
}

fn has(config: &ScenarioConfig, method: Method) -> bool {
    config.run.methods.contains(&method)
}

/// Grid evaluation with the configured methods. Columns, in order:
/// `r, [tau_fs], K, eta, alpha_sq`, then per method
/// `g2_analytic, g2_analytic_eta` | `g2_oracle, residual_oracle` |
/// `g2_montecarlo, std_error, one_sided, seed, n_a, n_ab1, n_ab2, n_ab1b2`.
/// `residual_oracle` is `g2_oracle - g2_analytic`.
pub fn cmd_eval(config: &ScenarioConfig) -> Result<Table, CliError> {
    config.validate()?;
    let points = grid(config)?;
    let with_tau = points.iter().any(|p| p.tau_fs.is_some());
    let analytic = has(config, Method::Analytic);
    let oracle = has(config, Method::Oracle);
    let montecarlo = has(config, Method::MonteCarlo);

    let mut columns = vec!["r"];
    if with_tau {
        columns.push("tau_fs");
    }
    columns.extend(["K", "eta", "alpha_sq"]);
    if analytic {
        columns.extend(["g2_analytic", "g2_analytic_eta"]);
    }
    if oracle {
        columns.extend(["g2_oracle", "residual_oracle"]);
    }
    if montecarlo {
        columns.extend(["g2_montecarlo", "std_error", "one_sided", "seed", "n_a", "n_ab1", "n_ab2", "n_ab1b2"]);
    }
    let mut table = Table::new(columns);

    let oracle_values: Vec<Option<f64>> = if oracle {
        points
            .par_iter()
            .map(|p| {
                let (eta, a2) = config.source.at_ratio(p.r);
                let spec = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2)?, p.k, config.run.n_max)?;
                g2_oracle(&spec).map(Some)
            })
            .collect::<g2mix::Result<_>>()?
    } else {
        vec![None; points.len()]
    };

    for (i, (p, oracle_g2)) in points.iter().zip(oracle_values).enumerate() {
        let (eta, a2) = config.source.at_ratio(p.r);
        let mut row: Vec<Value> = vec![p.r.into()];
        if let Some(tau) = p.tau_fs {
            row.push(tau.into());
        }
        row.extend([Value::from(p.k), eta.into(), a2.into()]);
        let partial = g2_partial(p.r, p.k)?;
        if analytic {
            row.extend([Value::from(partial), g2_full_eta(p.r, p.k, eta)?.into()]);
        }
        if let Some(g) = oracle_g2 {
            row.extend([Value::from(g), (g - partial).into()]);
        }
        if montecarlo {
            let seed = derive_seed(config.run.seed, i as u64);
            let spec = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2)?, p.k, config.run.n_max)?;
            let run = RunConfig {
                detectors: config.detectors,
                ..RunConfig::new(spec, config.run.pulses, seed)
            };
            let record = run_hbt(&run)?;
            let estimate = estimate_g2(&record)?;
            row.extend([
                Value::from(estimate.value),
                estimate.std_error.into(),
                estimate.one_sided.into(),
                seed.into(),
                record.n_a.into(),
                record.n_ab1.into(),
                record.n_ab2.into(),
                record.n_ab1b2.into(),
            ]);
        }
        table.push(row);
    }
    Ok(table)
}

/// Monte Carlo sweep: `cmd_eval` with the montecarlo method always on.
pub fn cmd_simulate(config: &ScenarioConfig) -> Result<Table, CliError> {
    let mut config = config.clone();
    if !has(&config, Method::MonteCarlo) {
        config.run.methods.push(Method::MonteCarlo);
    }
    cmd_eval(&config)
}

#[derive(Debug, Clone)]
pub struct DelayScanOutput {
    /// `tau_fs, K, reference, [n_a, n_ab1, n_ab2, n_ab1b2,] k_hat, k_std_error, [g2, g2_std_error, seed]`
    pub points: Table,
    /// `tau_fs, k_fit, counts_fit` (counts only for simulated scans).
    pub curve: Table,
    pub fit: GaussianFit,
    /// Mean triple count over the far-delay reference points.
    pub reference_counts: Option<f64>,
}

impl DelayScanOutput {
    pub fn summary(&self) -> Map<String, Json> {
        let f = &self.fit;
        let mut m = Map::new();
        m.insert("k_hat".into(), json!(f.k_hat));
        m.insert("k_std_error".into(), json!(f.k_std_error()));
        m.insert("tau0_hat_fs".into(), json!(f.tau0_hat));
        m.insert("tau0_std_error_fs".into(), json!(f.tau0_std_error()));
        m.insert("center_hat_fs".into(), json!(f.center_hat));
        m.insert("center_std_error_fs".into(), json!(f.center_std_error()));
        m.insert("residual_norm".into(), json!(f.residual_norm));
        m.insert("converged".into(), json!(f.converged));
        m.insert("degenerate".into(), json!(f.degenerate));
        if let Some(n) = self.reference_counts {
            m.insert("reference_triples".into(), json!(n));
        }
        m
    }
}

/// Scans the delay at one mixing ratio, estimates `K(tau)` against the mean
/// of the far-delay points and fits the Gaussian to the remaining points.
/// Without the montecarlo method the scan is noiseless: `k_hat = K(tau)`
/// with unit weights.
pub fn cmd_delay_scan(config: &ScenarioConfig) -> Result<DelayScanOutput, CliError> {
    config.validate()?;
    let model = match &config.delay_model {
        Some(dm) => dm.model()?,
        None => DelayModel::measured(),
    };
    let r = match config.sweep.r.as_slice() {
        [r] => *r,
        other => {
            return Err(CliError::Config(format!(
                "sweep.r: a delay scan takes exactly one ratio, got {}",
                other.len()
            )))
        }
    };
    if !config.sweep.k.is_empty() {
        return Err(CliError::Config("sweep.k: not used by a delay scan; K follows from tau_fs".into()));
    }
    let delays = sorted_axis(&config.sweep.tau_fs);
    if delays.is_empty() {
        return Err(CliError::Config("sweep.tau_fs: at least one delay is required".into()));
    }
    let is_far = |tau: f64| (tau - model.center_fs()).abs() > FAR_DELAY_WIDTHS * model.tau0_fs();
    let fit_window: Vec<f64> = delays.iter().copied().filter(|t| !is_far(*t)).collect();

    let (eta, a2) = config.source.at_ratio(r);
    let montecarlo = has(config, Method::MonteCarlo);
    let (points, fit_points, reference_counts) = if montecarlo {
        let spec = PartialStateSpec::with_cutoff(SourceParams::new(eta, a2)?, model.k_peak(), config.run.n_max)?;
        let base = RunConfig {
            detectors: config.detectors,
            ..RunConfig::new(spec, config.run.pulses, config.run.seed)
        };
        let scan = run_delay_scan(&base, &delays, &model)?;
        let far: Vec<f64> = scan
            .iter()
            .filter(|p| is_far(p.tau_fs))
            .map(|p| p.record.n_ab1b2 as f64)
            .collect();
        if far.is_empty() {
            return Err(CliError::Config(format!(
                "sweep.tau_fs: no reference delays beyond {FAR_DELAY_WIDTHS} tau0 = {} fs from the center",
                FAR_DELAY_WIDTHS * model.tau0_fs()
            )));
        }
        let reference = far.iter().sum::<f64>() / far.len() as f64;
        let mut table = Table::new([
            "tau_fs",
            "K",
            "reference",
            "n_a",
            "n_ab1",
            "n_ab2",
            "n_ab1b2",
            "k_hat",
            "k_std_error",
            "g2",
            "g2_std_error",
            "seed",
        ]);
        let mut fit_points = Vec::new();
        for p in &scan {
            let k = estimate_k_pooled(p.record.n_ab1b2 as f64, &far)?;
            let g2 = estimate_g2(&p.record)?;
            let reference = is_far(p.tau_fs);
            if !reference {
                fit_points.push(DelayPoint {
                    tau_fs: p.tau_fs,
                    k_hat: k.value,
                    sigma: k.std_error,
                });
            }
            table.push(vec![
                p.tau_fs.into(),
                p.k.into(),
                reference.into(),
                p.record.n_a.into(),
                p.record.n_ab1.into(),
                p.record.n_ab2.into(),
                p.record.n_ab1b2.into(),
                k.value.into(),
                k.std_error.into(),
                g2.value.into(),
                g2.std_error.into(),
                p.seed.into(),
            ]);
        }
        (table, fit_points, Some(reference))
    } else {
        let mut table = Table::new(["tau_fs", "K", "reference", "k_hat", "k_std_error"]);
        let mut fit_points = Vec::new();
        for &tau in &delays {
            let k = model.k_at(tau);
            let reference = is_far(tau);
            if !reference {
                fit_points.push(DelayPoint {
                    tau_fs: tau,
                    k_hat: k,
                    sigma: 1.0,
                });
            }
            table.push(vec![tau.into(), k.into(), reference.into(), k.into(), 1.0.into()]);
        }
        (table, fit_points, None)
    };

    let fit = fit_gaussian(&fit_points, &FitOptions::default())?;
    let curve = fit_curve(&fit, &fit_window, reference_counts);
    Ok(DelayScanOutput {
        points,
        curve,
        fit,
        reference_counts,
    })
}

fn fit_curve(fit: &GaussianFit, window: &[f64], reference: Option<f64>) -> Table {
    let mut columns = vec!["tau_fs", "k_fit"];
    if reference.is_some() {
        columns.push("counts_fit");
    }
    let mut table = Table::new(columns);
    let (lo, hi) = (window[0], window[window.len() - 1]);
    for i in 0..FIT_CURVE_POINTS {
        let tau = lo + (hi - lo) * i as f64 / (FIT_CURVE_POINTS - 1) as f64;
        let k = fit.k_at(tau);
        let mut row = vec![tau.into(), k.into()];
        if let Some(n) = reference {
            row.push((n * (1.0 + k)).into());
        }
        table.push(row);
    }
    table
}

/// Reads `tau, k_hat, sigma` rows; a non-numeric first line is a header.
pub fn read_delay_points(text: &str) -> Result<Vec<DelayPoint>, CliError> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => points.push(DelayPoint {
                tau_fs: v[0],
                k_hat: v[1],
                sigma: v[2],
            }),
            Err(_) if points.is_empty() && n == 0 => continue,
            _ => {
                return Err(CliError::Input(format!(
                    "line {}: expected three numbers `tau,k_hat,sigma`, got `{line}`",
                    n + 1
                )))
            }
        }
    }
    Ok(points)
}

/// One-row table:
/// `k_hat, k_std_error, tau0_hat, tau0_std_error, center_hat, center_std_error, residual_norm, converged, degenerate`.
pub fn fit_table(fit: &GaussianFit) -> Table {
    let mut table = Table::new([
        "k_hat",
        "k_std_error",
        "tau0_hat",
        "tau0_std_error",
        "center_hat",
        "center_std_error",
        "residual_norm",
        "converged",
        "degenerate",
    ]);
    table.push(vec![
        fit.k_hat.into(),
        fit.k_std_error().into(),
        fit.tau0_hat.into(),
        fit.tau0_std_error().into(),
        fit.center_hat.into(),
        fit.center_std_error().into(),
        fit.residual_norm.into(),
        fit.converged.into(),
        fit.degenerate.into(),
    ]);
    table
}

pub fn cmd_fit(path: &Path) -> Result<GaussianFit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let points = read_delay_points(&text)?;
    Ok(fit_gaussian(&points, &FitOptions::default())?)
}
