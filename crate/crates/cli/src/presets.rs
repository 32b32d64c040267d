//! Frozen scenarios behind the figure replicas. Bump [`PRESET_VERSION`] on
//! any change to a preset's parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use g2mix::analytic::{MEASURED_K, MEASURED_TAU0_FS};
use serde_json::json;

use crate::commands::{cmd_delay_scan, cmd_eval};
use crate::config::{DelayModelConfig, Method, Overrides, ScenarioConfig, SourceConfig};
use crate::output::{write_outputs, Manifest, Table};
use crate::CliError;

pub const PRESET_VERSION: u32 = 1;

/// Mean photon number per pulse held fixed across the simulated fig4/fig5
/// sweeps, so every point has comparable triple statistics.
pub const SWEEP_MEAN_PHOTONS: f64 = 0.02;

/// Heralded-photon scans use a faint coherent state: the triple-count ratio
/// then measures `2K/(2 + r)`, within `r/2` of K.
pub const SCAN_RATIO: f64 = 0.01;

/// Far-delay reference points of the fig3 scan, at 10 and 12 tau0.
pub const SCAN_REFERENCE_FS: [f64; 4] = [-5101.2, -4251.0, 4251.0, 5101.2];

/// Mixing ratios of the fig4 curves; they straddle r = 1/(2K) for the
/// measured K.
pub const FIG4_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 1.0, 2.0];

pub const FIG5A_K: [f64; 5] = [0.0, 0.3, 0.6, 0.86, 1.0];

pub const FIG5B_RATIOS: [f64; 6] = [0.1, 0.3, 0.5, 0.8, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig1, Figure::Fig3, Figure::Fig4, Figure::Fig5a, Figure::Fig5b];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| CliError::Config(format!("unknown figure `{s}` (expected fig1, fig3, fig4, fig5a or fig5b)")))
    }
}

/// `n + 1` evenly spaced values `lo + (hi - lo) i/n`, computed without
/// accumulated rounding.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| (lo * (n - i) as f64 + hi * i as f64) / n as f64).collect()
}

fn scan_window() -> Vec<f64> {
    linspace(-1000.0, 1000.0, 20)
}

fn measured_model() -> Option<DelayModelConfig> {
    Some(DelayModelConfig {
        k_peak: MEASURED_K,
        tau0_fs: MEASURED_TAU0_FS,
        center_fs: 0.0,
    })
}

fn sweep_source() -> SourceConfig {
    SourceConfig {
        eta: None,
        mean_photons: Some(SWEEP_MEAN_PHOTONS),
    }
}

pub fn preset(figure: Figure) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    match figure {
        Figure::Fig1 => {
            c.sweep.r = linspace(0.0, 4.0, 80);
            c.sweep.k = linspace(0.0, 1.0, 50);
            c.run.methods = vec![Method::Analytic];
        }
        Figure::Fig3 => {
            c.source = SourceConfig {
                eta: Some(1.0),
                mean_photons: None,
            };
            c.sweep.r = vec![SCAN_RATIO];
            c.sweep.tau_fs = scan_window();
            c.sweep.tau_fs.extend(SCAN_REFERENCE_FS);
            c.delay_model = measured_model();
            c.run.methods = vec![Method::MonteCarlo];
            c.run.pulses = 10_000_000;
        }
        Figure::Fig4 => {
            c.source = sweep_source();
            c.sweep.r = FIG4_RATIOS.to_vec();
            c.sweep.tau_fs = scan_window();
            c.delay_model = measured_model();
            c.run.methods = vec![Method::Analytic, Method::MonteCarlo];
            c.run.pulses = 20_000_000;
        }
        Figure::Fig5a => {
            c.source = sweep_source();
            c.sweep.r = (0..=40).map(|i| 10f64.powf(-2.0 + i as f64 / 10.0)).collect();
            c.sweep.k = FIG5A_K.to_vec();
            c.run.methods = vec![Method::Analytic, Method::MonteCarlo];
            c.run.pulses = 20_000_000;
        }
        Figure::Fig5b => {
            c.source = sweep_source();
            c.sweep.r = FIG5B_RATIOS.to_vec();
            c.sweep.k = linspace(0.0, 1.0, 20);
            c.run.methods = vec![Method::Analytic, Method::MonteCarlo];
            c.run.pulses = 20_000_000;
        }
    }
    c
}

/// Runs a preset and writes `<figure>.<ext>` (plus `fig3_fit.<ext>` for the
/// delay scan) and `<figure>.manifest.json` into `out_dir`.
///
/// Schemas: fig1 `r,K,g2`; fig3 and fig3_fit as [`cmd_delay_scan`]; fig4,
/// fig5a and fig5b as [`cmd_eval`] in long format, one row per grid point.
pub fn cmd_reproduce(figure: Figure, overrides: &Overrides, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = preset(figure);
    config.apply(overrides);
    let mut manifest = Manifest::new("reproduce", Some(config.run.seed), config.to_toml());
    manifest.figure = Some(figure.id().to_string());
    manifest.preset_version = Some(PRESET_VERSION);
    let format = config.output.format;

    match figure {
        Figure::Fig1 => {
            let sweep = cmd_eval(&config)?;
            let mut table = Table::new(["r", "K", "g2"]);
            let (r, k) = (sweep.column("r").unwrap(), sweep.column("K").unwrap());
            let g2 = sweep
                .column("g2_analytic")
                .ok_or_else(|| CliError::Config("fig1 needs the analytic method".into()))?;
            for i in 0..r.len() {
                table.push(vec![r[i].into(), k[i].into(), g2[i].into()]);
            }
            let max = g2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            manifest.summary.insert("g2_max".into(), json!(max));
            write_outputs(out_dir, "fig1", &[("fig1", &table)], format, manifest)
        }
        Figure::Fig3 => {
            let scan = cmd_delay_scan(&config)?;
            manifest.summary = scan.summary();
            write_outputs(out_dir, "fig3", &[("fig3", &scan.points), ("fig3_fit", &scan.curve)], format, manifest)
        }
        Figure::Fig4 | Figure::Fig5a | Figure::Fig5b => {
            let table = cmd_eval(&config)?;
            if let Some(g2) = table.column("g2_analytic") {
                let below = g2.iter().filter(|g| **g < 1.0).count();
                manifest.summary.insert("analytic_rows_below_one".into(), json!(below));
            }
            write_outputs(out_dir, figure.id(), &[(figure.id(), &table)], format, manifest)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.id().parse::<Figure>().unwrap(), f);
        }
        assert!("fig2".parse::<Figure>().is_err());
    }

    #[test]
    fn presets_validate() {
        for f in Figure::ALL {
            preset(f).validate().unwrap();
        }
    }

    #[test]
    fn grids_are_clean() {
        let c = preset(Figure::Fig1);
        assert_eq!(c.sweep.r.len(), 81);
        assert_eq!(c.sweep.r[3], 0.15);
        assert_eq!(c.sweep.k[43], 0.86);
        assert_eq!(scan_window()[7], -300.0);
        let fig3 = preset(Figure::Fig3);
        let far = fig3.sweep.tau_fs.iter().filter(|t| t.abs() > 5.0 * MEASURED_TAU0_FS).count();
        assert_eq!(far, 4);
    }
}
