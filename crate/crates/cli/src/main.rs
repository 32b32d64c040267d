use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use g2mix_cli::commands::{cmd_delay_scan, cmd_eval, cmd_fit, cmd_simulate, fit_table};
use g2mix_cli::config::{Format, Method, Overrides, ScenarioConfig};
use g2mix_cli::output::{write_outputs, Manifest};
use g2mix_cli::presets::{cmd_reproduce, preset, Figure};
use g2mix_cli::{CliError, OUT_DIR_ENV};

/// g2(0) of a heralded single photon mixed with a coherent state: formulas,
/// exact truncated-Fock oracle, and Monte Carlo HBT counting.
///
/// Exit codes: 0 success, 2 config or input error, 3 numerical/runtime
/// error, 4 i/o error.
#[derive(Parser)]
#[command(name = "g2mix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate g2(0) over an (r, K) or (r, tau) grid; writes eval.csv.
    Eval(Common),
    /// Monte Carlo HBT sweep with raw counts; writes simulate.csv.
    Simulate(Common),
    /// Delay scan with K estimation and Gaussian fit; writes delay_scan.csv
    /// and delay_scan_fit.csv. Without --config the fig3 preset is used.
    DelayScan(Common),
    /// Regenerate the data behind a figure from its frozen preset.
    Reproduce {
        /// fig1, fig3, fig4, fig5a or fig5b
        figure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Fit K exp(-((tau - c)/tau0)^2) to a CSV of `tau,k_hat,sigma` rows;
    /// writes fit.csv.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "g2mix-out")]
    out: PathBuf,
    /// Table format: csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Master seed; grid point i uses a seed derived from it and i.
    #[arg(long)]
    seed: Option<u64>,
    /// Heralded pulses per Monte Carlo point.
    #[arg(long)]
    pulses: Option<u64>,
    /// Photon-number cutoff per mode for the oracle.
    #[arg(long)]
    n_max: Option<usize>,
    /// Comma-separated subset of analytic, oracle, montecarlo.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            pulses: self.pulses,
            n_max: self.n_max,
            methods: self.method.clone(),
            format: self.format,
        }
    }

    fn scenario(&self, fallback: impl FnOnce() -> ScenarioConfig) -> Result<ScenarioConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => fallback(),
        };
        config.apply(&self.overrides());
        config.validate()?;
        Ok(config)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run_sweep(common: &Common, name: &str, simulate: bool) -> Result<(), CliError> {
    let config = common.scenario(ScenarioConfig::default)?;
    let table = if simulate { cmd_simulate(&config)? } else { cmd_eval(&config)? };
    let manifest = Manifest::new(name, Some(config.run.seed), config.to_toml());
    report(&write_outputs(&common.out, name, &[(name, &table)], config.output.format, manifest)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(common) => run_sweep(&common, "eval", false),
        Command::Simulate(common) => run_sweep(&common, "simulate", true),
        Command::DelayScan(common) => {
            let config = common.scenario(|| preset(Figure::Fig3))?;
            let scan = cmd_delay_scan(&config)?;
            let mut manifest = Manifest::new("delay_scan", Some(config.run.seed), config.to_toml());
            manifest.summary = scan.summary();
            let f = &scan.fit;
            println!(
                "K = {:.5} +- {:.5}  tau0 = {:.2} +- {:.2} fs  center = {:.2} +- {:.2} fs  converged = {}",
                f.k_hat,
                f.k_std_error(),
                f.tau0_hat,
                f.tau0_std_error(),
                f.center_hat,
                f.center_std_error(),
                f.converged
            );
            report(&write_outputs(
                &common.out,
                "delay_scan",
                &[("delay_scan", &scan.points), ("delay_scan_fit", &scan.curve)],
                config.output.format,
                manifest,
            )?);
            Ok(())
        }
        Command::Reproduce { figure, common } => {
            let figure: Figure = figure.parse()?;
            if common.config.is_some() {
                return Err(CliError::Config("reproduce uses frozen presets; --config is not accepted".into()));
            }
            report(&cmd_reproduce(figure, &common.overrides(), &common.out)?);
            Ok(())
        }
        Command::Fit { input, common } => {
            let fit = cmd_fit(&input)?;
            let table = fit_table(&fit);
            let format = common.format.unwrap_or_default();
            let mut manifest = Manifest::new("fit", None, String::new());
            manifest.summary.insert("input".into(), input.display().to_string().into());
            report(&write_outputs(&common.out, "fit", &[("fit", &table)], format, manifest)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
