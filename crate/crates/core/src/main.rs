use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rover_locate::ga::GaConfig;
use rover_locate::harness::{
    self, load_scenario, measurements_json, render_report, ExperimentReport, ReportFormat, RunOptions, Scenario,
};
use rover_locate::newton::NewtonConfig;
use rover_locate::pipeline::Mode;
use rover_locate::Error;

#[derive(Parser)]
#[command(name = "rover-locate", version, about = "GA + Newton relative positioning of rovers from RSSI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate every target rover of a scenario.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "ga-newton")]
        mode: ModeArg,
    },
    /// GA-only sweep over n x n restarts plus one GA+Newton comparison row.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid sizes n; each runs n*n GA restarts per rover.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        n: Vec<usize>,
        /// Use the full grid n = 10, 20, ..., 80 (very slow).
        #[arg(long, conflicts_with = "n")]
        full: bool,
    },
    /// Write the synthesized measurement set as JSON.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    ga_pop: usize,
    #[arg(long, default_value_t = 200)]
    ga_gens: usize,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 0.9)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    mutation_rate: f64,
    #[arg(long, default_value_t = 24)]
    bits_per_var: u32,
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    #[arg(long, default_value_t = 100)]
    newton_max_iter: usize,
    /// Overrides the scenario noise level (dBm).
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Leave all timing fields empty so output is byte-reproducible.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ga,
    GaNewton,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Table,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Table => ReportFormat::Table,
        }
    }
}

fn scenario_with_overrides(path: &Path, seed: Option<u64>, noise_sigma: Option<f64>) -> Result<Scenario, Error> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(sigma) = noise_sigma {
        scenario.noise_sigma = sigma;
    }
    scenario.validate()?;
    Ok(scenario)
}

impl CommonArgs {
    fn options(&self, mode: Mode) -> RunOptions {
        RunOptions {
            ga: GaConfig {
                population_size: self.ga_pop,
                generations: self.ga_gens,
                crossover_rate: self.crossover_rate,
                mutation_rate: self.mutation_rate,
                restarts: self.restarts,
                bits_per_var: self.bits_per_var,
                ..GaConfig::default()
            },
            newton: NewtonConfig {
                step_tolerance: self.newton_tol,
                max_iterations: self.newton_max_iter,
                ..NewtonConfig::default()
            },
            mode,
            record_timings: !self.no_timings,
        }
    }

    fn scenario(&self) -> Result<Scenario, Error> {
        scenario_with_overrides(&self.scenario, self.seed, self.noise_sigma)
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn emit(report: &ExperimentReport, common: &CommonArgs) -> Result<(), Error> {
    match &common.out {
        Some(path) => harness::emit_report(report, common.format.into(), path),
        None => write_output(None, &render_report(report, common.format.into())?),
    }
}

enum Outcome {
    Converged,
    Unconverged,
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let report = match cli.command {
        Command::Solve { common, mode } => {
            let mode = match mode {
                ModeArg::Ga => Mode::GaOnly,
                ModeArg::GaNewton => Mode::GaNewton,
            };
            let report = harness::run_solve(&common.scenario()?, &common.options(mode))?;
            emit(&report, &common)?;
            report
        }
        Command::Sweep { common, n, full } => {
            let n_list: Vec<usize> = if full { (1..=8).map(|k| 10 * k).collect() } else { n };
            let report =
                harness::run_experiment2(&common.scenario()?, &n_list, &common.options(Mode::GaNewton))?;
            emit(&report, &common)?;
            report
        }
        Command::Synth {
            scenario,
            seed,
            noise_sigma,
            out,
        } => {
            let scenario = scenario_with_overrides(&scenario, seed, noise_sigma)?;
            let set = harness::synthesize_measurements(&scenario)?;
            write_output(out.as_deref(), &measurements_json(&set))?;
            return Ok(Outcome::Converged);
        }
    };
    Ok(if report.all_converged() {
        Outcome::Converged
    } else {
        Outcome::Unconverged
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Converged) => ExitCode::SUCCESS,
        Ok(Outcome::Unconverged) => {
            eprintln!("warning: at least one rover has no converged estimate");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
