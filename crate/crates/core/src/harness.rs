//! Scenario files, measurement synthesis, the two experiments and report output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::model::{horizontal_angle, relative_position, rssi_2d, Channel, Pose2D, RssiSample};
use crate::newton::{NewtonConfig, NewtonStatus};
use crate::pipeline::{run_scenario, MeasurementSet, Mode, RoverOutcome, ScenarioRun};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Column header of the per-rover CSV report.
pub const CSV_HEADER: [&str; 8] = [
    "rover",
    "actual_x_mm",
    "actual_y_mm",
    "est_x_mm",
    "est_y_mm",
    "rel_error",
    "iterations",
    "status",
];

/// Column header of the sweep CSV report.
pub const SWEEP_CSV_HEADER: [&str; 5] = ["n", "restarts", "mode", "avg_rel_error", "computing_time_s"];

/// The bundled rover layout used by both experiments.
pub const FIG5_SCENARIO: &str = include_str!("../scenarios/fig5.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverSpec {
    pub id: usize,
    pub pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub rovers: Vec<RoverSpec>,
    /// Standard deviation of additive Gaussian RSSI noise, dBm.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<usize> = self.rovers.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("duplicate rover id {}", w[0])));
        }
        match self.rovers.iter().find(|r| r.id == 0) {
            None => {
                return Err(Error::config(
                    "scenario must contain reference rover 0 placed at the origin",
                ))
            }
            Some(r) if r.pose.x != 0.0 || r.pose.y != 0.0 => {
                return Err(Error::config(format!(
                    "reference rover 0 must sit at the origin, found ({}, {})",
                    r.pose.x, r.pose.y
                )))
            }
            Some(_) => {}
        }
        for r in &self.rovers {
            r.pose
                .validate()
                .map_err(|e| Error::config(format!("rover {}: {e}", r.id)))?;
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn reference(&self) -> &RoverSpec {
        self.rovers
            .iter()
            .find(|r| r.id == 0)
            .expect("validated scenario has rover 0")
    }

    /// Every rover except the reference, in id order.
    pub fn targets(&self) -> impl Iterator<Item = &RoverSpec> {
        let mut targets: Vec<&RoverSpec> = self.rovers.iter().filter(|r| r.id != 0).collect();
        targets.sort_by_key(|r| r.id);
        targets.into_iter()
    }

    pub fn fig5() -> Scenario {
        parse_scenario(FIG5_SCENARIO).expect("bundled scenario is valid")
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
        path: "<inline>".into(),
        source,
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_owned(),
        source,
    })?;
    scenario
        .validate()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(scenario).expect("scenario serializes") + "\n"))
}

/// Noiseless AA/BB readings for every target, plus optional Gaussian noise
/// drawn from a stream seeded by `scenario.seed`.
pub fn synthesize_measurements(scenario: &Scenario) -> Result<MeasurementSet> {
    scenario.validate()?;
    let reference = scenario.reference().pose;
    let mut samples = Vec::new();
    for rover in scenario.targets() {
        let rel = relative_position(&reference, &rover.pose, (0.0, 0.0), (0.0, 0.0));
        if rel.x == 0.0 && rel.y == 0.0 {
            return Err(Error::domain(format!(
                "target rover {} coincides with the reference rover",
                rover.id
            )));
        }
        let phi = horizontal_angle(&rel)?;
        for channel in [Channel::AA, Channel::BB] {
            samples.push(RssiSample {
                channel,
                value: rssi_2d(channel, rel.x, rel.y, phi)?,
                rover_pair: (0, rover.id),
            });
        }
    }
    if scenario.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, scenario.noise_sigma)
            .map_err(|e| Error::config(format!("noise_sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        for s in &mut samples {
            s.value += normal.sample(&mut rng);
        }
    }
    Ok(MeasurementSet {
        noise_sigma: scenario.noise_sigma,
        samples,
    })
}

/// Solver settings shared by all experiment entry points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub ga: GaConfig,
    pub newton: NewtonConfig,
    pub mode: Mode,
    /// When false every timing field is left empty so output bytes are reproducible.
    pub record_timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ga: GaConfig::default(),
            newton: NewtonConfig::default(),
            mode: Mode::GaNewton,
            record_timings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rover: usize,
    pub actual_x_mm: f64,
    pub actual_y_mm: f64,
    pub est_x_mm: Option<f64>,
    pub est_y_mm: Option<f64>,
    pub rel_error: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
}

pub const STATUS_GA_SEED: &str = "ga_seed";
pub const STATUS_GA_FAILED: &str = "ga_failed";
pub const STATUS_NEWTON_FAILED: &str = "newton_failed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Grid size `n` for GA-only rows; `None` for the GA+Newton comparison row.
    pub n: Option<usize>,
    pub restarts: usize,
    pub mode: Mode,
    pub average_relative_error: Option<f64>,
    pub computing_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTimings {
    pub ga_seconds: f64,
    pub newton_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub experiment: String,
    pub scenario: String,
    pub seed: u64,
    pub noise_sigma: f64,
    pub options: RunOptions,
    /// GA seeds, one per target rover.
    pub ga_rows: Vec<ReportRow>,
    /// Newton refinements; empty in GA-only mode.
    pub newton_rows: Vec<ReportRow>,
    pub ga_average: Option<f64>,
    pub newton_average: Option<f64>,
    pub sweep: Vec<SweepRow>,
    pub timings: Option<ReportTimings>,
}

impl ExperimentReport {
    fn empty(experiment: &str, scenario: &Scenario, options: &RunOptions) -> Self {
        ExperimentReport {
            tool_version: TOOL_VERSION.to_string(),
            experiment: experiment.to_string(),
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            noise_sigma: scenario.noise_sigma,
            options: options.clone(),
            ga_rows: Vec::new(),
            newton_rows: Vec::new(),
            ga_average: None,
            newton_average: None,
            sweep: Vec::new(),
            timings: None,
        }
    }

    /// True when every target produced an estimate and every Newton run converged.
    pub fn all_converged(&self) -> bool {
        let ga_ok = self.ga_rows.iter().all(|r| r.status == STATUS_GA_SEED);
        let newton_ok = self
            .newton_rows
            .iter()
            .all(|r| r.status == NewtonStatus::ConvergedStep.as_str());
        ga_ok && newton_ok
    }

    /// The rows that make up the CSV output: GA seeds, then Newton refinements.
    pub fn csv_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.ga_rows.iter().chain(&self.newton_rows)
    }
}

fn rows_from_run(run: &ScenarioRun, mode: Mode) -> (Vec<ReportRow>, Vec<ReportRow>) {
    let mut ga_rows = Vec::new();
    let mut newton_rows = Vec::new();
    for outcome in &run.outcomes {
        match outcome {
            RoverOutcome::Estimated(r) => {
                ga_rows.push(ReportRow {
                    rover: r.rover_index,
                    actual_x_mm: r.actual.x,
                    actual_y_mm: r.actual.y,
                    est_x_mm: Some(r.ga_seed.0),
                    est_y_mm: Some(r.ga_seed.1),
                    rel_error: Some(r.ga_relative_error),
                    iterations: None,
                    status: STATUS_GA_SEED.to_string(),
                });
                if let Some(n) = &r.newton {
                    newton_rows.push(ReportRow {
                        rover: r.rover_index,
                        actual_x_mm: r.actual.x,
                        actual_y_mm: r.actual.y,
                        est_x_mm: Some(n.outcome.solution.0),
                        est_y_mm: Some(n.outcome.solution.1),
                        rel_error: Some(n.relative_error),
                        iterations: Some(n.outcome.iterations),
                        status: n.outcome.status.to_string(),
                    });
                }
            }
            RoverOutcome::Failed {
                rover_index,
                actual,
                ..
            } => {
                let failed = |status: &str| ReportRow {
                    rover: *rover_index,
                    actual_x_mm: actual.x,
                    actual_y_mm: actual.y,
                    est_x_mm: None,
                    est_y_mm: None,
                    rel_error: None,
                    iterations: None,
                    status: status.to_string(),
                };
                ga_rows.push(failed(STATUS_GA_FAILED));
                if mode == Mode::GaNewton {
                    newton_rows.push(failed(STATUS_NEWTON_FAILED));
                }
            }
        }
    }
    (ga_rows, newton_rows)
}

fn phase_timings(run: &ScenarioRun) -> ReportTimings {
    ReportTimings {
        ga_seconds: run.results().map(|r| r.timings.ga_seconds).sum(),
        newton_seconds: run.results().map(|r| r.timings.newton_seconds).sum(),
        total_seconds: run.summary.total_seconds,
    }
}

/// Estimates every target of `scenario` once with `options.mode`.
pub fn run_solve(scenario: &Scenario, options: &RunOptions) -> Result<ExperimentReport> {
    let measured = synthesize_measurements(scenario)?;
    let run = run_scenario(
        scenario,
        &measured,
        scenario.seed,
        &options.ga,
        &options.newton,
        options.mode,
    )?;
    let (ga_rows, newton_rows) = rows_from_run(&run, options.mode);
    let mut report = ExperimentReport::empty("solve", scenario, options);
    report.ga_rows = ga_rows;
    report.newton_rows = newton_rows;
    report.ga_average = run.summary.mean_ga_relative_error;
    report.newton_average = run.summary.mean_newton_relative_error;
    if options.record_timings {
        report.timings = Some(phase_timings(&run));
    }
    Ok(report)
}

/// GA seeds followed by Newton refinement for every target.
pub fn run_experiment1(scenario: &Scenario, options: &RunOptions) -> Result<ExperimentReport> {
    let options = RunOptions {
        mode: Mode::GaNewton,
        ..options.clone()
    };
    let mut report = run_solve(scenario, &options)?;
    report.experiment = "experiment1".to_string();
    Ok(report)
}

/// GA-only runs with `n * n` restarts for each `n`, plus one GA+Newton row
/// using `options.ga.restarts`.
pub fn run_experiment2(
    scenario: &Scenario,
    n_list: &[usize],
    options: &RunOptions,
) -> Result<ExperimentReport> {
    if n_list.is_empty() {
        return Err(Error::config("sweep needs at least one grid size n"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n == 0) {
        return Err(Error::config(format!("grid size n must be positive, got {n}")));
    }
    let measured = synthesize_measurements(scenario)?;
    let mut report = ExperimentReport::empty("experiment2", scenario, options);
    let started = Instant::now();

    let sweep_point = |restarts: usize, mode: Mode| -> Result<(ScenarioRun, Option<f64>)> {
        let ga = GaConfig {
            restarts,
            ..options.ga.clone()
        };
        let run = run_scenario(scenario, &measured, scenario.seed, &ga, &options.newton, mode)?;
        let seconds = options.record_timings.then_some(run.summary.total_seconds);
        Ok((run, seconds))
    };

    for &n in n_list {
        let (run, seconds) = sweep_point(n * n, Mode::GaOnly)?;
        report.sweep.push(SweepRow {
            n: Some(n),
            restarts: n * n,
            mode: Mode::GaOnly,
            average_relative_error: run.summary.mean_ga_relative_error,
            computing_seconds: seconds,
        });
    }

    let (run, seconds) = sweep_point(options.ga.restarts, Mode::GaNewton)?;
    report.sweep.push(SweepRow {
        n: None,
        restarts: options.ga.restarts,
        mode: Mode::GaNewton,
        average_relative_error: run.summary.mean_newton_relative_error,
        computing_seconds: seconds,
    });
    let (ga_rows, newton_rows) = rows_from_run(&run, Mode::GaNewton);
    report.ga_rows = ga_rows;
    report.newton_rows = newton_rows;
    report.ga_average = run.summary.mean_ga_relative_error;
    report.newton_average = run.summary.mean_newton_relative_error;
    if options.record_timings {
        report.timings = Some(ReportTimings {
            total_seconds: started.elapsed().as_secs_f64(),
            ..phase_timings(&run)
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

/// Fixed six-decimal rendering, rounding the shortest round-trip decimal
/// form half-to-even.
pub fn format_fixed6(value: f64) -> String {
    const PLACES: usize = 6;
    if !value.is_finite() {
        return value.to_string();
    }
    let text = format!("{}", value.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let (kept, rest) = frac.split_at(frac.len().min(PLACES));
    digits.extend_from_slice(kept);
    digits.resize(int_part.len() + PLACES, 0);

    let round_up = match rest.split_first() {
        None => false,
        Some((&first, tail)) => {
            first > 5
                || (first == 5 && (tail.iter().any(|&d| d != 0) || digits.last().unwrap() % 2 == 1))
        }
    };
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }

    let split = digits.len() - PLACES;
    let mut out = String::with_capacity(digits.len() + 2);
    if value.is_sign_negative() && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|&d| char::from(b'0' + d)));
    out.push('.');
    out.extend(digits[split..].iter().map(|&d| char::from(b'0' + d)));
    out
}

fn opt6(v: Option<f64>) -> String {
    v.map(format_fixed6).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv {
        path: "<memory>".into(),
        source: e,
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn render_rover_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for row in report.csv_rows() {
        w.write_record([
            row.rover.to_string(),
            format_fixed6(row.actual_x_mm),
            format_fixed6(row.actual_y_mm),
            opt6(row.est_x_mm),
            opt6(row.est_y_mm),
            opt6(row.rel_error),
            row.iterations.map(|i| i.to_string()).unwrap_or_default(),
            row.status.clone(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::GaOnly => "ga",
        Mode::GaNewton => "ga-newton",
    }
}

fn render_sweep_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(SWEEP_CSV_HEADER).map_err(csv_error)?;
    for row in &report.sweep {
        w.write_record([
            row.n.map(|n| n.to_string()).unwrap_or_default(),
            row.restarts.to_string(),
            mode_name(row.mode).to_string(),
            opt6(row.average_relative_error),
            opt6(row.computing_seconds),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} | scenario {} | seed {} | noise {} dBm | {}",
        report.experiment, report.scenario, report.seed, report.noise_sigma, report.tool_version
    );
    let mut table = |title: &str, rows: &[ReportRow], average: Option<f64>| {
        if rows.is_empty() {
            return;
        }
        let _ = writeln!(out, "\n{title}");
        let _ = writeln!(
            out,
            "{:>5}  {:>30}  {:>30}  {:>10}  {:>6}  {}",
            "i", "actual (mm)", "estimated (mm)", "rel.error", "iter", "status"
        );
        for r in rows {
            let est = match (r.est_x_mm, r.est_y_mm) {
                (Some(x), Some(y)) => format!("({}, {})", format_fixed6(x), format_fixed6(y)),
                _ => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:>5}  {:>30}  {:>30}  {:>10}  {:>6}  {}",
                r.rover,
                format!("({}, {})", format_fixed6(r.actual_x_mm), format_fixed6(r.actual_y_mm)),
                est,
                r.rel_error.map(format_fixed6).unwrap_or_else(|| "-".into()),
                r.iterations.map(|i| i.to_string()).unwrap_or_else(|| "-".into()),
                r.status
            );
        }
        if let Some(avg) = average {
            let _ = writeln!(out, "{:>5}  {:>30}  {:>30}  {:>10}", "-", "Average", "-", format_fixed6(avg));
        }
    };
    table("GA estimates (Newton initial values)", &report.ga_rows, report.ga_average);
    table("Newton refinement", &report.newton_rows, report.newton_average);

    if !report.sweep.is_empty() {
        let _ = writeln!(out, "\n{:>10}  {:>9}  {:>14}  {:>16}", "n", "restarts", "avg.rel.error", "time (s)");
        for row in &report.sweep {
            let _ = writeln!(
                out,
                "{:>10}  {:>9}  {:>14}  {:>16}",
                row.n.map(|n| n.to_string()).unwrap_or_else(|| "GA+Newton".into()),
                row.restarts,
                row.average_relative_error.map(format_fixed6).unwrap_or_else(|| "-".into()),
                row.computing_seconds.map(format_fixed6).unwrap_or_else(|| "-".into()),
            );
        }
    }
    if let Some(t) = &report.timings {
        let _ = writeln!(
            out,
            "\nwall clock: ga {:.3} s, newton {:.6} s, total {:.3} s",
            t.ga_seconds, t.newton_seconds, t.total_seconds
        );
    }
    out
}

/// Renders `report`. Sweep reports use the sweep CSV columns, all others the
/// per-rover columns.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv if !report.sweep.is_empty() => render_sweep_csv(report),
        ReportFormat::Csv => render_rover_csv(report),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        ReportFormat::Table => Ok(render_table(report)),
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_owned(),
            source,
        },
        other => other,
    })?;
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_report_json(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Reads a per-rover CSV back into GA and Newton row tables.
pub fn parse_rover_csv(text: &str) -> Result<(Vec<ReportRow>, Vec<ReportRow>)> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::config(format!("unexpected CSV header {headers:?}")));
    }
    let num = |field: &str, line: u64| -> Result<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field
            .parse()
            .map(Some)
            .map_err(|_| Error::config(format!("line {line}: bad number {field:?}")))
    };
    let mut ga_rows = Vec::new();
    let mut newton_rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let rover = record[0]
            .parse()
            .map_err(|_| Error::config(format!("line {line}: bad rover index {:?}", &record[0])))?;
        let row = ReportRow {
            rover,
            actual_x_mm: num(&record[1], line)?
                .ok_or_else(|| Error::config(format!("line {line}: missing actual_x_mm")))?,
            actual_y_mm: num(&record[2], line)?
                .ok_or_else(|| Error::config(format!("line {line}: missing actual_y_mm")))?,
            est_x_mm: num(&record[3], line)?,
            est_y_mm: num(&record[4], line)?,
            rel_error: num(&record[5], line)?,
            iterations: if record[6].is_empty() {
                None
            } else {
                Some(record[6].parse().map_err(|_| {
                    Error::config(format!("line {line}: bad iteration count {:?}", &record[6]))
                })?)
            },
            status: record[7].to_string(),
        };
        match row.status.as_str() {
            STATUS_GA_SEED | STATUS_GA_FAILED => ga_rows.push(row),
            s if s == STATUS_NEWTON_FAILED || NewtonStatus::parse(s).is_some() => newton_rows.push(row),
            other => return Err(Error::config(format!("line {line}: unknown status {other:?}"))),
        }
    }
    Ok((ga_rows, newton_rows))
}

/// MeasurementSet as pretty JSON.
pub fn measurements_json(set: &MeasurementSet) -> String {
    serde_json::to_string_pretty(set).expect("measurements serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn fixed6_rounding() {
        assert_eq!(format_fixed6(0.0160055), "0.016006");
        assert_eq!(format_fixed6(0.0160065), "0.016006");
        assert_eq!(format_fixed6(0.01600651), "0.016007");
        assert_eq!(format_fixed6(0.0), "0.000000");
        assert_eq!(format_fixed6(10000.0), "10000.000000");
        assert_eq!(format_fixed6(2766.00647), "2766.006470");
        assert_eq!(format_fixed6(9.9999995), "10.000000");
        assert_eq!(format_fixed6(-1.5), "-1.500000");
        assert_eq!(format_fixed6(-1e-9), "0.000000");
        assert_eq!(format_fixed6(1e-7), "0.000000");
        assert_eq!(format_fixed6(0.052413), "0.052413");
    }

    #[test]
    fn fig5_layout() {
        let s = Scenario::fig5();
        let expected = [
            (0, 0.0, 0.0),
            (1, 20000.0, 30000.0),
            (2, 10000.0, 10000.0),
            (3, 10000.0, 20000.0),
            (4, 30000.0, 40000.0),
            (5, 80000.0, 50000.0),
            (6, 90000.0, 60000.0),
            (7, 50000.0, 70000.0),
            (8, 0.0, 60000.0),
        ];
        assert_eq!(s.rovers.len(), 9);
        for (rover, (id, x, y)) in s.rovers.iter().zip(expected) {
            assert_eq!((rover.id, rover.pose.x, rover.pose.y, rover.pose.heading), (id, x, y, 0.0));
        }
    }

    #[test]
    fn scenario_validation() {
        let mut s = Scenario::fig5();
        s.rovers.retain(|r| r.id != 0);
        assert!(matches!(s.validate(), Err(Error::Config(m)) if m.contains("rover 0")));

        let mut s = Scenario::fig5();
        s.rovers[3].id = 1;
        assert!(matches!(s.validate(), Err(Error::Config(m)) if m.contains("duplicate")));

        let mut s = Scenario::fig5();
        s.rovers[0].pose.x = 5.0;
        assert!(s.validate().is_err());

        let mut s = Scenario::fig5();
        s.noise_sigma = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_scenario("{\n  \"name\": \"x\",\n  \"rovers\": [ {\"id\": 0} ]\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pose") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn synthesis_noiseless() {
        let s = Scenario::fig5();
        let m = synthesize_measurements(&s).unwrap();
        assert_eq!(m.samples.len(), 16);
        let p2 = m.pair(2).unwrap();
        assert!((p2.r_aa - p2.r_bb).abs() < 1e-12);
        let phi = crate::model::recover_phi(p2.r_aa, p2.r_bb).unwrap();
        assert!((phi - FRAC_PI_4).abs() < 1e-9);
        let p8 = m.pair(8).unwrap();
        assert!((p8.r_aa - p8.r_bb + 10.0).abs() < 1e-12);
        let phi = crate::model::recover_phi(p8.r_aa, p8.r_bb).unwrap();
        // acos is ill-conditioned at the edge of its domain; the AA/BB round
        // off alone moves phi by up to ~1e-7 here
        assert!((phi - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn synthesis_noise_is_seeded() {
        let mut s = Scenario::fig5();
        s.noise_sigma = 0.5;
        s.seed = 17;
        let a = synthesize_measurements(&s).unwrap();
        let b = synthesize_measurements(&s).unwrap();
        assert_eq!(measurements_json(&a), measurements_json(&b));
        let clean = synthesize_measurements(&Scenario { noise_sigma: 0.0, ..s.clone() }).unwrap();
        assert_ne!(a.samples, clean.samples);
        s.seed = 18;
        assert_ne!(synthesize_measurements(&s).unwrap().samples, a.samples);
    }

    #[test]
    fn synthesis_rejects_target_at_origin() {
        let mut s = Scenario::fig5();
        s.rovers[8].pose = Pose2D::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(synthesize_measurements(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn empty_report_is_header_only() {
        let s = Scenario {
            name: "empty".into(),
            rovers: vec![],
            noise_sigma: 0.0,
            seed: 0,
        };
        let report = ExperimentReport::empty("solve", &s, &RunOptions::default());
        assert_eq!(
            render_report(&report, ReportFormat::Csv).unwrap(),
            "rover,actual_x_mm,actual_y_mm,est_x_mm,est_y_mm,rel_error,iterations,status\n"
        );
    }
}
