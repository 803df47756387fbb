//! Per-rover estimation: bearing from the AA/BB difference, a multi-start GA
//! seed, then Newton refinement, scored by relative range error.
//!
//! All rovers are assumed to share one heading. Estimation happens in the
//! reference rover's body frame and results are rotated back to world axes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{self, derive_seed, GaConfig};
use crate::harness::Scenario;
use crate::model::{recover_phi, relative_position, Channel, Pose2D, RssiSample};
use crate::newton::{newton_solve, NewtonConfig, NewtonOutcome, NewtonStatus};

/// AA and BB readings for one rover pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPair {
    pub r_aa: f64,
    pub r_bb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub noise_sigma: f64,
    pub samples: Vec<RssiSample>,
}

impl MeasurementSet {
    /// The AA/BB pair between the reference rover `0` and `rover`.
    pub fn pair(&self, rover: usize) -> Result<MeasuredPair> {
        let find = |channel: Channel| -> Result<f64> {
            let mut hits = self
                .samples
                .iter()
                .filter(|s| s.rover_pair == (0, rover) && s.channel == channel);
            match (hits.next(), hits.next()) {
                (Some(s), None) => Ok(s.value),
                (None, _) => Err(Error::config(format!(
                    "no {channel:?} sample for rover pair (0, {rover})"
                ))),
                (Some(_), Some(_)) => Err(Error::config(format!(
                    "duplicate {channel:?} samples for rover pair (0, {rover})"
                ))),
            }
        };
        Ok(MeasuredPair {
            r_aa: find(Channel::AA)?,
            r_bb: find(Channel::BB)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GaOnly,
    GaNewton,
}

/// Relative range error `|d - d'| / d` against the origin.
pub fn relative_error(actual: &Pose2D, estimated: (f64, f64)) -> Result<f64> {
    let d = actual.range();
    if d == 0.0 {
        return Err(Error::domain("relative error undefined for a rover at the origin"));
    }
    Ok((d - estimated.0.hypot(estimated.1)).abs() / d)
}

/// Wall-clock seconds spent in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub ga_seconds: f64,
    pub newton_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonEstimate {
    /// Newton output; `solution` is in world axes.
    pub outcome: NewtonOutcome,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub rover_index: usize,
    pub actual: Pose2D,
    pub phi_used: f64,
    /// Best GA individual in world axes.
    pub ga_seed: (f64, f64),
    pub ga_fitness: f64,
    pub ga_best_restart: usize,
    pub ga_relative_error: f64,
    pub newton: Option<NewtonEstimate>,
    pub timings: PhaseTimings,
}

impl EstimationResult {
    /// Position of the last phase that ran.
    pub fn final_estimate(&self) -> (f64, f64) {
        self.newton
            .as_ref()
            .map_or(self.ga_seed, |n| n.outcome.solution)
    }

    pub fn final_relative_error(&self) -> f64 {
        self.newton
            .as_ref()
            .map_or(self.ga_relative_error, |n| n.relative_error)
    }

    pub fn converged(&self) -> bool {
        self.newton
            .as_ref()
            .map_or(true, |n| n.outcome.status == NewtonStatus::ConvergedStep)
    }
}

/// One target rover's estimate, or why it could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoverOutcome {
    Estimated(EstimationResult),
    Failed {
        rover_index: usize,
        actual: Pose2D,
        reason: String,
    },
}

impl RoverOutcome {
    pub fn rover_index(&self) -> usize {
        match self {
            RoverOutcome::Estimated(r) => r.rover_index,
            RoverOutcome::Failed { rover_index, .. } => *rover_index,
        }
    }

    pub fn estimated(&self) -> Option<&EstimationResult> {
        match self {
            RoverOutcome::Estimated(r) => Some(r),
            RoverOutcome::Failed { .. } => None,
        }
    }
}

fn rotate((x, y): (f64, f64), angle: f64) -> (f64, f64) {
    if angle == 0.0 {
        return (x, y);
    }
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Estimates one target rover from its AA/BB pair with the reference rover.
///
/// `reference` is the pose of the rover the measurements are taken against;
/// `ga_config.rng_seed` is used as given.
pub fn estimate_rover(
    measured: &MeasurementSet,
    rover_index: usize,
    actual: &Pose2D,
    reference: &Pose2D,
    ga_config: &GaConfig,
    newton_config: &NewtonConfig,
    mode: Mode,
) -> Result<EstimationResult> {
    let pair = measured.pair(rover_index)?;
    let phi = recover_phi(pair.r_aa, pair.r_bb)?;
    let to_world = |(x, y): (f64, f64)| {
        let (wx, wy) = rotate((x, y), reference.heading);
        (wx + reference.x, wy + reference.y)
    };

    let start = Instant::now();
    let ga = ga::multi_start(ga_config, phi, &pair)?;
    let ga_seconds = start.elapsed().as_secs_f64();
    let ga_seed = to_world(ga.best.best);
    let ga_relative_error = relative_error(actual, ga_seed)?;

    let mut newton_seconds = 0.0;
    let newton = match mode {
        Mode::GaOnly => None,
        Mode::GaNewton => {
            let start = Instant::now();
            let mut outcome = newton_solve(ga.best.best, phi, pair.r_aa, newton_config)?;
            newton_seconds = start.elapsed().as_secs_f64();
            outcome.solution = to_world(outcome.solution);
            let relative_error = relative_error(actual, outcome.solution)?;
            Some(NewtonEstimate {
                outcome,
                relative_error,
            })
        }
    };

    Ok(EstimationResult {
        rover_index,
        actual: *actual,
        phi_used: phi,
        ga_seed,
        ga_fitness: ga.best.best_fitness,
        ga_best_restart: ga.best_restart,
        ga_relative_error,
        newton,
        timings: PhaseTimings {
            ga_seconds,
            newton_seconds,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_ga_relative_error: Option<f64>,
    pub mean_newton_relative_error: Option<f64>,
    pub estimated: usize,
    pub failed: usize,
    pub not_converged: usize,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub outcomes: Vec<RoverOutcome>,
    pub summary: Summary,
}

impl ScenarioRun {
    pub fn results(&self) -> impl Iterator<Item = &EstimationResult> {
        self.outcomes.iter().filter_map(RoverOutcome::estimated)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Summary {
    pub fn from_outcomes(outcomes: &[RoverOutcome], total_seconds: f64) -> Self {
        let results: Vec<&EstimationResult> =
            outcomes.iter().filter_map(RoverOutcome::estimated).collect();
        Summary {
            mean_ga_relative_error: mean(results.iter().map(|r| r.ga_relative_error)),
            mean_newton_relative_error: mean(
                results
                    .iter()
                    .filter_map(|r| r.newton.as_ref().map(|n| n.relative_error)),
            ),
            estimated: results.len(),
            failed: outcomes.len() - results.len(),
            not_converged: results.iter().filter(|r| !r.converged()).count(),
            total_seconds,
        }
    }
}

/// Checks the structural requirements for estimation and returns the
/// reference rover's pose.
pub fn check_scenario(scenario: &Scenario) -> Result<Pose2D> {
    scenario.validate()?;
    let reference = scenario.reference().pose;
    if scenario.targets().next().is_none() {
        return Err(Error::config("scenario has no target rovers besides rover 0"));
    }
    for rover in scenario.targets() {
        if rover.pose.heading != reference.heading {
            return Err(Error::config(format!(
                "rover {} heading {} differs from the reference heading {}; all rovers must share one orientation",
                rover.id, rover.pose.heading, reference.heading
            )));
        }
        let rel = relative_position(&reference, &rover.pose, (0.0, 0.0), (0.0, 0.0));
        if rel.x < 0.0 {
            return Err(Error::config(format!(
                "rover {} lies at x = {} in the reference frame; only targets with x >= 0 are supported",
                rover.id, rel.x
            )));
        }
    }
    Ok(reference)
}

/// Estimates every target rover of `scenario` independently.
///
/// Rover `i` uses GA seed `derive_seed(seed, i)`. Per-rover failures are
/// recorded in the outcome list instead of aborting the run.
pub fn run_scenario(
    scenario: &Scenario,
    measured: &MeasurementSet,
    seed: u64,
    ga_config: &GaConfig,
    newton_config: &NewtonConfig,
    mode: Mode,
) -> Result<ScenarioRun> {
    let reference = check_scenario(scenario)?;
    ga_config.validate()?;
    newton_config.validate()?;

    let start = Instant::now();
    let outcomes: Vec<RoverOutcome> = scenario
        .targets()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|rover| {
            let cfg = ga_config.with_seed(derive_seed(seed, rover.id as u64));
            match estimate_rover(measured, rover.id, &rover.pose, &reference, &cfg, newton_config, mode) {
                Ok(r) => RoverOutcome::Estimated(r),
                Err(e) => RoverOutcome::Failed {
                    rover_index: rover.id,
                    actual: rover.pose,
                    reason: e.to_string(),
                },
            }
        })
        .collect();
    let mut outcomes = outcomes;
    outcomes.sort_by_key(RoverOutcome::rover_index);
    let summary = Summary::from_outcomes(&outcomes, start.elapsed().as_secs_f64());
    Ok(ScenarioRun { outcomes, summary })
}
