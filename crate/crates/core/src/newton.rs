//! Newton–Raphson refinement of a relative position.
//!
//! The unknowns are the target's planar offset `(x, y)` in millimetres. The
//! two residuals are the AA-channel model mismatch (dBm) and the bearing
//! mismatch (rad):
//!
//! ```text
//! F1(x, y) = rssi_aa(x, y, phi) - r_aa_measured
//! F2(x, y) = atan2(y, x) - phi
//! ```
//!
//! With `rho = sqrt(x^2 + y^2)` the Jacobian is
//!
//! ```text
//! dF1/dx = -(14.69 / ln 10) x / (rho (rho + 0.31))    dF1/dy = same with y
//! dF2/dx = -y / rho^2                                  dF2/dy = x / rho^2
//! ```
//!
//! There is no damping or line search; divergence is reported through
//! [`NewtonStatus`].

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rssi_2d, Channel};

/// Absolute floor for `|det J|`.
pub const SINGULAR_ABS: f64 = 1e-300;
/// `|det J|` below this fraction of `max |J_ij|^2` counts as singular.
pub const SINGULAR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Stop once the Euclidean norm of an update falls below this (mm).
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Relative perturbation used by [`jacobian_fd`].
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            step_tolerance: 1e-10,
            max_iterations: 100,
            fd_step: 1e-6,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_tolerance > 0.0 && self.step_tolerance.is_finite()) {
            return Err(Error::config("step_tolerance must be positive and finite"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::config("fd_step must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    ConvergedStep,
    MaxIterations,
    SingularJacobian,
    DivergedNonFinite,
}

impl NewtonStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NewtonStatus::ConvergedStep => "converged_step",
            NewtonStatus::MaxIterations => "max_iterations",
            NewtonStatus::SingularJacobian => "singular_jacobian",
            NewtonStatus::DivergedNonFinite => "diverged_non_finite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            NewtonStatus::ConvergedStep,
            NewtonStatus::MaxIterations,
            NewtonStatus::SingularJacobian,
            NewtonStatus::DivergedNonFinite,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

impl std::fmt::Display for NewtonStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    /// Last finite iterate.
    pub solution: (f64, f64),
    pub iterations: usize,
    pub status: NewtonStatus,
    pub final_residual_norm: f64,
    /// Norm of every update taken, in order.
    pub step_norms: Vec<f64>,
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2x2(pub [[f64; 2]; 2]);

impl Jacobian2x2 {
    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn mul_vec(&self, v: (f64, f64)) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0;
        (a * v.0 + b * v.1, c * v.0 + d * v.1)
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularJacobian;

impl std::fmt::Display for SingularJacobian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("singular Jacobian")
    }
}

impl std::error::Error for SingularJacobian {}

/// Bearing of `(x, y)` from the origin. Continuous across `x = 0` for `y > 0`.
pub fn bearing(x: f64, y: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::domain("bearing undefined at the origin"));
    }
    Ok(y.atan2(x))
}

pub fn residual(candidate: (f64, f64), phi: f64, r_aa_measured: f64) -> Result<(f64, f64)> {
    let (x, y) = candidate;
    let f1 = rssi_2d(Channel::AA, x, y, phi)? - r_aa_measured;
    let f2 = bearing(x, y)? - phi;
    Ok((f1, f2))
}

pub fn jacobian_analytic(candidate: (f64, f64)) -> Result<Jacobian2x2> {
    let (x, y) = candidate;
    let rho2 = x * x + y * y;
    if rho2 == 0.0 || !rho2.is_finite() {
        return Err(Error::domain("Jacobian undefined at the origin"));
    }
    let rho = rho2.sqrt();
    let k = -(14.69 / LN_10) / (rho * (rho + 0.31));
    Ok(Jacobian2x2([[k * x, k * y], [-y / rho2, x / rho2]]))
}

/// Central-difference Jacobian with step `fd_step * rho` on each coordinate.
pub fn jacobian_fd(candidate: (f64, f64), phi: f64, r_aa_measured: f64, fd_step: f64) -> Result<Jacobian2x2> {
    let (x, y) = candidate;
    let h = fd_step * x.hypot(y);
    let fx_p = residual((x + h, y), phi, r_aa_measured)?;
    let fx_m = residual((x - h, y), phi, r_aa_measured)?;
    let fy_p = residual((x, y + h), phi, r_aa_measured)?;
    let fy_m = residual((x, y - h), phi, r_aa_measured)?;
    let d = 2.0 * h;
    Ok(Jacobian2x2([
        [(fx_p.0 - fx_m.0) / d, (fy_p.0 - fy_m.0) / d],
        [(fx_p.1 - fx_m.1) / d, (fy_p.1 - fy_m.1) / d],
    ]))
}

/// Solves `J * delta = rhs` by Cramer's rule.
pub fn solve_2x2(j: &Jacobian2x2, rhs: (f64, f64)) -> Result<(f64, f64), SingularJacobian> {
    let det = j.det();
    let scale = j.max_abs();
    if !det.is_finite() || det.abs() <= SINGULAR_ABS || det.abs() <= SINGULAR_REL * scale * scale {
        return Err(SingularJacobian);
    }
    let [[a, b], [c, d]] = j.0;
    Ok(((rhs.0 * d - b * rhs.1) / det, (a * rhs.1 - c * rhs.0) / det))
}

/// Plain Newton iteration from `initial`.
///
/// Numerical failure is reported in the outcome's status; `Err` is returned
/// only for an invalid configuration or a starting point at the origin.
pub fn newton_solve(
    initial: (f64, f64),
    phi: f64,
    r_aa_measured: f64,
    config: &NewtonConfig,
) -> Result<NewtonOutcome> {
    config.validate()?;
    if !(initial.0.is_finite() && initial.1.is_finite()) {
        return Err(Error::domain("Newton start must be finite"));
    }
    let mut current = initial;
    let mut f = residual(current, phi, r_aa_measured)?;
    let mut step_norms = Vec::new();
    let mut status = NewtonStatus::MaxIterations;

    while step_norms.len() < config.max_iterations {
        let Ok(j) = jacobian_analytic(current) else {
            status = NewtonStatus::SingularJacobian;
            break;
        };
        let Ok(delta) = solve_2x2(&j, (-f.0, -f.1)) else {
            status = NewtonStatus::SingularJacobian;
            break;
        };
        let next = (current.0 + delta.0, current.1 + delta.1);
        let norm = delta.0.hypot(delta.1);
        if !(next.0.is_finite() && next.1.is_finite() && norm.is_finite()) {
            status = NewtonStatus::DivergedNonFinite;
            break;
        }
        let Ok(next_f) = residual(next, phi, r_aa_measured) else {
            // landed exactly on the origin
            status = NewtonStatus::SingularJacobian;
            break;
        };
        step_norms.push(norm);
        current = next;
        f = next_f;
        if norm < config.step_tolerance {
            status = NewtonStatus::ConvergedStep;
            break;
        }
    }

    Ok(NewtonOutcome {
        solution: current,
        iterations: step_norms.len(),
        status,
        final_residual_norm: f.0.hypot(f.1),
        step_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_PI_4;

    fn measured_aa(x: f64, y: f64) -> (f64, f64) {
        let phi = y.atan2(x);
        (phi, rssi_2d(Channel::AA, x, y, phi).unwrap())
    }

    #[test]
    fn residual_vanishes_at_truth() {
        let (phi, r) = measured_aa(10000.0, 10000.0);
        assert_eq!(residual((10000.0, 10000.0), phi, r).unwrap(), (0.0, 0.0));
        let (f1, f2) = residual((20000.0, 20000.0), phi, r).unwrap();
        assert_abs_diff_eq!(f2, 0.0, epsilon = 1e-15);
        assert!(f1.abs() > 1.0);
        assert!(residual((0.0, 0.0), phi, r).is_err());
    }

    #[test]
    fn residual_oracle_at_table_seed() {
        let (_, r) = measured_aa(10000.0, 10000.0);
        // independent high-precision evaluation of both residual formulas
        let (f1, f2) = residual((10122.98584, 10196.990967), FRAC_PI_4, r).unwrap();
        assert_abs_diff_eq!(f1, -0.101_301_395_641_243_29, epsilon = 1e-12);
        assert_abs_diff_eq!(f2, 0.003_641_972_650_960_437, epsilon = 1e-14);
    }

    #[test]
    fn jacobian_on_axis() {
        let j = jacobian_analytic((5000.0, 0.0)).unwrap();
        assert_eq!(j.0[1][0], 0.0);
        assert_relative_eq!(j.0[1][1], 1.0 / 5000.0);
        assert!(jacobian_analytic((0.0, 0.0)).is_err());
    }

    #[test]
    fn jacobian_row_one_symmetry() {
        let a = jacobian_analytic((3000.0, 7000.0)).unwrap();
        let b = jacobian_analytic((7000.0, 3000.0)).unwrap();
        assert_eq!(a.0[0][0], b.0[0][1]);
        assert_eq!(a.0[0][1], b.0[0][0]);
    }

    #[test]
    fn jacobian_matches_fd_at_reference_point() {
        let (phi, r) = measured_aa(10000.0, 10000.0);
        let a = jacobian_analytic((10000.0, 10000.0)).unwrap();
        let n = jacobian_fd((10000.0, 10000.0), phi, r, 1e-6).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(a.0[i][k], n.0[i][k], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn solve_small_systems() {
        let id = Jacobian2x2([[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(solve_2x2(&id, (3.0, -4.0)).unwrap(), (3.0, -4.0));
        let diag = Jacobian2x2([[2.0, 0.0], [0.0, 4.0]]);
        assert_eq!(solve_2x2(&diag, (2.0, 8.0)).unwrap(), (1.0, 2.0));
        let sing = Jacobian2x2([[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(solve_2x2(&sing, (1.0, 1.0)), Err(SingularJacobian));
        // tiny but well-conditioned matrices are not singular
        let small = Jacobian2x2([[1e-9, 0.0], [0.0, 1e-9]]);
        assert!(solve_2x2(&small, (1.0, 1.0)).is_ok());
    }

    #[test]
    fn exact_start_converges_in_one_step() {
        let (phi, r) = measured_aa(30000.0, 40000.0);
        let out = newton_solve((30000.0, 40000.0), phi, r, &NewtonConfig::default()).unwrap();
        assert_eq!(out.status, NewtonStatus::ConvergedStep);
        assert_eq!(out.iterations, 1);
        assert!(out.step_norms[0] < 1e-10);
    }

    #[test]
    fn iteration_cap_is_respected() {
        let (phi, r) = measured_aa(30000.0, 40000.0);
        let cfg = NewtonConfig {
            max_iterations: 2,
            ..NewtonConfig::default()
        };
        let out = newton_solve((20000.0, 45000.0), phi, r, &cfg).unwrap();
        assert_eq!(out.status, NewtonStatus::MaxIterations);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = NewtonConfig::default();
        assert!(newton_solve((0.0, 0.0), 0.5, -90.0, &cfg).is_err());
        let bad = NewtonConfig {
            step_tolerance: 0.0,
            ..cfg
        };
        assert!(newton_solve((1.0, 1.0), 0.5, -90.0, &bad).is_err());
    }

    #[test]
    fn status_names_round_trip() {
        for st in [
            NewtonStatus::ConvergedStep,
            NewtonStatus::MaxIterations,
            NewtonStatus::SingularJacobian,
            NewtonStatus::DivergedNonFinite,
        ] {
            assert_eq!(NewtonStatus::parse(st.as_str()), Some(st));
        }
    }
}
