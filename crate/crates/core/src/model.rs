//! Forward RSSI model and planar geometry.
//!
//! All lengths are millimetres. The path-loss curve is fed raw millimetre
//! distances; since measurements are synthesized and inverted with the same
//! curve, the unit choice cancels end to end.
//!
//! The vertical gain is implemented exactly as the published formula. Its
//! leading factor is `cos(5π/2)`, which is zero, so the function is the
//! constant `-1` wherever it is defined.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PATH_LOSS_SLOPE: f64 = 14.69;
const PATH_LOSS_OFFSET: f64 = 0.31;
const PATH_LOSS_INTERCEPT: f64 = -49.17;

/// Tolerance on `|r_aa - r_bb| - 10` before the pair is considered inconsistent.
pub const PHI_CLAMP_TOLERANCE: f64 = 1e-6;

/// Antenna A offset from the rover centre (mid-left edge of a 50 mm body).
pub const ANTENNA_A_OFFSET: (f64, f64) = (-25.0, 0.0);
/// Antenna B offset from the rover centre (mid-bottom edge of a 50 mm body).
pub const ANTENNA_B_OFFSET: (f64, f64) = (0.0, -25.0);

/// Planar pose of a rover centre in millimetres, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Result<Self> {
        let pose = Pose2D { x, y, heading };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::domain(format!(
                "pose coordinates must be finite, got ({}, {})",
                self.x, self.y
            )));
        }
        if !(-PI..PI).contains(&self.heading) {
            return Err(Error::domain(format!(
                "heading {} outside [-pi, pi)",
                self.heading
            )));
        }
        Ok(())
    }

    /// Distance of the rover centre from the world origin.
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Position of one antenna expressed in another antenna's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePosition3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RelativePosition3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RelativePosition3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Horizontal (`phi`) and elevation (`theta`) angles of one antenna seen from another.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnglePair {
    pub phi: f64,
    pub theta: f64,
}

/// Antenna pairing of an RSSI sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    AA,
    BB,
    AB,
    BA,
}

/// One RSSI sample between two rovers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub channel: Channel,
    /// Signal strength in dBm.
    pub value: f64,
    pub rover_pair: (usize, usize),
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

/// Distance-dependent RSSI component in dBm.
pub fn path_loss(distance: f64) -> Result<f64> {
    if !distance.is_finite() || distance < 0.0 {
        return Err(Error::domain(format!(
            "path loss distance must be finite and non-negative, got {distance}"
        )));
    }
    Ok(-PATH_LOSS_SLOPE * (distance + PATH_LOSS_OFFSET).log10() + PATH_LOSS_INTERCEPT)
}

/// Horizontal antenna gain `(5/2)(cos 2φ - 1)`, in `[-5, 0]`.
pub fn horizontal_gain(phi: f64) -> Result<f64> {
    require_finite("phi", phi)?;
    Ok(2.5 * ((2.0 * phi).cos() - 1.0))
}

/// Vertical antenna gain, evaluated term by term as published.
pub fn vertical_gain(theta: f64) -> Result<f64> {
    require_finite("theta", theta)?;
    let lobe = 2.5 * PI;
    let denom = (lobe - theta.abs()).sin();
    // cos(5π/2 - |θ|)/sin(5π/2 - |θ|) blows up where the sine vanishes.
    if denom.abs() < 1e-12 {
        return Err(Error::domain(format!(
            "vertical gain undefined at theta = {theta}"
        )));
    }
    Ok(25.0 * (lobe.cos() * (lobe - theta.abs()).cos() / denom) - 1.0)
}

/// Horizontal angle of `rel` in its frame. Defined on the half-plane `x >= 0`.
pub fn horizontal_angle(rel: &RelativePosition3) -> Result<f64> {
    if rel.x == 0.0 && rel.y == 0.0 {
        return Err(Error::domain("horizontal angle undefined at the origin"));
    }
    if rel.x < 0.0 {
        return Err(Error::domain(format!(
            "horizontal angle only defined for x >= 0, got x = {}",
            rel.x
        )));
    }
    if rel.x == 0.0 {
        return Ok(FRAC_PI_2.copysign(rel.y));
    }
    Ok((rel.y / rel.x).atan())
}

/// Elevation angle of `rel` above its frame's xy plane.
pub fn elevation_angle(rel: &RelativePosition3) -> Result<f64> {
    let planar = rel.x.hypot(rel.y);
    if planar == 0.0 {
        return Err(Error::domain("elevation angle undefined on the z axis"));
    }
    Ok((rel.z / planar).atan())
}

/// Offset of the target antenna from the origin antenna, in the origin rover's
/// body frame. Planar, so `z` is always zero.
pub fn relative_position(
    origin_pose: &Pose2D,
    target_pose: &Pose2D,
    antenna_offset_origin: (f64, f64),
    antenna_offset_target: (f64, f64),
) -> RelativePosition3 {
    let (ox, oy) = rotate(antenna_offset_origin, origin_pose.heading);
    let (tx, ty) = rotate(antenna_offset_target, target_pose.heading);
    let dx = (target_pose.x + tx) - (origin_pose.x + ox);
    let dy = (target_pose.y + ty) - (origin_pose.y + oy);
    let (x, y) = rotate((dx, dy), -origin_pose.heading);
    RelativePosition3 { x, y, z: 0.0 }
}

fn rotate((x, y): (f64, f64), angle: f64) -> (f64, f64) {
    if angle == 0.0 {
        return (x, y);
    }
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Planar channel model between two co-oriented rovers at relative position
/// `(x, y)`, `phi` being the acute bearing angle.
pub fn rssi_2d(channel: Channel, x: f64, y: f64, phi: f64) -> Result<f64> {
    require_finite("x", x)?;
    require_finite("y", y)?;
    require_finite("phi", phi)?;
    if x == 0.0 && y == 0.0 {
        return Err(Error::domain("planar RSSI undefined at the origin"));
    }
    let loss = path_loss(x.hypot(y))?;
    let gain = match channel {
        Channel::AA => 5.0 * ((2.0 * phi).cos() - 1.0),
        Channel::BB => 5.0 * ((2.0 * (FRAC_PI_2 - phi)).cos() - 1.0),
        other => {
            return Err(Error::domain(format!(
                "planar model only covers AA and BB channels, got {other:?}"
            )))
        }
    };
    Ok(loss + gain)
}

/// Full antenna-pair model: path loss plus horizontal and vertical gains at both ends.
pub fn rssi_3d(
    rel: &RelativePosition3,
    angles_fwd: &AnglePair,
    angles_rev: &AnglePair,
) -> Result<f64> {
    if rel.x == 0.0 && rel.y == 0.0 && rel.z == 0.0 {
        return Err(Error::domain("RSSI undefined for coincident antennas"));
    }
    Ok(path_loss(rel.norm())?
        + horizontal_gain(angles_fwd.phi)?
        + horizontal_gain(angles_rev.phi)?
        + vertical_gain(angles_fwd.theta)?
        + vertical_gain(angles_rev.theta)?)
}

/// Acute bearing angle from the AA/BB difference, `r_aa - r_bb = 10 cos 2φ`.
pub fn recover_phi(r_aa: f64, r_bb: f64) -> Result<f64> {
    recover_phi_with_tolerance(r_aa, r_bb, PHI_CLAMP_TOLERANCE)
}

pub fn recover_phi_with_tolerance(r_aa: f64, r_bb: f64, tol_clamp: f64) -> Result<f64> {
    require_finite("r_aa", r_aa)?;
    require_finite("r_bb", r_bb)?;
    let diff = r_aa - r_bb;
    if diff.abs() > 10.0 + tol_clamp {
        return Err(Error::MeasurementInconsistency(format!(
            "|r_aa - r_bb| = {} exceeds 10 dB",
            diff.abs()
        )));
    }
    Ok(0.5 * (diff / 10.0).clamp(-1.0, 1.0).acos())
}
