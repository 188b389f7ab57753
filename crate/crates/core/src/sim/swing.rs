//! Swing-foot trajectories and touchdown placement.

use nalgebra::Vector3;

use crate::robot::Terrain;

use std::f64::consts::PI;

/// Foot position, velocity and acceleration along a swing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwingSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Foot position at swing-local phase `s`.
///
/// Progress along the chord follows a cycloid (zero velocity at both ends);
/// the height adds a raised-cosine arch peaking at `apex` above the chord
/// midpoint.
pub fn swing_trajectory(s: f64, lift: &Vector3<f64>, target: &Vector3<f64>, apex: f64) -> Vector3<f64> {
    swing_kinematics(s, lift, target, apex, 1.0).position
}

/// Trajectory with time derivatives for a swing lasting `duration` seconds.
pub fn swing_kinematics(
    s: f64,
    lift: &Vector3<f64>,
    target: &Vector3<f64>,
    apex: f64,
    duration: f64,
) -> SwingSample {
    let s = s.clamp(0.0, 1.0);
    let (sin, cos) = (2.0 * PI * s).sin_cos();
    let progress = s - sin / (2.0 * PI);
    let d_progress = 1.0 - cos;
    let dd_progress = 2.0 * PI * sin;
    let arch = 0.5 * apex * (1.0 - cos);
    let d_arch = apex * PI * sin;
    let dd_arch = 2.0 * apex * PI * PI * cos;

    let chord = target - lift;
    let position = if s == 1.0 { *target } else { lift + chord * progress + Vector3::z() * arch };
    let rate = 1.0 / duration;
    SwingSample {
        position,
        velocity: (chord * d_progress + Vector3::z() * d_arch) * rate,
        acceleration: (chord * dd_progress + Vector3::z() * dd_arch) * rate * rate,
    }
}

/// Capture-style touchdown point.
///
/// The hip is extrapolated to touchdown with the measured velocity; the foot
/// lands ahead of it by half a stance at the commanded velocity, corrected
/// by the capture term `capture_gain·(v − v_cmd)` and projected onto the
/// terrain.
pub fn touchdown_target(
    hip_now: &Vector3<f64>,
    velocity: &Vector3<f64>,
    commanded: &Vector3<f64>,
    swing_remaining: f64,
    stance_duration: f64,
    capture_gain: f64,
    terrain: &Terrain,
) -> Vector3<f64> {
    let err = velocity - commanded;
    let mut p = hip_now + velocity * swing_remaining + commanded * (0.5 * stance_duration) + err * capture_gain;
    p.z = terrain.query_clamped(p.x).height;
    p
}
