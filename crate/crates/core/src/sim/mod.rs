//! Single-rigid-body quadruped simulation.
//!
//! The trunk is one rigid body; legs are massless links ending in point
//! feet. Stance feet exert ground reaction forces chosen by
//! [`forces::distribute_forces`], swing feet follow
//! [`swing::swing_trajectory`], and joint torques are recovered through the
//! leg Jacobians for energy accounting.

pub mod forces;
pub mod log;
pub mod state;
pub mod swing;
pub mod torques;
pub mod trial;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::gait::DEFAULT_PERIOD_S;
use crate::transition::{FsmConfig, DEFAULT_TRANSITION_S};

pub use forces::{distribute_forces, Contact, ContactForceSet, ForceDistribution, ForceStatus, Wrench};
pub use log::{write_stride_csv, StrideLog};
pub use state::{step, BodyState};
pub use swing::swing_trajectory;
pub use torques::{stance_torques, swing_torques};
pub use trial::{run_trial, run_trial_with_hook, EventRecord, GaitSource, StrideBoundary, TrialOutput, TrialSetup};

/// Simulation and controller settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Stride period, s.
    pub period_s: f64,
    /// Linear PD gains, N/m and N·s/m per axis.
    pub kp_linear: f64,
    pub kd_linear: f64,
    /// Angular PD gains, N·m/rad and N·m·s/rad.
    pub kp_angular: f64,
    pub kd_angular: f64,
    /// Swing apex above the lift-touchdown chord, m.
    pub swing_apex: f64,
    /// Height above ground counted as "foot in the air", m.
    pub clearance: f64,
    pub max_roll: f64,
    pub max_pitch: f64,
    /// Failure when trunk height drops below this fraction of nominal.
    pub min_height_ratio: f64,
    /// Per-foot normal force cap as a multiple of body weight.
    pub f_max_ratio: f64,
    /// Moment-row weight in the least-squares force fallback.
    pub moment_weight: f64,
    /// Per-leg torque norm above which a sample is flagged, N·m.
    pub torque_limit: f64,
    /// Fraction by which touchdown points are drawn from under the hips
    /// toward the trunk centre along the body axis.
    pub stance_narrowing: f64,
    /// Capture-point gain on velocity error for foot placement, s.
    pub capture_gain: f64,
    /// Time constant of the velocity low-pass feeding foot placement, s.
    pub velocity_filter_s: f64,
    /// Standard deviation of the horizontal push redrawn every stride, N.
    pub push_std: f64,
    /// Height of the push application point above the centre of mass, m.
    pub push_height: f64,
    /// Feed the inertial reaction of swinging feet back into the trunk.
    pub swing_reaction: bool,
    /// Standard deviation of the initial roll and pitch, rad.
    pub initial_attitude_std: f64,
    pub seed: u64,
    pub transition_duration_s: f64,
    pub dwell_strides: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            period_s: DEFAULT_PERIOD_S,
            kp_linear: 400.0,
            kd_linear: 40.0,
            kp_angular: 60.0,
            kd_angular: 8.0,
            swing_apex: 0.08,
            clearance: 0.02,
            max_roll: 0.6,
            max_pitch: 0.6,
            min_height_ratio: 0.4,
            f_max_ratio: 2.0,
            moment_weight: 4.0,
            torque_limit: 80.0,
            capture_gain: 0.175,
            stance_narrowing: 0.6,
            velocity_filter_s: 0.2,
            push_std: 6.0,
            push_height: 0.3,
            swing_reaction: true,
            initial_attitude_std: 0.02,
            seed: 7,
            transition_duration_s: DEFAULT_TRANSITION_S,
            dwell_strides: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 2e-3) {
            return Err(invalid_config(format!("dt = {} must be in (0, 2 ms]", self.dt)));
        }
        if !(self.period_s > 0.0) {
            return Err(invalid_config("stride period must be positive"));
        }
        let ticks = self.period_s / self.dt;
        if (ticks - ticks.round()).abs() > 1e-6 {
            return Err(invalid_config("stride period must be a whole number of steps"));
        }
        let gains = [self.kp_linear, self.kd_linear, self.kp_angular, self.kd_angular];
        if gains.iter().any(|g| !(*g >= 0.0)) {
            return Err(invalid_config("controller gains must be non-negative"));
        }
        if !(self.clearance > 0.0) || !(self.swing_apex >= 0.0) {
            return Err(invalid_config("clearance must be positive and apex non-negative"));
        }
        if !(self.max_roll > 0.0 && self.max_pitch > 0.0) || !(0.0..1.0).contains(&self.min_height_ratio) {
            return Err(invalid_config("failure thresholds out of range"));
        }
        if !(self.f_max_ratio > 0.0) || !(self.moment_weight > 0.0) || !(self.torque_limit > 0.0) {
            return Err(invalid_config("force cap, moment weight and torque limit must be positive"));
        }
        if !(0.0..1.0).contains(&self.stance_narrowing) {
            return Err(invalid_config("stance narrowing must be in [0, 1)"));
        }
        if self.velocity_filter_s < 0.0 {
            return Err(invalid_config("velocity filter time constant must be non-negative"));
        }
        if self.push_std < 0.0 || self.initial_attitude_std < 0.0 || self.capture_gain < 0.0 {
            return Err(invalid_config("noise levels and capture gain must be non-negative"));
        }
        if !(self.transition_duration_s > 0.0) {
            return Err(invalid_config("transition duration must be positive"));
        }
        Ok(())
    }

    pub fn ticks_per_stride(&self) -> usize {
        (self.period_s / self.dt).round() as usize
    }

    pub fn fsm(&self) -> FsmConfig {
        FsmConfig {
            transition_duration_s: self.transition_duration_s,
            dwell_strides: self.dwell_strides,
            period_s: self.period_s,
        }
    }
}
