//! Energy, cost of transport, stability index and the combined gait cost.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::robot::{RobotParams, Terrain};
use crate::sim::StrideLog;

/// Displacement (m) and speed (m/s) below which ratios are undefined.
pub const EPSILON: f64 = 1e-3;
/// Worst-case values assigned to failed trials.
pub const COT_BOUND: f64 = 1.25;
pub const STB_BOUND: f64 = 1.36;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StbWeights {
    /// Normal-velocity ratio.
    pub w1: f64,
    /// Pitch error against the terrain.
    pub w2: f64,
    /// Roll.
    pub w3: f64,
    /// Pitch and roll rates.
    pub w4: f64,
}

impl Default for StbWeights {
    fn default() -> Self {
        Self { w1: 0.7, w2: 1.0, w3: 1.0, w4: 0.3 }
    }
}

impl StbWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.w1, self.w2, self.w3, self.w4].iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid_config("stability weights must be non-negative"));
        }
        Ok(())
    }
}

/// Which results are bounded by [`COT_BOUND`]/[`STB_BOUND`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampMode {
    /// Failed results take the bounds; successful ones are capped at them.
    #[default]
    All,
    /// Only failed results are touched.
    FailedOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub weights: StbWeights,
    pub clamp: ClampMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { weights: StbWeights::default(), clamp: ClampMode::All }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrideMetrics {
    /// Positive mechanical work, J.
    pub work: f64,
    pub cot: f64,
    pub stb: f64,
    pub failed: bool,
    /// Samples where the speed was too small for the velocity ratio.
    pub stb_guards: usize,
}

impl StrideMetrics {
    pub fn failure() -> Self {
        Self { work: 0.0, cot: COT_BOUND, stb: STB_BOUND, failed: true, stb_guards: 0 }
    }

    pub fn j_e(&self, c: f64) -> Result<f64> {
        j_e(self.cot, self.stb, c)
    }
}

/// Positive joint work over the log, trapezoidal in time. Negative joint
/// power is dissipated and contributes nothing.
pub fn stride_energy(log: &StrideLog) -> Result<f64> {
    log.check_aligned()?;
    let power: Vec<f64> = log
        .torques
        .iter()
        .zip(&log.joint_velocities)
        .map(|(u, w)| u.iter().zip(w.iter()).map(|(u, w)| (u * w).max(0.0)).sum())
        .collect();
    Ok(trapezoid(&log.time, &power))
}

pub(crate) fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum()
}

pub fn cot(work: f64, mass: f64, displacement: f64, gravity: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(invalid_arg("mass must be positive"));
    }
    if !(displacement > EPSILON) {
        return Err(Error::UndefinedDisplacement(displacement));
    }
    Ok(work / (mass * gravity * displacement))
}

/// Stability index, time-averaged over the log.
pub fn stb(log: &StrideLog, terrain: &Terrain, weights: &StbWeights) -> Result<f64> {
    stb_with_guards(log, terrain, weights).map(|(s, _)| s)
}

/// Stability index and the number of samples whose velocity ratio was
/// guarded against a vanishing speed.
pub fn stb_with_guards(log: &StrideLog, terrain: &Terrain, weights: &StbWeights) -> Result<(f64, usize)> {
    log.check_aligned()?;
    if log.is_empty() {
        return Err(Error::InvalidLog("empty log".into()));
    }
    let mut guards = 0;
    let values: Vec<f64> = log
        .body
        .iter()
        .map(|b| {
            let ground = terrain.query_clamped(b.position.x);
            let v_b = b.velocity.dot(&ground.tangent());
            let v_bn = b.velocity.dot(&ground.normal);
            let ratio = if v_b.abs() > EPSILON {
                (v_bn / v_b).abs()
            } else {
                guards += 1;
                if v_bn.abs() <= EPSILON {
                    0.0
                } else {
                    1.0
                }
            };
            let (pitch_rate, roll_rate) = b.attitude_rates();
            weights.w1 * ratio
                + weights.w2 * (b.pitch() - ground.inclination).abs()
                + weights.w3 * b.roll().abs()
                + weights.w4 * (pitch_rate.abs() + roll_rate.abs())
        })
        .collect();
    let value = if log.len() == 1 {
        values[0]
    } else {
        let span = log.time[log.len() - 1] - log.time[0];
        if span > 0.0 {
            trapezoid(&log.time, &values) / span
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    Ok((value, guards))
}

/// `J_e = c·STB + (1 − c)·CoT`.
pub fn j_e(cot: f64, stb: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(invalid_arg(format!("stability weight c = {c} outside [0, 1]")));
    }
    Ok(c * stb + (1.0 - c) * cot)
}

pub fn clamp_failed(m: StrideMetrics) -> StrideMetrics {
    clamp_with(m, ClampMode::All)
}

pub fn clamp_with(m: StrideMetrics, mode: ClampMode) -> StrideMetrics {
    if m.failed {
        return StrideMetrics { cot: COT_BOUND, stb: STB_BOUND, ..m };
    }
    match mode {
        ClampMode::All => StrideMetrics { cot: m.cot.min(COT_BOUND), stb: m.stb.min(STB_BOUND), ..m },
        ClampMode::FailedOnly => m,
    }
}

/// Metrics of one stride, clamped per `config`.
pub fn evaluate_stride(
    log: &StrideLog,
    terrain: &Terrain,
    params: &RobotParams,
    config: &MetricsConfig,
) -> Result<StrideMetrics> {
    if log.failed {
        return Ok(StrideMetrics::failure());
    }
    let work = stride_energy(log)?;
    let cot = cot(work, params.mass, log.displacement, params.gravity)?;
    let (stb, stb_guards) = stb_with_guards(log, terrain, &config.weights)?;
    Ok(clamp_with(StrideMetrics { work, cot, stb, failed: false, stb_guards }, config.clamp))
}

/// Per-trial summary: means over the measured strides, or the failure
/// bounds when the trial failed anywhere.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub cot: f64,
    pub stb: f64,
    pub work: f64,
    pub failed: bool,
    pub strides: usize,
}

impl TrialMetrics {
    pub fn failure() -> Self {
        Self { cot: COT_BOUND, stb: STB_BOUND, work: 0.0, failed: true, strides: 0 }
    }

    pub fn j_e(&self, c: f64) -> Result<f64> {
        j_e(self.cot, self.stb, c)
    }
}

/// Averages strides `warmup..warmup + n` of a trial. A trial that failed,
/// or ended before producing the measured strides, is a failure.
pub fn evaluate_trial(
    strides: &[StrideLog],
    failed: bool,
    warmup: usize,
    n: usize,
    terrain: &Terrain,
    params: &RobotParams,
    config: &MetricsConfig,
) -> Result<TrialMetrics> {
    if failed || strides.len() < warmup + n || n == 0 {
        return Ok(TrialMetrics::failure());
    }
    let mut acc = TrialMetrics { strides: n, ..Default::default() };
    for log in &strides[warmup..warmup + n] {
        let m = match evaluate_stride(log, terrain, params, config) {
            Ok(m) => m,
            Err(Error::UndefinedDisplacement(_)) => return Ok(TrialMetrics::failure()),
            Err(e) => return Err(e),
        };
        acc.cot += m.cot;
        acc.stb += m.stb;
        acc.work += m.work;
    }
    let k = n as f64;
    acc.cot /= k;
    acc.stb /= k;
    acc.work /= k;
    Ok(acc)
}

/// One JSON-serializable metrics record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub terrain: String,
    pub gait: String,
    pub velocity: f64,
    pub trial: u64,
    pub work: f64,
    pub cot: f64,
    pub stb: f64,
    pub failed: bool,
    /// `(c, J_e)` pairs.
    pub j_e: Vec<(f64, f64)>,
}

impl MetricsRecord {
    pub fn new(terrain: &str, gait: &str, velocity: f64, trial: u64, m: &TrialMetrics, cs: &[f64]) -> Result<Self> {
        let j_e = cs.iter().map(|&c| m.j_e(c).map(|j| (c, j))).collect::<Result<_>>()?;
        Ok(Self {
            terrain: terrain.to_string(),
            gait: gait.to_string(),
            velocity,
            trial,
            work: m.work,
            cot: m.cot,
            stb: m.stb,
            failed: m.failed,
            j_e,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{JointVector, Terrain};
    use crate::sim::{BodyState, ContactForceSet};
    use nalgebra::Vector3;

    fn log_with(samples: usize, dt: f64, f: impl Fn(f64) -> (JointVector, JointVector, BodyState)) -> StrideLog {
        let mut log = StrideLog::default();
        for k in 0..samples {
            let t = k as f64 * dt;
            let (u, w, b) = f(t);
            log.push(t, b, u, w, ContactForceSet::empty());
        }
        log
    }

    fn cruising(t: f64) -> BodyState {
        let mut b = BodyState::at_rest(Vector3::new(t, 0.0, 0.3));
        b.velocity = Vector3::x();
        b
    }

    #[test]
    fn constant_power() {
        let log = log_with(401, 1e-3, |t| {
            let mut u = JointVector::zeros();
            let mut w = JointVector::zeros();
            u.0[4] = 2.0;
            w.0[4] = 5.0;
            (u, w, cruising(t))
        });
        assert!((stride_energy(&log).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn negative_power_is_free() {
        let log = log_with(11, 0.1, |t| {
            let mut u = JointVector::zeros();
            let mut w = JointVector::zeros();
            u.0[0] = -3.0;
            w.0[0] = 2.0;
            (u, w, cruising(t))
        });
        assert_eq!(stride_energy(&log).unwrap(), 0.0);
    }

    #[test]
    fn misaligned_log_rejected() {
        let mut log = log_with(5, 0.1, |t| (JointVector::zeros(), JointVector::zeros(), cruising(t)));
        log.torques.pop();
        assert!(matches!(stride_energy(&log), Err(Error::InvalidLog(_))));
    }

    #[test]
    fn cot_cases() {
        assert_eq!(cot(12.0 * 9.81 * 0.5, 12.0, 0.5, 9.81).unwrap(), 1.0);
        assert_eq!(cot(0.0, 12.0, 0.5, 9.81).unwrap(), 0.0);
        assert!(matches!(cot(1.0, 12.0, 1e-3, 9.81), Err(Error::UndefinedDisplacement(_))));
    }

    #[test]
    fn stb_zero_and_roll() {
        let flat = Terrain::preset("flat").unwrap();
        let w = StbWeights::default();
        let log = log_with(50, 1e-3, |t| (JointVector::zeros(), JointVector::zeros(), cruising(t)));
        assert_eq!(stb(&log, &flat, &w).unwrap(), 0.0);
        let log = log_with(50, 1e-3, |t| {
            let mut b = cruising(t);
            b.orientation = BodyState::attitude(0.1, 0.0);
            (JointVector::zeros(), JointVector::zeros(), b)
        });
        assert!((stb(&log, &flat, &w).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn stb_guard_at_standstill() {
        let flat = Terrain::preset("flat").unwrap();
        let log = log_with(10, 1e-3, |_| {
            let mut b = BodyState::at_rest(Vector3::new(0.0, 0.0, 0.3));
            b.velocity = Vector3::new(0.0, 0.0, 0.5);
            (JointVector::zeros(), JointVector::zeros(), b)
        });
        let (v, guards) = stb_with_guards(&log, &flat, &StbWeights::default()).unwrap();
        assert_eq!(guards, 10);
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn j_e_bounds() {
        assert_eq!(j_e(0.4, 0.2, 0.0).unwrap(), 0.4);
        assert_eq!(j_e(0.4, 0.2, 1.0).unwrap(), 0.2);
        assert!((j_e(0.4, 0.2, 0.5).unwrap() - 0.3).abs() < 1e-15);
        assert!(j_e(0.4, 0.2, 1.1).is_err());
    }

    #[test]
    fn clamping() {
        let ok = StrideMetrics { work: 1.0, cot: 0.3, stb: 0.2, failed: false, stb_guards: 0 };
        assert_eq!(clamp_failed(ok), ok);
        let high = StrideMetrics { cot: 1.9, ..ok };
        assert_eq!(clamp_failed(high).cot, COT_BOUND);
        assert_eq!(clamp_with(high, ClampMode::FailedOnly).cot, 1.9);
        let failed = clamp_failed(StrideMetrics { failed: true, ..ok });
        assert_eq!((failed.cot, failed.stb), (1.25, 1.36));
        assert_eq!(clamp_failed(failed), failed);
    }
}
