//! Quadruped morphology, 3-DoF leg kinematics and piecewise-linear terrain.
//!
//! Body frame: x forward, y left, z up. Each leg has an abduction joint about
//! the body x axis at the hip, followed by hip-pitch and knee joints about the
//! rotated y axis. At zero angles the leg hangs straight down below the thigh
//! joint, which sits `hip_offset` outboard of the hip.

use std::ops::{Index, IndexMut};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::gait::LegId;

pub const GRAVITY: f64 = 9.81;
pub const MOTOR_COUNT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkLengths {
    pub hip_offset: f64,
    pub thigh: f64,
    pub shank: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    pub mass: f64,
    /// Trunk inertia about the centre of mass, body frame.
    pub inertia: Matrix3<f64>,
    /// Hip positions in the body frame, (RF, RH, LF, LH).
    pub hips: [Vector3<f64>; 4],
    pub links: LinkLengths,
    /// Effective point mass of a swinging foot.
    pub foot_mass: f64,
    pub gravity: f64,
    /// Nominal trunk height above the terrain.
    pub nominal_height: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let (hx, hy) = (0.19, 0.15);
        Self {
            mass: 12.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.05, 0.15, 0.18)),
            hips: [
                Vector3::new(hx, -hy, 0.0),
                Vector3::new(-hx, -hy, 0.0),
                Vector3::new(hx, hy, 0.0),
                Vector3::new(-hx, hy, 0.0),
            ],
            links: LinkLengths { hip_offset: 0.06, thigh: 0.22, shank: 0.22 },
            foot_mass: 0.3,
            gravity: GRAVITY,
            nominal_height: 0.30,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(invalid_config("robot mass must be positive"));
        }
        if self.inertia.cholesky().is_none() {
            return Err(invalid_config("trunk inertia must be positive definite"));
        }
        let l = &self.links;
        if !(l.hip_offset > 0.0 && l.thigh > 0.0 && l.shank > 0.0) {
            return Err(invalid_config("link lengths must be positive"));
        }
        if self.foot_mass < 0.0 || !(self.gravity > 0.0) {
            return Err(invalid_config("foot mass must be >= 0 and gravity > 0"));
        }
        if !(self.nominal_height > 0.0 && self.nominal_height < l.thigh + l.shank) {
            return Err(invalid_config("nominal height must be inside the leg reach"));
        }
        Ok(())
    }

    pub fn hip(&self, leg: LegId) -> Vector3<f64> {
        self.hips[leg.index()]
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Foot position of the straight-down nominal stance, body frame.
    pub fn nominal_foot(&self, leg: LegId, height: f64) -> Vector3<f64> {
        self.hip(leg) + Vector3::new(0.0, leg.side() * self.links.hip_offset, -height)
    }
}

/// Twelve joint quantities, three per leg in (RF, RH, LF, LH) order:
/// abduction, hip pitch, knee.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointVector(pub [f64; MOTOR_COUNT]);

impl JointVector {
    pub fn zeros() -> Self {
        Self([0.0; MOTOR_COUNT])
    }

    pub fn leg(&self, leg: LegId) -> Vector3<f64> {
        let i = 3 * leg.index();
        Vector3::new(self.0[i], self.0[i + 1], self.0[i + 2])
    }

    pub fn set_leg(&mut self, leg: LegId, v: &Vector3<f64>) {
        let i = 3 * leg.index();
        self.0[i..i + 3].copy_from_slice(v.as_slice());
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Sagittal-plane foot position `(x', z')` relative to the thigh joint.
fn sagittal(q2: f64, q3: f64, l: &LinkLengths) -> (f64, f64) {
    let x = -l.thigh * q2.sin() - l.shank * (q2 + q3).sin();
    let z = -l.thigh * q2.cos() - l.shank * (q2 + q3).cos();
    (x, z)
}

/// Foot position in the body frame for leg joint angles `q`.
pub fn leg_fk(q: &Vector3<f64>, leg: LegId, params: &RobotParams) -> Vector3<f64> {
    let l = &params.links;
    let y0 = leg.side() * l.hip_offset;
    let (x, z) = sagittal(q[1], q[2], l);
    let (s1, c1) = q[0].sin_cos();
    params.hip(leg) + Vector3::new(x, y0 * c1 - z * s1, y0 * s1 + z * c1)
}

/// Joint angles placing the foot at `foot` (body frame), knee-backward branch.
///
/// Unreachable targets fail with [`Error::OutOfWorkspace`] carrying the
/// nearest reachable point along the same direction.
pub fn leg_ik(foot: &Vector3<f64>, leg: LegId, params: &RobotParams) -> Result<Vector3<f64>> {
    let (q, reachable) = leg_ik_clamped(foot, leg, params);
    if reachable {
        Ok(q)
    } else {
        Err(Error::OutOfWorkspace { clamped: leg_fk(&q, leg, params) })
    }
}

/// Like [`leg_ik`] but always returns angles, clamping unreachable targets
/// onto the workspace boundary. The flag reports whether the target was
/// reachable.
pub fn leg_ik_clamped(foot: &Vector3<f64>, leg: LegId, params: &RobotParams) -> (Vector3<f64>, bool) {
    let l = &params.links;
    let p = foot - params.hip(leg);
    let y0 = leg.side() * l.hip_offset;
    let mut reachable = true;

    let d2 = p.y * p.y + p.z * p.z;
    let mut zp2 = d2 - y0 * y0;
    if zp2 < 0.0 {
        reachable = false;
        zp2 = 0.0;
    }
    let z_plane = -zp2.sqrt();
    let q1 = p.z.atan2(p.y) - z_plane.atan2(y0);

    let (mut x, mut z) = (p.x, z_plane);
    let len = (x * x + z * z).sqrt();
    let (lmin, lmax) = ((l.thigh - l.shank).abs(), l.thigh + l.shank);
    // tiny relative slack keeps boundary points on the reachable side
    let slack = 1e-12 * lmax;
    if len > lmax + slack || len < lmin - slack {
        reachable = false;
        let target = len.clamp(lmin, lmax);
        if len > 0.0 {
            x *= target / len;
            z *= target / len;
        } else {
            z = -target;
        }
    }
    let len2 = x * x + z * z;
    let cos_knee = ((len2 - l.thigh * l.thigh - l.shank * l.shank) / (2.0 * l.thigh * l.shank)).clamp(-1.0, 1.0);
    let q3 = -cos_knee.acos();
    let alpha = (-x).atan2(-z);
    let gamma = (l.shank * q3.sin()).atan2(l.thigh + l.shank * q3.cos());
    let q2 = alpha - gamma;
    (Vector3::new(wrap_angle(q1), q2, q3), reachable)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + 2.0 * std::f64::consts::PI
    } else {
        w
    }
}

/// Derivative of [`leg_fk`] with respect to the joint angles (columns).
pub fn leg_jacobian(q: &Vector3<f64>, leg: LegId, params: &RobotParams) -> Matrix3<f64> {
    let l = &params.links;
    let y0 = leg.side() * l.hip_offset;
    let (x, z) = sagittal(q[1], q[2], l);
    let (s1, c1) = q[0].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();

    let d1 = Vector3::new(0.0, -y0 * s1 - z * c1, y0 * c1 - z * s1);
    // planar partials, then rotated by the abduction angle
    let rot = |px: f64, pz: f64| Vector3::new(px, -pz * s1, pz * c1);
    let d2 = rot(z, -x);
    let d3 = rot(-l.shank * c23, l.shank * s23);
    Matrix3::from_columns(&[d1, d2, d3])
}

/// One terrain segment, valid from `start_x` to the next segment's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainSegment {
    pub start_x: f64,
    /// Inclination in radians, positive when the ground rises along +x.
    pub inclination: f64,
    pub friction: f64,
    /// Terrain-type label used to look up velocity-gait maps.
    pub label: String,
}

/// Piecewise-linear terrain profile along x; constant along y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub id: String,
    pub segments: Vec<TerrainSegment>,
    pub end_x: f64,
    /// Height at the first segment start.
    #[serde(default)]
    pub base_height: f64,
}

/// Local terrain properties at one x.
#[derive(Clone, Debug, PartialEq)]
pub struct TerrainSample {
    pub height: f64,
    pub normal: Vector3<f64>,
    pub inclination: f64,
    pub friction: f64,
    pub segment: usize,
}

impl TerrainSample {
    /// Unit tangent pointing along +x on the ground.
    pub fn tangent(&self) -> Vector3<f64> {
        Vector3::new(self.inclination.cos(), 0.0, self.inclination.sin())
    }
}

pub const DEFAULT_FRICTION: f64 = 0.7;

impl Terrain {
    pub fn new(id: impl Into<String>, segments: Vec<TerrainSegment>, end_x: f64) -> Result<Self> {
        let t = Self { id: id.into(), segments, end_x, base_height: 0.0 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(invalid_config(format!("terrain '{}' has no segments", self.id)));
        }
        for w in self.segments.windows(2) {
            if !(w[1].start_x > w[0].start_x) {
                return Err(invalid_config(format!("terrain '{}' segments overlap", self.id)));
            }
        }
        if !(self.end_x > self.segments.last().unwrap().start_x) {
            return Err(invalid_config(format!("terrain '{}' ends before its last segment", self.id)));
        }
        for s in &self.segments {
            if !(s.friction > 0.0) {
                return Err(invalid_config("terrain friction must be positive"));
            }
            if !(s.inclination.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(invalid_config("terrain inclination must be within (-90, 90) degrees"));
            }
        }
        Ok(())
    }

    pub fn start_x(&self) -> f64 {
        self.segments[0].start_x
    }

    pub fn segment_index(&self, x: f64) -> Result<usize> {
        if !(x >= self.start_x() && x <= self.end_x) {
            return Err(Error::OutOfBounds { x, min: self.start_x(), max: self.end_x });
        }
        Ok(self.segments.iter().rposition(|s| s.start_x <= x).unwrap_or(0))
    }

    fn height_at_segment_start(&self, idx: usize) -> f64 {
        let mut h = self.base_height;
        for w in self.segments[..=idx].windows(2) {
            h += (w[1].start_x - w[0].start_x) * w[0].inclination.tan();
        }
        h
    }

    pub fn query(&self, x: f64) -> Result<TerrainSample> {
        let idx = self.segment_index(x)?;
        let seg = &self.segments[idx];
        let height = self.height_at_segment_start(idx) + (x - seg.start_x) * seg.inclination.tan();
        let (s, c) = seg.inclination.sin_cos();
        Ok(TerrainSample {
            height,
            normal: Vector3::new(-s, 0.0, c),
            inclination: seg.inclination,
            friction: seg.friction,
            segment: idx,
        })
    }

    /// Query clamped into the terrain extent.
    pub fn query_clamped(&self, x: f64) -> TerrainSample {
        self.query(x.clamp(self.start_x(), self.end_x)).expect("clamped into extent")
    }

    pub fn label_at(&self, x: f64) -> &str {
        let idx = self.segment_index(x.clamp(self.start_x(), self.end_x)).unwrap_or(0);
        &self.segments[idx].label
    }

    /// Distinct segment labels in order of first appearance.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.label.as_str()) {
                out.push(&s.label);
            }
        }
        out
    }

    pub fn with_friction(mut self, mu: f64) -> Self {
        for s in &mut self.segments {
            s.friction = mu;
        }
        self
    }

    /// Named terrain presets: `flat`, `slope12`, `flat-slope`,
    /// `continuous-slope` and `up-down-slope`.
    pub fn preset(name: &str) -> Result<Self> {
        let seg = |start_x: f64, deg: f64, label: &str| TerrainSegment {
            start_x,
            inclination: deg.to_radians(),
            friction: DEFAULT_FRICTION,
            label: label.to_string(),
        };
        let (segments, end_x) = match name {
            "flat" => (vec![seg(-2.0, 0.0, "flat")], 60.0),
            "slope12" => (vec![seg(-2.0, 12.0, "slope12")], 60.0),
            "flat-slope" => (vec![seg(-2.0, 0.0, "flat"), seg(3.0, 12.0, "slope12")], 8.0),
            "continuous-slope" => (
                vec![
                    seg(-2.0, 0.0, "flat"),
                    seg(2.0, 8.0, "slope8"),
                    seg(4.0, 12.0, "slope12"),
                    seg(6.0, 18.0, "slope18"),
                ],
                9.0,
            ),
            "up-down-slope" => (
                vec![
                    seg(-2.0, 0.0, "flat"),
                    seg(2.0, 12.0, "slope12"),
                    seg(4.5, -12.0, "downslope12"),
                    seg(7.0, 0.0, "flat"),
                ],
                10.0,
            ),
            other => return Err(invalid_arg(format!("unknown terrain preset '{other}'"))),
        };
        Terrain::new(name, segments, end_x)
    }

    pub const PRESETS: [&'static str; 5] =
        ["flat", "slope12", "flat-slope", "continuous-slope", "up-down-slope"];
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn zero_configuration_hangs_straight() {
        let p = params();
        for leg in LegId::ALL {
            let foot = leg_fk(&Vector3::zeros(), leg, &p);
            let expect = p.hip(leg) + Vector3::new(0.0, leg.side() * p.links.hip_offset, -0.44);
            assert_relative_eq!(foot, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_crouch_depth() {
        let p = params();
        let theta: f64 = 0.6;
        let foot = leg_fk(&Vector3::new(0.0, theta, -2.0 * theta), LegId::LF, &p) - p.hip(LegId::LF);
        assert!(foot.x.abs() < 1e-15);
        assert_relative_eq!(foot.z, -0.44 * theta.cos(), epsilon = 1e-15);
    }

    #[test]
    fn ik_round_trip_and_branch() {
        let p = params();
        for leg in LegId::ALL {
            let target = p.nominal_foot(leg, 0.3) + Vector3::new(0.08, 0.02, 0.01);
            let q = leg_ik(&target, leg, &p).unwrap();
            assert!(q[2] < 0.0, "knee-backward branch");
            assert_relative_eq!(leg_fk(&q, leg, &p), target, epsilon = 1e-12);
        }
    }

    #[test]
    fn ik_unreachable_reports_clamped_point() {
        let p = params();
        let target = p.hip(LegId::RH) + Vector3::new(0.0, -0.06, -0.6);
        match leg_ik(&target, LegId::RH, &p) {
            Err(Error::OutOfWorkspace { clamped }) => {
                let (q, _) = leg_ik_clamped(&target, LegId::RH, &p);
                assert_relative_eq!(leg_fk(&q, LegId::RH, &p), clamped, epsilon = 1e-12);
                assert!((clamped - p.hip(LegId::RH)).z > -0.45);
            }
            other => panic!("expected out-of-workspace, got {other:?}"),
        }
    }

    #[test]
    fn jacobian_singular_when_straight() {
        let j = leg_jacobian(&Vector3::zeros(), LegId::LF, &params());
        assert!(j.determinant().abs() < 1e-12);
    }

    #[test]
    fn abduction_column_has_no_x_component() {
        let j = leg_jacobian(&Vector3::new(0.3, 0.4, -0.9), LegId::RF, &params());
        assert_eq!(j[(0, 0)], 0.0);
    }

    #[test]
    fn terrain_presets() {
        let flat = Terrain::preset("flat").unwrap();
        let s = flat.query(1.0).unwrap();
        assert_eq!(s.height, 0.0);
        assert_eq!(s.normal, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(s.inclination, 0.0);
        assert_eq!(s.friction, DEFAULT_FRICTION);

        let fs = Terrain::preset("flat-slope").unwrap();
        let at = fs.query(4.0).unwrap();
        assert_relative_eq!(at.height, 12f64.to_radians().tan(), epsilon = 1e-12);
        assert_relative_eq!(at.normal.dot(&at.tangent()), 0.0, epsilon = 1e-15);
        assert_eq!(fs.label_at(4.0), "slope12");
        assert_eq!(fs.labels(), ["flat", "slope12"]);
        assert!(matches!(fs.query(20.0), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn terrain_continuous_at_joins() {
        for name in Terrain::PRESETS {
            let t = Terrain::preset(name).unwrap();
            for seg in &t.segments[1..] {
                let eps = 1e-9;
                let before = t.query(seg.start_x - eps).unwrap().height;
                let after = t.query(seg.start_x).unwrap().height;
                assert!((before - after).abs() < 1e-8, "{name} jump at {}", seg.start_x);
            }
        }
    }

    #[test]
    fn terrain_validation() {
        let seg = |x: f64, mu: f64| TerrainSegment { start_x: x, inclination: 0.0, friction: mu, label: "flat".into() };
        assert!(Terrain::new("t", vec![seg(0.0, 0.7), seg(0.0, 0.7)], 5.0).is_err());
        assert!(Terrain::new("t", vec![seg(0.0, 0.0)], 5.0).is_err());
        assert!(Terrain::new("t", vec![seg(0.0, 0.7)], -1.0).is_err());
        assert!(RobotParams::default().validate().is_ok());
    }
}
