use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::robot::RobotParams;
use crate::sim::forces::{ContactForceSet, Wrench};

/// Trunk state. Position and velocities are world frame; the angular
/// velocity is world frame as well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl BodyState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            angular_velocity: Vector3::zeros(),
        }
    }

    /// Builds an orientation from roll and nose-up pitch (yaw zero).
    pub fn attitude(roll: f64, pitch_up: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(roll, -pitch_up, 0.0)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *self.orientation.to_rotation_matrix().matrix()
    }

    pub fn roll(&self) -> f64 {
        self.orientation.euler_angles().0
    }

    /// Pitch angle, positive nose-up so it compares directly with the
    /// terrain inclination.
    pub fn pitch(&self) -> f64 {
        -self.orientation.euler_angles().1
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.euler_angles().2
    }

    pub fn body_angular_velocity(&self) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&self.angular_velocity)
    }

    /// Euler-angle rates `(pitch_rate, roll_rate)`, pitch rate nose-up.
    pub fn attitude_rates(&self) -> (f64, f64) {
        let (roll, pitch_std, _) = self.orientation.euler_angles();
        let w = self.body_angular_velocity();
        let (sr, cr) = roll.sin_cos();
        let roll_rate = w.x + (w.y * sr + w.z * cr) * pitch_std.tan();
        let pitch_rate_std = w.y * cr - w.z * sr;
        (-pitch_rate_std, roll_rate)
    }

    pub fn kinetic_energy(&self, params: &RobotParams) -> f64 {
        let w = self.body_angular_velocity();
        0.5 * params.mass * self.velocity.norm_squared() + 0.5 * w.dot(&(params.inertia * w))
    }

    pub fn potential_energy(&self, params: &RobotParams) -> f64 {
        params.mass * params.gravity * self.position.z
    }
}

/// Total wrench about the centre of mass from contact forces.
pub fn contact_wrench(state: &BodyState, forces: &ContactForceSet) -> Wrench {
    let mut w = Wrench::zero();
    for (f, p) in forces.forces.iter().zip(&forces.positions) {
        w.force += f;
        // f × (r − p) = (p − r) × f
        w.moment += f.cross(&(state.position - p));
    }
    w
}

/// One integration step of the trunk's Newton-Euler dynamics.
///
/// Linear: `m r̈ = m g + Σ f`. The velocity is advanced with the held force
/// and the position with the mean of old and new velocity, which integrates
/// ballistic arcs exactly. Angular: body-frame Euler equation including the
/// gyroscopic term, semi-implicit (new rate used for the attitude update).
pub fn step(state: &BodyState, forces: &ContactForceSet, params: &RobotParams, dt: f64) -> BodyState {
    step_with_external(state, forces, &Wrench::zero(), params, dt)
}

pub fn step_with_external(
    state: &BodyState,
    forces: &ContactForceSet,
    external: &Wrench,
    params: &RobotParams,
    dt: f64,
) -> BodyState {
    let contact = contact_wrench(state, forces);
    let gravity = Vector3::new(0.0, 0.0, -params.gravity);
    let accel = gravity + (contact.force + external.force) / params.mass;
    let velocity = state.velocity + accel * dt;
    let position = state.position + 0.5 * (state.velocity + velocity) * dt;

    let torque_body = state.orientation.inverse_transform_vector(&(contact.moment + external.moment));
    let w = state.body_angular_velocity();
    let iw = params.inertia * w;
    let inertia_inv = params.inertia.try_inverse().expect("inertia validated positive definite");
    let w_dot = inertia_inv * (torque_body - w.cross(&iw));
    let w_new = w + w_dot * dt;
    let orientation = state.orientation * UnitQuaternion::from_scaled_axis(w_new * dt);
    BodyState {
        position,
        velocity,
        orientation,
        angular_velocity: orientation.transform_vector(&w_new),
    }
}
