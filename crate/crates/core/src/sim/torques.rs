//! Joint torques from contact forces (stance) and foot inertia (swing).

use nalgebra::Vector3;

use crate::gait::LegId;
use crate::robot::{leg_jacobian, RobotParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegTorques {
    pub torque: Vector3<f64>,
    /// Set when `‖τ‖` exceeds the configured limit (near-singular legs).
    pub over_limit: bool,
}

fn flagged(torque: Vector3<f64>, limit: f64) -> LegTorques {
    LegTorques { torque, over_limit: torque.norm() > limit }
}

/// Stance torques `τ = −Jᵀ f` for a ground reaction `force` given in the
/// body frame.
pub fn stance_torques(
    force: &Vector3<f64>,
    q: &Vector3<f64>,
    leg: LegId,
    params: &RobotParams,
    limit: f64,
) -> LegTorques {
    let j = leg_jacobian(q, leg, params);
    flagged(-(j.transpose() * force), limit)
}

/// Swing torques `τ = Jᵀ m_foot (a − g)` with the foot acceleration and
/// gravity both expressed in the body frame.
pub fn swing_torques(
    q: &Vector3<f64>,
    foot_accel: &Vector3<f64>,
    gravity: &Vector3<f64>,
    leg: LegId,
    params: &RobotParams,
    limit: f64,
) -> LegTorques {
    let j = leg_jacobian(q, leg, params);
    flagged(j.transpose() * (params.foot_mass * (foot_accel - gravity)), limit)
}
