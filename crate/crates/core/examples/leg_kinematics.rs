//! Forward and inverse kinematics of one leg, and the Jacobian checked
//! against a finite difference.

use nalgebra::Vector3;
use quadgait::robot::{leg_fk, leg_ik, leg_jacobian, RobotParams};
use quadgait::LegId;

fn main() -> quadgait::Result<()> {
    let params = RobotParams::default();
    for leg in LegId::ALL {
        let foot = params.nominal_foot(leg, params.nominal_height) + Vector3::new(0.05, 0.0, 0.02);
        let q = leg_ik(&foot, leg, &params)?;
        let back = leg_fk(&q, leg, &params);
        println!(
            "{}: q = ({:+.4}, {:+.4}, {:+.4}) rad, round-trip error {:.1e} m",
            leg.label(),
            q.x,
            q.y,
            q.z,
            (back - foot).norm()
        );
    }

    let leg = LegId::RF;
    let q = Vector3::new(0.1, 0.7, -1.3);
    let j = leg_jacobian(&q, leg, &params);
    let h = 1e-6;
    let mut fd = nalgebra::Matrix3::zeros();
    for k in 0..3 {
        let mut dq = Vector3::zeros();
        dq[k] = h;
        fd.set_column(k, &((leg_fk(&(q + dq), leg, &params) - leg_fk(&(q - dq), leg, &params)) / (2.0 * h)));
    }
    println!("RF Jacobian at {q:?}:{j:.4}");
    println!("max deviation from central differences: {:.2e}", (j - fd).abs().max());

    match leg_ik(&Vector3::new(0.19, -0.21, -0.6), leg, &params) {
        Ok(_) => println!("unexpectedly reachable"),
        Err(e) => println!("out-of-reach target: {e}"),
    }
    Ok(())
}
