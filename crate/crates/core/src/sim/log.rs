use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::LegId;
use crate::robot::JointVector;
use crate::sim::forces::ContactForceSet;
use crate::sim::state::BodyState;

/// Time series over one stride, sampled at the simulation step.
///
/// The first sample is the state at the stride boundary, so consecutive
/// strides share their boundary sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrideLog {
    pub index: usize,
    pub time: Vec<f64>,
    pub body: Vec<BodyState>,
    pub torques: Vec<JointVector>,
    pub joint_velocities: Vec<JointVector>,
    pub forces: Vec<ContactForceSet>,
    /// Commanded speed along the terrain, m/s.
    pub v_cmd: f64,
    /// Distance travelled over the stride, m.
    pub displacement: f64,
    /// Stride duration, s.
    pub duration: f64,
    pub failed: bool,
    /// Gait in effect at the start of the stride.
    pub gait: String,
    /// Samples whose joint torques exceeded the configured limit.
    pub torque_flags: usize,
}

impl StrideLog {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn check_aligned(&self) -> Result<()> {
        let n = self.time.len();
        if self.body.len() != n || self.torques.len() != n || self.joint_velocities.len() != n || self.forces.len() != n
        {
            return Err(Error::InvalidLog(format!(
                "series lengths differ: time {n}, body {}, torques {}, velocities {}, forces {}",
                self.body.len(),
                self.torques.len(),
                self.joint_velocities.len(),
                self.forces.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn push(
        &mut self,
        time: f64,
        body: BodyState,
        torques: JointVector,
        joint_velocities: JointVector,
        forces: ContactForceSet,
    ) {
        self.time.push(time);
        self.body.push(body);
        self.torques.push(torques);
        self.joint_velocities.push(joint_velocities);
        self.forces.push(forces);
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = [
        "stride", "time_s", "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz", "v_cmd",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for kind in ["tau", "qd"] {
        for leg in LegId::ALL {
            for j in ["abd", "hip", "knee"] {
                h.push(format!("{kind}_{}_{j}", leg.label().to_lowercase()));
            }
        }
    }
    for leg in LegId::ALL {
        let l = leg.label().to_lowercase();
        for c in ["fx", "fy", "fz", "px", "py", "pz", "stance"] {
            h.push(format!("{c}_{l}"));
        }
    }
    h
}

/// Writes logs as CSV, one row per sample. Shared boundary samples are
/// written once.
pub fn write_stride_csv<W: Write>(logs: &[StrideLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for (li, log) in logs.iter().enumerate() {
        log.check_aligned()?;
        let skip = usize::from(li > 0);
        for k in skip..log.len() {
            let b = &log.body[k];
            let mut row: Vec<String> = vec![log.index.to_string()];
            let scalars = [
                log.time[k],
                b.position.x,
                b.position.y,
                b.position.z,
                b.velocity.x,
                b.velocity.y,
                b.velocity.z,
                b.roll(),
                b.pitch(),
                b.yaw(),
                b.angular_velocity.x,
                b.angular_velocity.y,
                b.angular_velocity.z,
                log.v_cmd,
            ];
            row.extend(scalars.iter().map(|v| v.to_string()));
            row.extend(log.torques[k].iter().map(|v| v.to_string()));
            row.extend(log.joint_velocities[k].iter().map(|v| v.to_string()));
            let f = &log.forces[k];
            for i in 0..4 {
                row.extend(f.forces[i].iter().map(|v| v.to_string()));
                row.extend(f.positions[i].iter().map(|v| v.to_string()));
                row.push(u8::from(f.stance[i]).to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
