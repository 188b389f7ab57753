//! Closed-loop trials: gait scheduling, contact management, force control,
//! torque recovery and failure detection.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::gait::{end_support_fraction, flight_fraction, leg_contact, ContactState, GaitName, GaitPattern, LegId};
use crate::robot::{leg_ik_clamped, JointVector, RobotParams, Terrain};
use crate::sim::forces::{distribute_forces_with, Contact, ContactForceSet, ForceSolverOptions, Wrench};
use crate::sim::log::StrideLog;
use crate::sim::state::{step_with_external, BodyState};
use crate::sim::swing::{swing_kinematics, touchdown_target};
use crate::sim::torques::{stance_torques, swing_torques};
use crate::sim::SimConfig;
use crate::transition::{FsmState, GaitEvent};

pub const MAX_SPEED: f64 = 3.0;

/// Where the gait pattern comes from each step.
#[derive(Clone, Debug)]
pub enum GaitSource {
    /// A fixed pattern, possibly non-canonical.
    Steady(GaitPattern),
    /// A transition state machine; events from the stride hook drive it.
    Fsm(FsmState),
}

impl GaitSource {
    /// An idle state machine sitting in `gait`.
    pub fn gait(gait: GaitName, config: &SimConfig) -> Self {
        GaitSource::Fsm(FsmState::new(gait, config.fsm()))
    }

    fn label(&self) -> String {
        match self {
            GaitSource::Steady(_) => "custom".to_string(),
            GaitSource::Fsm(f) => f.current().to_string(),
        }
    }

    fn next(&mut self, dt: f64) -> GaitPattern {
        match self {
            GaitSource::Steady(p) => *p,
            GaitSource::Fsm(f) => f.advance(dt),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSetup {
    /// Commanded speed along the terrain, m/s.
    pub v_cmd: f64,
    /// Simulated time, s.
    pub duration: f64,
    /// Random stream; trials sharing a seed and stream see identical noise.
    pub stream: u64,
    /// Initial trunk x, m.
    pub start_x: f64,
    /// Initial (roll, pitch) perturbation added to the random draw, rad.
    pub attitude_offset: (f64, f64),
}

impl TrialSetup {
    pub fn new(v_cmd: f64, duration: f64) -> Self {
        Self { v_cmd, duration, stream: 0, start_x: 0.0, attitude_offset: (0.0, 0.0) }
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn start_x(mut self, x: f64) -> Self {
        self.start_x = x;
        self
    }

    pub fn attitude_offset(mut self, roll: f64, pitch: f64) -> Self {
        self.attitude_offset = (roll, pitch);
        self
    }
}

/// Context handed to the stride hook.
#[derive(Clone, Debug)]
pub struct StrideBoundary<'a> {
    /// Strides completed so far.
    pub strides: usize,
    pub time: f64,
    pub body: &'a BodyState,
    pub terrain_label: &'a str,
    pub v_cmd: f64,
    pub current: GaitName,
}

/// A gait event accepted by the state machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub from: GaitName,
    pub to: GaitName,
    /// Transition actions scheduled, as `aij` labels.
    pub chain: Vec<String>,
    pub terrain: String,
}

/// Time span during which one transition action ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionWindow {
    pub action: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Roll,
    Pitch,
    Height,
    Diverged,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrialOutput {
    pub strides: Vec<StrideLog>,
    pub failure: Option<FailureKind>,
    pub failure_time: Option<f64>,
    pub events: Vec<EventRecord>,
    pub windows: Vec<TransitionWindow>,
    /// Steps on which the commanded wrench could not be produced exactly.
    pub infeasible_steps: usize,
    pub steps: usize,
}

impl TrialOutput {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Clone, Copy, Debug)]
struct LegRuntime {
    stance: bool,
    foot: Vector3<f64>,
    lift: Vector3<f64>,
    target: Vector3<f64>,
    s0: f64,
    swing_time: f64,
    last_s: f64,
    q_prev: Option<Vector3<f64>>,
}

pub fn run_trial(
    source: GaitSource,
    setup: &TrialSetup,
    terrain: &Terrain,
    config: &SimConfig,
    params: &RobotParams,
) -> Result<TrialOutput> {
    run_trial_with_hook(source, setup, terrain, config, params, |_| None)
}

/// Runs one trial, calling `hook` at each stride boundary while the state
/// machine is idle. A returned event is dispatched immediately.
pub fn run_trial_with_hook<F>(
    mut source: GaitSource,
    setup: &TrialSetup,
    terrain: &Terrain,
    config: &SimConfig,
    params: &RobotParams,
    mut hook: F,
) -> Result<TrialOutput>
where
    F: FnMut(&StrideBoundary) -> Option<GaitEvent>,
{
    config.validate()?;
    params.validate()?;
    terrain.validate()?;
    if !(0.0..=MAX_SPEED).contains(&setup.v_cmd) {
        return Err(invalid_arg(format!("commanded speed {} outside [0, {MAX_SPEED}] m/s", setup.v_cmd)));
    }
    let tps = config.ticks_per_stride();
    if !(setup.duration >= 3.0 * config.period_s - 1e-9) {
        return Err(invalid_arg(format!(
            "duration {} s is shorter than three strides ({} s)",
            setup.duration,
            3.0 * config.period_s
        )));
    }
    if let GaitSource::Fsm(f) = &source {
        if (f.config().period_s - config.period_s).abs() > 1e-12 {
            return Err(invalid_arg("state machine period differs from the simulation period"));
        }
    }
    if let GaitSource::Steady(p) = &source {
        if (p.period() - config.period_s).abs() > 1e-12 {
            return Err(invalid_arg("gait period differs from the simulation period"));
        }
    }
    terrain.query(setup.start_x)?;

    let dt = config.dt;
    let steps = (setup.duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(setup.stream);
    let push_dist = Normal::new(0.0, config.push_std).map_err(|e| invalid_arg(e.to_string()))?;
    let att_dist = Normal::new(0.0, config.initial_attitude_std).map_err(|e| invalid_arg(e.to_string()))?;

    let h0 = params.nominal_height;
    let start = terrain.query_clamped(setup.start_x);
    let mut body = BodyState::at_rest(Vector3::new(setup.start_x, 0.0, start.height + h0));
    body.velocity = start.tangent() * setup.v_cmd;
    let roll0 = att_dist.sample(&mut rng) + setup.attitude_offset.0;
    let pitch0 = att_dist.sample(&mut rng) + setup.attitude_offset.1;
    body.orientation = BodyState::attitude(roll0, start.inclination + pitch0);
    let mut push = Vector3::new(push_dist.sample(&mut rng), push_dist.sample(&mut rng), 0.0);

    let initial = match &source {
        GaitSource::Steady(p) => *p,
        GaitSource::Fsm(f) => f.steady(),
    };
    let narrowing0 = config.stance_narrowing * end_support_fraction(&initial);
    let mut legs: [LegRuntime; 4] = LegId::ALL.map(|leg| {
        let mut foot = body.position + body.orientation * (stance_anchor(leg, params, narrowing0) - Vector3::z() * h0);
        foot.z = terrain.query_clamped(foot.x).height;
        LegRuntime {
            stance: true,
            foot,
            lift: foot,
            target: foot,
            s0: 0.0,
            swing_time: 0.0,
            last_s: 0.0,
            q_prev: None,
        }
    });

    let solver = ForceSolverOptions { moment_weight: config.moment_weight, ..Default::default() };
    let f_max = config.f_max_ratio * params.weight();
    let gravity = Vector3::new(0.0, 0.0, -params.gravity);

    let mut out = TrialOutput::default();
    let mut log = StrideLog { index: 0, v_cmd: setup.v_cmd, gait: source.label(), ..Default::default() };
    let mut stride_start = body.position;
    let mut current_window: Option<(String, f64)> = None;
    let mut time = 0.0;
    let mut last_forces = ContactForceSet::empty();
    let mut v_filtered = body.velocity;
    log.push(0.0, body, JointVector::zeros(), JointVector::zeros(), last_forces);

    for k in 0..steps {
        if k > 0 && k % tps == 0 {
            finish_stride(&mut log, &stride_start, &body, time, false);
            let next_index = log.index + 1;
            let done = std::mem::take(&mut log);
            let carried = (done.torques.last().copied(), done.joint_velocities.last().copied());
            out.strides.push(done);
            stride_start = body.position;

            if let GaitSource::Fsm(fsm) = &mut source {
                if fsm.is_idle() {
                    let label = terrain.label_at(body.position.x).to_string();
                    let ctx = StrideBoundary {
                        strides: out.strides.len(),
                        time,
                        body: &body,
                        terrain_label: &label,
                        v_cmd: setup.v_cmd,
                        current: fsm.current(),
                    };
                    if let Some(ev) = hook(&ctx) {
                        let from = fsm.current();
                        if let Some(chain) = fsm.dispatch(ev) {
                            out.events.push(EventRecord {
                                time,
                                from,
                                to: ev.target,
                                chain: chain.iter().map(|a| a.label()).collect(),
                                terrain: label,
                            });
                        }
                    }
                }
            }
            push = Vector3::new(push_dist.sample(&mut rng), push_dist.sample(&mut rng), 0.0);
            log = StrideLog { index: next_index, v_cmd: setup.v_cmd, gait: source.label(), ..Default::default() };
            log.push(
                time,
                body,
                carried.0.unwrap_or_else(JointVector::zeros),
                carried.1.unwrap_or_else(JointVector::zeros),
                last_forces,
            );
        }

        let phase = (k % tps) as f64 / tps as f64;
        let pattern = source.next(dt);
        track_window(&source, &mut current_window, &mut out.windows, time, dt);

        let alpha = if config.velocity_filter_s > 0.0 { (dt / config.velocity_filter_s).min(1.0) } else { 1.0 };
        v_filtered += (body.velocity - v_filtered) * alpha;
        let ground = terrain.query_clamped(body.position.x);
        let v_des = ground.tangent() * setup.v_cmd;
        let rot = body.orientation;
        let rot_inv = rot.inverse();

        let narrowing = config.stance_narrowing * end_support_fraction(&pattern);
        let mut contacts = Vec::with_capacity(4);
        let mut swing_accel = [Vector3::zeros(); 4];
        for leg in LegId::ALL {
            let st = &mut legs[leg.index()];
            match leg_contact(&pattern, phase, leg) {
                ContactState::Stance => {
                    if !st.stance {
                        st.stance = true;
                        st.foot.z = terrain.query_clamped(st.foot.x).height;
                    }
                    let foot_body = rot_inv * (st.foot - body.position);
                    let (_, reachable) = leg_ik_clamped(&foot_body, leg, params);
                    if reachable {
                        let normal = terrain.query_clamped(st.foot.x).normal;
                        contacts.push(Contact { leg, position: st.foot, normal });
                    }
                }
                ContactState::Swing(s) => {
                    if st.stance || s < st.last_s {
                        st.stance = false;
                        st.s0 = s;
                        st.lift = st.foot;
                        st.swing_time = ((1.0 - s) * pattern.swing_duration()).max(dt);
                    }
                    st.last_s = s;
                    // Re-planned every step so the capture term sees the latest velocity.
                    let hip = body.position + rot * stance_anchor(leg, params, narrowing);
                    st.target = touchdown_target(
                        &hip,
                        &v_filtered,
                        &v_des,
                        (1.0 - s) * pattern.swing_duration(),
                        pattern.stance_duration(),
                        config.capture_gain,
                        terrain,
                    );
                    let local = if st.s0 < 1.0 { (s - st.s0) / (1.0 - st.s0) } else { 1.0 };
                    let kin = swing_kinematics(local, &st.lift, &st.target, config.swing_apex, st.swing_time);
                    st.foot = kin.position;
                    swing_accel[leg.index()] = kin.acceleration;
                }
            }
            if st.stance {
                st.last_s = 0.0;
            }
        }

        // Trunk PD plus gravity feedforward scaled up for flight phases.
        let err_pos = Vector3::new(0.0, -body.position.y, ground.height + h0 - body.position.z);
        let err_vel = v_des - body.velocity;
        let ff = params.weight() / (1.0 - flight_fraction(&pattern)).max(0.2);
        let force = config.kp_linear * err_pos + config.kd_linear * err_vel + Vector3::new(0.0, 0.0, ff);
        let desired = BodyState::attitude(0.0, ground.inclination);
        let att_err = (desired * rot.inverse()).scaled_axis();
        let moment = config.kp_angular * att_err - config.kd_angular * body.angular_velocity;
        let wrench = Wrench::new(force, moment);

        let mu = contacts
            .iter()
            .map(|c| terrain.query_clamped(c.position.x).friction)
            .fold(f64::INFINITY, f64::min);
        let dist = distribute_forces_with(&wrench, &contacts, &body.position, mu, f_max, &solver);
        if !dist.is_feasible() {
            out.infeasible_steps += 1;
        }
        let mut forces = dist.forces;
        // Swing feet carry no force but their positions are still logged.
        for leg in LegId::ALL {
            if !forces.stance[leg.index()] {
                forces.positions[leg.index()] = legs[leg.index()].foot;
            }
        }

        let mut torques = JointVector::zeros();
        let mut qd = JointVector::zeros();
        let mut flags = 0;
        let g_body = rot_inv * gravity;
        for leg in LegId::ALL {
            let st = &mut legs[leg.index()];
            let foot_body = rot_inv * (st.foot - body.position);
            let (q, _) = leg_ik_clamped(&foot_body, leg, params);
            let lt = if forces.stance[leg.index()] {
                stance_torques(&(rot_inv * forces.force(leg)), &q, leg, params, config.torque_limit)
            } else if st.stance {
                stance_torques(&Vector3::zeros(), &q, leg, params, config.torque_limit)
            } else {
                let a_body = rot_inv * swing_accel[leg.index()];
                swing_torques(&q, &a_body, &g_body, leg, params, config.torque_limit)
            };
            flags += usize::from(lt.over_limit);
            torques.set_leg(leg, &lt.torque);
            if let Some(prev) = st.q_prev {
                qd.set_leg(leg, &((q - prev) / dt));
            }
            st.q_prev = Some(q);
        }
        log.torque_flags += usize::from(flags > 0);

        let mut ext = Wrench::new(push, (rot * Vector3::new(0.0, 0.0, config.push_height)).cross(&push));
        if config.swing_reaction {
            for leg in LegId::ALL {
                let st = &legs[leg.index()];
                if !st.stance {
                    let f = -params.foot_mass * swing_accel[leg.index()];
                    ext.force += f;
                    ext.moment += (st.foot - body.position).cross(&f);
                }
            }
        }
        body = step_with_external(&body, &forces, &ext, params, dt);
        time = (k + 1) as f64 * dt;
        last_forces = forces;
        log.push(time, body, torques, qd, forces);
        out.steps += 1;

        if let Some(kind) = failure(&body, terrain, config, h0) {
            out.failure = Some(kind);
            out.failure_time = Some(time);
            finish_stride(&mut log, &stride_start, &body, time, true);
            out.strides.push(std::mem::take(&mut log));
            close_window(&mut current_window, &mut out.windows, time);
            return Ok(out);
        }
    }

    if steps > 0 && steps.is_multiple_of(tps) {
        finish_stride(&mut log, &stride_start, &body, time, false);
        out.strides.push(log);
    }
    close_window(&mut current_window, &mut out.windows, time);
    Ok(out)
}

/// Body-frame point at hip height above which a foot lands at the neutral
/// stance. Narrowing pulls it toward the trunk centre: with one end of the
/// body supported, zero pitch moment needs a force aimed at the centre of
/// mass, which the friction pyramid only admits for feet close beneath it.
fn stance_anchor(leg: LegId, params: &RobotParams, narrowing: f64) -> Vector3<f64> {
    let hip = params.hip(leg);
    Vector3::new(
        hip.x * (1.0 - narrowing),
        hip.y + leg.side() * params.links.hip_offset,
        hip.z,
    )
}

fn finish_stride(log: &mut StrideLog, start: &Vector3<f64>, body: &BodyState, time: f64, failed: bool) {
    let d = body.position - start;
    log.displacement = (d.x * d.x + d.z * d.z).sqrt();
    log.duration = time - log.time.first().copied().unwrap_or(time);
    log.failed = failed;
}

fn track_window(
    source: &GaitSource,
    current: &mut Option<(String, f64)>,
    windows: &mut Vec<TransitionWindow>,
    time: f64,
    dt: f64,
) {
    let active = match source {
        GaitSource::Fsm(f) => f.in_progress().map(|p| p.action.label()),
        GaitSource::Steady(_) => None,
    };
    let same = matches!((&active, &*current), (Some(a), Some((b, _))) if a == b);
    if !same {
        // The step that completed the action ends at `time + dt`.
        close_window(current, windows, time + dt);
        *current = active.map(|a| (a, time));
    }
}

fn close_window(current: &mut Option<(String, f64)>, windows: &mut Vec<TransitionWindow>, time: f64) {
    if let Some((action, start)) = current.take() {
        windows.push(TransitionWindow { action, start, end: time });
    }
}

fn failure(body: &BodyState, terrain: &Terrain, config: &SimConfig, h0: f64) -> Option<FailureKind> {
    let finite = body.position.iter().chain(body.velocity.iter()).all(|v| v.is_finite())
        && body.orientation.coords.iter().all(|v| v.is_finite());
    if !finite {
        return Some(FailureKind::Diverged);
    }
    if body.roll().abs() > config.max_roll {
        return Some(FailureKind::Roll);
    }
    if body.pitch().abs() > config.max_pitch {
        return Some(FailureKind::Pitch);
    }
    let ground = terrain.query_clamped(body.position.x).height;
    if body.position.z - ground < config.min_height_ratio * h0 {
        return Some(FailureKind::Height);
    }
    None
}
