//! Continuous gait-parameter schedules between neighbouring gaits and the
//! finite state machine that chains them.
//!
//! Only four gait pairs are directly connected: walk-trot, trot-bound,
//! trot-trot-run and bound-run. Any other change is realized as a chain of
//! at most three of these actions. Run and trot-run are never connected
//! directly.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::gait::{standard_gait, wrap_phase, GaitName, GaitPattern, LegId, LegOffsets, DEFAULT_PERIOD_S};

/// Default transition duration in seconds.
pub const DEFAULT_TRANSITION_S: f64 = 0.5;

/// Directed edges of the gait graph, excluding self-loops.
pub const EDGES: [(GaitName, GaitName); 8] = [
    (GaitName::Walk, GaitName::Trot),
    (GaitName::Trot, GaitName::Walk),
    (GaitName::Trot, GaitName::Bound),
    (GaitName::Bound, GaitName::Trot),
    (GaitName::Bound, GaitName::Run),
    (GaitName::Run, GaitName::Bound),
    (GaitName::Trot, GaitName::TrotRun),
    (GaitName::TrotRun, GaitName::Trot),
];

pub fn is_edge(from: GaitName, to: GaitName) -> bool {
    from == to || EDGES.contains(&(from, to))
}

/// One switching action `a_ij` of the gait graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionAction {
    pub from: GaitName,
    pub to: GaitName,
    /// Transition duration; zero for self-loops.
    pub duration: f64,
    /// Stride period carried by the emitted patterns.
    pub period: f64,
}

impl TransitionAction {
    pub fn new(from: GaitName, to: GaitName, duration: f64, period: f64) -> Result<Self> {
        if !is_edge(from, to) {
            return Err(invalid_arg(format!(
                "no direct transition {from} -> {to} (a{}{})",
                from.code(),
                to.code()
            )));
        }
        if period <= 0.0 {
            return Err(invalid_arg("stride period must be positive"));
        }
        let duration = if from == to { 0.0 } else { duration };
        if from != to && !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid_arg(format!("transition duration {duration} must be positive")));
        }
        Ok(Self { from, to, duration, period })
    }

    /// Action with the default duration and period.
    pub fn standard(from: GaitName, to: GaitName) -> Result<Self> {
        Self::new(from, to, DEFAULT_TRANSITION_S, DEFAULT_PERIOD_S)
    }

    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }

    /// Label such as `a12`.
    pub fn label(&self) -> String {
        format!("a{}{}", self.from.code(), self.to.code())
    }

    /// Maximum rate of change of any parameter, per second.
    pub fn slope(&self) -> f64 {
        if self.is_self_loop() {
            return 0.0;
        }
        use GaitName::*;
        match (self.from, self.to) {
            (Walk, Trot) | (Trot, Walk) => 1.0 / (4.0 * self.duration),
            (Trot, Bound) | (Bound, Trot) => 1.0 / (2.0 * self.duration),
            _ => 1.0 / (5.0 * self.duration),
        }
    }
}

impl fmt::Display for TransitionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    // (1-s)a + sb reproduces both endpoints bit-exactly
    (1.0 - s) * a + s * b
}

/// Instantaneous gait parameters `t` seconds into `action`.
///
/// Duty factors move linearly at 1/(4 T_s) for walk-trot and 1/(5 T_s) for
/// the trot-run and bound-run pairs; trot-bound keeps `beta = 0.5` and moves
/// the right-side offsets at 1/(2 T_s) in opposite senses. The left offsets
/// stay at 0.0 (LF) and 0.5 (LH) throughout.
pub fn transition_params(action: &TransitionAction, t: f64) -> Result<GaitPattern> {
    if !is_edge(action.from, action.to) {
        return Err(invalid_arg(format!("invalid transition {}", action.label())));
    }
    if !(0.0..=action.duration).contains(&t) {
        return Err(invalid_arg(format!(
            "t = {t} outside [0, {}] for {}",
            action.duration,
            action.label()
        )));
    }
    let source = standard_gait(action.from, action.period)?;
    if action.is_self_loop() {
        return Ok(source);
    }
    let target = standard_gait(action.to, action.period)?;
    let s = t / action.duration;
    let beta = lerp(source.beta(), target.beta(), s);

    use GaitName::*;
    let (rf, rh) = match (action.from, action.to) {
        (Walk, Trot) | (Trot, Walk) => (beta, wrap_phase(beta + 0.5)),
        (Trot, Bound) | (Bound, Trot) => (
            lerp(source.offset(LegId::RF), target.offset(LegId::RF), s),
            lerp(source.offset(LegId::RH), target.offset(LegId::RH), s),
        ),
        _ => (
            source.offset(LegId::RF),
            source.offset(LegId::RH),
        ),
    };
    GaitPattern::new(beta, LegOffsets::new(rf, rh, 0.0, 0.5), action.period)
}

/// Event `E_i`: a request to reach gait `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub target: GaitName,
}

impl GaitEvent {
    pub fn new(target: GaitName) -> Self {
        Self { target }
    }
}

/// Sequence of gaits visited from `from` to `to` (inclusive), found by
/// breadth-first search over the gait graph.
fn gait_path(from: GaitName, to: GaitName) -> Vec<GaitName> {
    if from == to {
        return vec![from, to];
    }
    let mut prev: [Option<GaitName>; 5] = [None; 5];
    let mut seen = [false; 5];
    let mut frontier = VecDeque::from([from]);
    seen[from as usize] = true;
    while let Some(g) = frontier.pop_front() {
        if g == to {
            break;
        }
        for &(a, b) in EDGES.iter().filter(|(a, _)| *a == g) {
            if !seen[b as usize] {
                seen[b as usize] = true;
                prev[b as usize] = Some(a);
                frontier.push_back(b);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while let Some(p) = prev[cur as usize] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

/// Action chain answering event `E_to` in state `from`.
pub fn action_chain(from: GaitName, to: GaitName) -> Vec<(GaitName, GaitName)> {
    gait_path(from, to).windows(2).map(|w| (w[0], w[1])).collect()
}

/// Timing parameters of the state machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsmConfig {
    pub transition_duration_s: f64,
    /// Full strides spent in an intermediate gait between chained actions.
    pub dwell_strides: u32,
    pub period_s: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            transition_duration_s: DEFAULT_TRANSITION_S,
            dwell_strides: 1,
            period_s: DEFAULT_PERIOD_S,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InProgress {
    pub action: TransitionAction,
    pub elapsed: f64,
}

const TIME_EPS: f64 = 1e-9;

/// Gait state machine: current gait, queued actions and the action being
/// executed.
#[derive(Clone, Debug, PartialEq)]
pub struct FsmState {
    config: FsmConfig,
    current: GaitName,
    queue: VecDeque<TransitionAction>,
    in_progress: Option<InProgress>,
    dwell_remaining: f64,
    deferred: Option<GaitEvent>,
}

impl FsmState {
    pub fn new(current: GaitName, config: FsmConfig) -> Self {
        Self {
            config,
            current,
            queue: VecDeque::new(),
            in_progress: None,
            dwell_remaining: 0.0,
            deferred: None,
        }
    }

    pub fn current(&self) -> GaitName {
        self.current
    }

    pub fn config(&self) -> &FsmConfig {
        &self.config
    }

    pub fn queue(&self) -> impl Iterator<Item = &TransitionAction> {
        self.queue.iter()
    }

    pub fn queued_labels(&self) -> Vec<String> {
        self.queue.iter().map(|a| a.label()).collect()
    }

    pub fn in_progress(&self) -> Option<&InProgress> {
        self.in_progress.as_ref()
    }

    pub fn deferred(&self) -> Option<GaitEvent> {
        self.deferred
    }

    /// True when nothing is queued, running or deferred.
    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.in_progress.is_none() && self.deferred.is_none()
    }

    fn action(&self, from: GaitName, to: GaitName) -> TransitionAction {
        TransitionAction::new(from, to, self.config.transition_duration_s, self.config.period_s)
            .expect("chain edges come from the gait graph")
    }

    /// Replaces the queue with the chain for `event`, or defers the event
    /// while an action is executing. Returns the queued chain when dispatched.
    pub fn dispatch(&mut self, event: GaitEvent) -> Option<Vec<TransitionAction>> {
        if self.in_progress.is_some() {
            self.deferred = Some(event);
            return None;
        }
        let chain: Vec<TransitionAction> = action_chain(self.current, event.target)
            .into_iter()
            .map(|(a, b)| self.action(a, b))
            .collect();
        self.queue = chain.iter().copied().collect();
        self.dwell_remaining = 0.0;
        Some(chain)
    }

    /// Steps the machine by `dt` and returns the gait pattern in effect.
    pub fn advance(&mut self, dt: f64) -> GaitPattern {
        if let Some(mut ip) = self.in_progress.take() {
            ip.elapsed += dt;
            if ip.elapsed + TIME_EPS >= ip.action.duration {
                self.finish(ip.action);
                return self.steady();
            }
            let pattern = transition_params(&ip.action, ip.elapsed)
                .expect("elapsed time kept inside the action window");
            self.in_progress = Some(ip);
            return pattern;
        }
        if self.dwell_remaining > TIME_EPS {
            self.dwell_remaining -= dt;
            return self.steady();
        }
        while let Some(next) = self.queue.pop_front() {
            if next.is_self_loop() {
                self.current = next.to;
                continue;
            }
            let ip = InProgress { action: next, elapsed: dt };
            if ip.elapsed + TIME_EPS >= next.duration {
                self.finish(next);
                return self.steady();
            }
            self.in_progress = Some(ip);
            return transition_params(&next, dt).expect("dt within action window");
        }
        self.steady()
    }

    fn finish(&mut self, action: TransitionAction) {
        self.current = action.to;
        self.in_progress = None;
        if !self.queue.is_empty() {
            self.dwell_remaining = self.config.dwell_strides as f64 * self.config.period_s;
        }
        if let Some(ev) = self.deferred.take() {
            self.dispatch(ev);
        }
    }

    /// Canonical pattern of the current gait.
    pub fn steady(&self) -> GaitPattern {
        standard_gait(self.current, self.config.period_s).expect("period validated")
    }
}

/// Value-style dispatch.
pub fn fsm_dispatch(state: &FsmState, event: GaitEvent) -> FsmState {
    let mut next = state.clone();
    next.dispatch(event);
    next
}

/// Value-style advance.
pub fn advance(state: &FsmState, dt: f64) -> (FsmState, GaitPattern) {
    let mut next = state.clone();
    let pattern = next.advance(dt);
    (next, pattern)
}

/// One row of a transition trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub beta: f64,
    pub phi_rf: f64,
    pub phi_rh: f64,
    pub phi_lf: f64,
    pub phi_lh: f64,
    pub state: String,
    pub action: String,
}

impl TraceRow {
    pub fn new(time_s: f64, pattern: &GaitPattern, fsm: &FsmState) -> Self {
        let [rf, rh, lf, lh] = pattern.offsets().as_array();
        Self {
            time_s,
            beta: pattern.beta(),
            phi_rf: rf,
            phi_rh: rh,
            phi_lf: lf,
            phi_lh: lh,
            state: fsm.current().to_string(),
            action: fsm.in_progress().map(|ip| ip.action.label()).unwrap_or_default(),
        }
    }
}

/// Runs the machine for `duration` seconds, dispatching `events` at their
/// times, and records one trace row per step.
pub fn trace(
    mut fsm: FsmState,
    events: &[(f64, GaitEvent)],
    duration: f64,
    dt: f64,
) -> Vec<TraceRow> {
    let steps = (duration / dt).round() as usize;
    let mut pending: VecDeque<_> = events.iter().copied().collect();
    let mut rows = Vec::with_capacity(steps);
    for k in 1..=steps {
        let t = k as f64 * dt;
        while pending.front().is_some_and(|(te, _)| *te <= t) {
            let (_, ev) = pending.pop_front().unwrap();
            fsm.dispatch(ev);
        }
        let pattern = fsm.advance(dt);
        rows.push(TraceRow::new(t, &pattern, &fsm));
    }
    rows
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
