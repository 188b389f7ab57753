//! Gait parameterization and per-leg contact schedules.
//!
//! A gait is a duty factor `beta` (stance fraction of the stride) plus one
//! lift-off phase per leg. Leg `l` lifts off at phase `offset[l]`, swings
//! for `1 - beta` of the stride and is in stance for the remainder.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Default stride period in seconds.
pub const DEFAULT_PERIOD_S: f64 = 0.4;

/// Legs in the fixed (RF, RH, LF, LH) order used by offset vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LegId {
    RF,
    RH,
    LF,
    LH,
}

impl LegId {
    pub const ALL: [LegId; 4] = [LegId::RF, LegId::RH, LegId::LF, LegId::LH];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn is_front(self) -> bool {
        matches!(self, LegId::RF | LegId::LF)
    }

    /// +1 for left legs, -1 for right legs (body y axis points left).
    pub fn side(self) -> f64 {
        match self {
            LegId::LF | LegId::LH => 1.0,
            LegId::RF | LegId::RH => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LegId::RF => "RF",
            LegId::RH => "RH",
            LegId::LF => "LF",
            LegId::LH => "LH",
        }
    }
}

/// The five gaits, with their state-machine numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaitName {
    Walk = 0,
    Trot = 1,
    Bound = 2,
    Run = 3,
    TrotRun = 4,
}

impl GaitName {
    pub const ALL: [GaitName; 5] = [
        GaitName::Walk,
        GaitName::Trot,
        GaitName::Bound,
        GaitName::Run,
        GaitName::TrotRun,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        GaitName::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| invalid_arg(format!("gait code {code} not in 0..=4")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GaitName::Walk => "walk",
            GaitName::Trot => "trot",
            GaitName::Bound => "bound",
            GaitName::Run => "run",
            GaitName::TrotRun => "trot-run",
        }
    }

    /// Canonical duty factor of the gait.
    pub fn duty_factor(self) -> f64 {
        match self {
            GaitName::Walk => 0.75,
            GaitName::Trot | GaitName::Bound => 0.5,
            GaitName::Run | GaitName::TrotRun => 0.3,
        }
    }
}

impl fmt::Display for GaitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "walk" | "0" => Ok(GaitName::Walk),
            "trot" | "1" => Ok(GaitName::Trot),
            "bound" | "2" => Ok(GaitName::Bound),
            "run" | "3" => Ok(GaitName::Run),
            "trot-run" | "trotrun" | "4" => Ok(GaitName::TrotRun),
            other => Err(invalid_arg(format!("unknown gait '{other}'"))),
        }
    }
}

/// Phase offsets indexed by [`LegId`], always stored in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegOffsets([f64; 4]);

impl LegOffsets {
    /// Builds offsets in (RF, RH, LF, LH) order, wrapping each modulo 1.
    pub fn new(rf: f64, rh: f64, lf: f64, lh: f64) -> Self {
        Self([wrap_phase(rf), wrap_phase(rh), wrap_phase(lf), wrap_phase(lh)])
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

impl Index<LegId> for LegOffsets {
    type Output = f64;
    fn index(&self, leg: LegId) -> &f64 {
        &self.0[leg.index()]
    }
}

impl IndexMut<LegId> for LegOffsets {
    fn index_mut(&mut self, leg: LegId) -> &mut f64 {
        &mut self.0[leg.index()]
    }
}

/// Wraps a phase into `[0, 1)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can return exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Duty factor, lift-off offsets and stride period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaitPatternRepr", into = "GaitPatternRepr")]
pub struct GaitPattern {
    beta: f64,
    offsets: LegOffsets,
    period: f64,
}

impl GaitPattern {
    pub fn new(beta: f64, offsets: LegOffsets, period: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid_arg(format!("duty factor {beta} not in (0, 1)")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid_arg(format!("stride period {period} must be positive")));
        }
        Ok(Self { beta, offsets, period })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn offsets(&self) -> &LegOffsets {
        &self.offsets
    }

    pub fn offset(&self, leg: LegId) -> f64 {
        self.offsets[leg]
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn stance_duration(&self) -> f64 {
        self.beta * self.period
    }

    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.beta) * self.period
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid_arg(format!("stride period {period} must be positive")));
        }
        self.period = period;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct OffsetsRepr {
    #[serde(rename = "RF")]
    rf: f64,
    #[serde(rename = "RH")]
    rh: f64,
    #[serde(rename = "LF")]
    lf: f64,
    #[serde(rename = "LH")]
    lh: f64,
}

#[derive(Serialize, Deserialize)]
struct GaitPatternRepr {
    beta: f64,
    offsets: OffsetsRepr,
    period_s: f64,
}

impl From<GaitPattern> for GaitPatternRepr {
    fn from(p: GaitPattern) -> Self {
        let [rf, rh, lf, lh] = p.offsets.as_array();
        GaitPatternRepr { beta: p.beta, offsets: OffsetsRepr { rf, rh, lf, lh }, period_s: p.period }
    }
}

impl TryFrom<GaitPatternRepr> for GaitPattern {
    type Error = Error;
    fn try_from(r: GaitPatternRepr) -> Result<Self> {
        let o = r.offsets;
        GaitPattern::new(r.beta, LegOffsets::new(o.rf, o.rh, o.lf, o.lh), r.period_s)
    }
}

/// Contact state of a leg at a given stride phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContactState {
    Stance,
    /// Swing with the swing-local phase in `[0, 1)`.
    Swing(f64),
}

impl ContactState {
    pub fn is_stance(self) -> bool {
        matches!(self, ContactState::Stance)
    }
}

/// Canonical parameters of a named gait.
pub fn standard_gait(name: GaitName, period: f64) -> Result<GaitPattern> {
    let offsets = match name {
        GaitName::Walk => LegOffsets::new(0.75, 0.25, 0.0, 0.5),
        GaitName::Trot | GaitName::TrotRun => LegOffsets::new(0.5, 0.0, 0.0, 0.5),
        GaitName::Bound | GaitName::Run => LegOffsets::new(0.0, 0.5, 0.0, 0.5),
    };
    GaitPattern::new(name.duty_factor(), offsets, period)
}

/// Contact state of `leg` at stride `phase`.
///
/// A leg lifting off exactly at `phase` is in swing; the touchdown instant
/// belongs to stance, so the stride is partitioned into half-open intervals.
pub fn leg_contact(pattern: &GaitPattern, phase: f64, leg: LegId) -> ContactState {
    let since_liftoff = wrap_phase(phase - pattern.offset(leg));
    let swing = 1.0 - pattern.beta;
    if since_liftoff < swing {
        ContactState::Swing(since_liftoff / swing)
    } else {
        ContactState::Stance
    }
}

/// Contact states of all four legs.
pub fn contacts(pattern: &GaitPattern, phase: f64) -> [ContactState; 4] {
    LegId::ALL.map(|leg| leg_contact(pattern, phase, leg))
}

pub fn stance_count(pattern: &GaitPattern, phase: f64) -> usize {
    LegId::ALL
        .iter()
        .filter(|&&leg| leg_contact(pattern, phase, leg).is_stance())
        .count()
}

/// Stride split into elementary intervals between consecutive lift-off and
/// touchdown events; contact states are constant on each interval.
fn elementary_intervals(pattern: &GaitPattern) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = LegId::ALL
        .iter()
        .flat_map(|&leg| {
            let lo = pattern.offset(leg);
            [lo, wrap_phase(lo + 1.0 - pattern.beta)]
        })
        .chain([0.0, 1.0])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect()
}

/// Fraction of the stride with all four feet off the ground.
pub fn flight_fraction(pattern: &GaitPattern) -> f64 {
    elementary_intervals(pattern)
        .into_iter()
        .filter(|&(a, b)| stance_count(pattern, 0.5 * (a + b)) == 0)
        .fold(0.0, |acc, (a, b)| acc + (b - a))
}

/// Share of the supported part of the stride during which every stance foot
/// is on the same end of the body (front pair only or hind pair only).
pub fn end_support_fraction(pattern: &GaitPattern) -> f64 {
    let (mut supported, mut one_end) = (0.0, 0.0);
    for (a, b) in elementary_intervals(pattern) {
        let c = contacts(pattern, 0.5 * (a + b));
        let stance: Vec<LegId> = LegId::ALL.into_iter().filter(|l| c[l.index()].is_stance()).collect();
        if stance.is_empty() {
            continue;
        }
        supported += b - a;
        let front = stance.iter().filter(|l| l.is_front()).count();
        if front == 0 || front == stance.len() {
            one_end += b - a;
        }
    }
    if supported > 0.0 {
        one_end / supported
    } else {
        0.0
    }
}

/// Per-leg stance measure over one stride, from the same interval partition.
///
/// Cut points are carried as unevaluated double-double sums so the interval
/// lengths telescope without rounding: a leg's measure is its duty factor to
/// the last bit.
pub fn stance_measure(pattern: &GaitPattern) -> [f64; 4] {
    let mut cuts: Vec<(f64, f64)> = LegId::ALL
        .iter()
        .flat_map(|&leg| {
            let lo = pattern.offset(leg);
            let mut td = dd_add(dd_add((lo, 0.0), 1.0), -pattern.beta);
            if td >= (1.0, 0.0) {
                td = dd_add(td, -1.0);
            }
            [(lo, 0.0), td]
        })
        .chain([(0.0, 0.0), (1.0, 0.0)])
        .collect();
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cuts.dedup();
    let mut acc = [(0.0, 0.0); 4];
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0].0 + w[1].0);
        let len = dd_add(dd_add(w[1], -w[0].0), -w[0].1);
        for leg in LegId::ALL {
            if leg_contact(pattern, mid, leg).is_stance() {
                let a = &mut acc[leg.index()];
                *a = dd_add(dd_add(*a, len.0), len.1);
            }
        }
    }
    acc.map(|(hi, lo)| hi + lo)
}

/// Error-free sum of a double-double and a double, renormalized.
fn dd_add((hi, lo): (f64, f64), x: f64) -> (f64, f64) {
    let s = hi + x;
    let v = s - hi;
    let err = (hi - (s - v)) + (x - v);
    let t = lo + err;
    let h = s + t;
    (h, t - (h - s))
}
