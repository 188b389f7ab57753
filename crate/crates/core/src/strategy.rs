//! Gait strategies over composite terrain and the paired baseline comparison.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::gait::GaitName;
use crate::mapping::{HystereticSelector, MapSet, DEFAULT_BAND};
use crate::metrics::{evaluate_trial, MetricsConfig, TrialMetrics};
use crate::robot::{RobotParams, Terrain};
use crate::sim::{run_trial_with_hook, GaitSource, SimConfig, TrialOutput, TrialSetup};
use crate::transition::GaitEvent;

/// Distance kept clear of the terrain end, m.
const END_MARGIN: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// One gait for the whole run.
    FixedGait(GaitName),
    /// The map's gait for the commanded speed on the starting surface, kept
    /// for the whole run.
    PerVelocityFixed { maps: MapSet, c: f64 },
    /// Re-selects at every stride boundary from the map of the surface under
    /// the trunk and transitions in motion.
    MultiGait { maps: MapSet, c: f64 },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::FixedGait(g) => format!("fixed-{g}"),
            Strategy::PerVelocityFixed { c, .. } => format!("per-velocity-c{c}"),
            Strategy::MultiGait { c, .. } => format!("multi-gait-c{c}"),
        }
    }

    /// Checks that every surface the run can meet has a map covering `v`.
    pub fn check_coverage(&self, terrain: &Terrain, start_x: f64, v: f64) -> Result<()> {
        let (maps, c, labels) = match self {
            Strategy::FixedGait(_) => return Ok(()),
            Strategy::PerVelocityFixed { maps, c } => (maps, *c, vec![terrain.label_at(start_x)]),
            Strategy::MultiGait { maps, c } => (maps, *c, terrain.labels()),
        };
        for label in labels {
            let map = maps
                .get(label)
                .ok_or_else(|| Error::Strategy(format!("no map for terrain segment '{label}'")))?;
            if !map.covers(v) {
                return Err(Error::Strategy(format!(
                    "map for '{label}' covers {:?}..{:?} m/s, not {v}",
                    map.v_grid.first(),
                    map.v_grid.last()
                )));
            }
            map.select(v, c).map_err(|e| Error::Strategy(e.to_string()))?;
        }
        Ok(())
    }

    fn initial_gait(&self, terrain: &Terrain, start_x: f64, v: f64) -> Result<GaitName> {
        match self {
            Strategy::FixedGait(g) => Ok(*g),
            Strategy::PerVelocityFixed { maps, c } | Strategy::MultiGait { maps, c } => {
                Ok(maps.select(terrain.label_at(start_x), v, *c)?.gait)
            }
        }
    }
}

/// Simulated time needed to cross the terrain from `start_x` at `v`, whole
/// strides, at least three.
pub fn traverse_duration(terrain: &Terrain, start_x: f64, v: f64, period: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(invalid_arg("a traverse needs a positive commanded speed"));
    }
    let distance = terrain.end_x - END_MARGIN - start_x;
    if !(distance > 0.0) {
        return Err(invalid_arg(format!("start x = {start_x} leaves no room to traverse")));
    }
    let strides = (distance / (v * period)).ceil().max(3.0);
    Ok(strides * period)
}

/// Runs `strategy` across the terrain from x = 0 at constant speed.
pub fn run_strategy(
    strategy: &Strategy,
    terrain: &Terrain,
    v_cmd: f64,
    stream: u64,
    sim: &SimConfig,
    params: &RobotParams,
) -> Result<TrialOutput> {
    let start_x = 0.0;
    strategy.check_coverage(terrain, start_x, v_cmd)?;
    let duration = traverse_duration(terrain, start_x, v_cmd, sim.period_s)?;
    let setup = TrialSetup::new(v_cmd, duration).stream(stream).start_x(start_x);
    let gait = strategy.initial_gait(terrain, start_x, v_cmd)?;
    let source = GaitSource::gait(gait, sim);
    match strategy {
        Strategy::MultiGait { maps, c } => {
            let mut selector = HystereticSelector::new(DEFAULT_BAND);
            let mut err = None;
            let out = run_trial_with_hook(source, &setup, terrain, sim, params, |b| {
                match selector.select(maps, b.terrain_label, b.v_cmd, *c) {
                    Ok(g) if g != b.current => Some(GaitEvent::new(g)),
                    Ok(_) => None,
                    Err(e) => {
                        err.get_or_insert(e);
                        None
                    }
                }
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        }
        _ => run_trial_with_hook(source, &setup, terrain, sim, params, |_| None),
    }
}

/// Comparison settings; velocities are drawn uniformly from
/// `[v_min, v_max)` and shared by all strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub trials: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub seed: u64,
    /// Strides excluded from the metrics at the start of every run.
    pub warmup: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { trials: 30, v_min: 0.3, v_max: 2.7, seed: 7, warmup: 3 }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(crate::error::invalid_config("compare needs at least one trial"));
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return Err(crate::error::invalid_config("velocity range must satisfy 0 < v_min <= v_max"));
        }
        Ok(())
    }

    pub fn velocities(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.trials)
            .map(|_| if self.v_max > self.v_min { rng.random_range(self.v_min..self.v_max) } else { self.v_min })
            .collect()
    }
}

/// One strategy's trial in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrial {
    pub strategy: String,
    pub trial: usize,
    pub v: f64,
    pub cot: f64,
    pub stb: f64,
    pub failed: bool,
    pub events: usize,
}

/// A strategy's aggregate with failures clamped into the means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub cot: f64,
    pub stb: f64,
    pub success: usize,
    pub trials: usize,
}

impl ComparisonRow {
    pub fn success_ratio(&self) -> f64 {
        self.success as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub trials: Vec<ComparisonTrial>,
}

/// Runs every strategy on the same velocities and noise streams.
pub fn compare(
    strategies: &[Strategy],
    terrain: &Terrain,
    config: &CompareConfig,
    sim: &SimConfig,
    params: &RobotParams,
    metrics: &MetricsConfig,
) -> Result<Comparison> {
    config.validate()?;
    sim.validate()?;
    params.validate()?;
    terrain.validate()?;
    let mut sim = sim.clone();
    sim.seed = config.seed;
    let velocities = config.velocities();
    let jobs: Vec<(usize, usize)> =
        (0..strategies.len()).flat_map(|s| (0..velocities.len()).map(move |t| (s, t))).collect();
    let trials: Vec<ComparisonTrial> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let v = velocities[t];
            let strategy = &strategies[s];
            let (m, events) = match run_strategy(strategy, terrain, v, t as u64, &sim, params) {
                Ok(out) => {
                    let n = out.strides.len().saturating_sub(config.warmup);
                    let m = evaluate_trial(&out.strides, out.failed(), config.warmup, n, terrain, params, metrics)
                        .unwrap_or_else(|_| TrialMetrics::failure());
                    (m, out.events.len())
                }
                Err(Error::Strategy(e)) => return Err(Error::Strategy(e)),
                Err(_) => (TrialMetrics::failure(), 0),
            };
            Ok(ComparisonTrial {
                strategy: strategy.label(),
                trial: t,
                v,
                cot: m.cot,
                stb: m.stb,
                failed: m.failed,
                events,
            })
        })
        .collect::<Result<_>>()?;
    let rows = strategies
        .iter()
        .map(|s| {
            let label = s.label();
            let mine: Vec<&ComparisonTrial> = trials.iter().filter(|t| t.strategy == label).collect();
            let n = mine.len() as f64;
            ComparisonRow {
                strategy: label,
                cot: mine.iter().map(|t| t.cot).sum::<f64>() / n,
                stb: mine.iter().map(|t| t.stb).sum::<f64>() / n,
                success: mine.iter().filter(|t| !t.failed).count(),
                trials: mine.len(),
            }
        })
        .collect();
    Ok(Comparison { rows, trials })
}

/// Writes `strategy,cot,stb,success,trials`.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
