//! Velocity-gait maps: sweep gaits over a speed grid, score every cell by
//! the mean energy-stability index and answer selection queries.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, Result};
use crate::gait::GaitName;
use crate::manifest::RunManifest;
use crate::metrics::{evaluate_trial, j_e, MetricsConfig, TrialMetrics};
use crate::robot::{RobotParams, Terrain};
use crate::sim::trial::MAX_SPEED;
use crate::sim::{run_trial, GaitSource, SimConfig, TrialSetup};

/// Default hysteresis band for selection queries, m/s.
pub const DEFAULT_BAND: f64 = 0.1;

/// Values closer than this are treated as equal on grids and in ties.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    pub c_values: Vec<f64>,
    pub trials: usize,
    /// Measured strides per trial.
    pub strides: usize,
    /// Strides run before measurement starts.
    pub warmup: usize,
    pub gaits: Vec<GaitName>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            v_min: 0.3,
            v_max: 2.7,
            v_step: 0.2,
            c_values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            trials: 5,
            strides: 10,
            warmup: 3,
            gaits: GaitName::ALL.to_vec(),
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gaits.is_empty() {
            return Err(invalid_config("candidate gait set is empty"));
        }
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max && self.v_max <= MAX_SPEED) {
            return Err(invalid_config(format!(
                "velocity range [{}, {}] must lie within [0, {MAX_SPEED}] m/s",
                self.v_min, self.v_max
            )));
        }
        if !(self.v_step > 0.0) {
            return Err(invalid_config("velocity step must be positive"));
        }
        if self.c_values.is_empty() || self.c_values.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid_config("c values must be a non-empty list within [0, 1]"));
        }
        if self.trials == 0 || self.strides == 0 {
            return Err(invalid_config("trials and strides per trial must be at least 1"));
        }
        Ok(())
    }

    /// Grid points `v_min, v_min + step, …` up to `v_max` inclusive.
    pub fn v_grid(&self) -> Vec<f64> {
        let n = ((self.v_max - self.v_min) / self.v_step + GRID_TOL).floor() as usize + 1;
        (0..n).map(|i| round_grid(self.v_min + i as f64 * self.v_step)).collect()
    }
}

/// Strips representation noise such as `0.30000000000000004`.
fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Produces the metrics of one trial. Injectable so selection logic can be
/// exercised on synthetic tables.
pub trait TrialEvaluator: Sync {
    fn evaluate(&self, gait: GaitName, velocity: f64, stream: u64, warmup: usize, strides: usize)
        -> Result<TrialMetrics>;
}

/// Evaluates trials by closed-loop simulation.
#[derive(Clone, Debug)]
pub struct SimEvaluator<'a> {
    pub terrain: &'a Terrain,
    pub sim: &'a SimConfig,
    pub params: &'a RobotParams,
    pub metrics: &'a MetricsConfig,
}

impl TrialEvaluator for SimEvaluator<'_> {
    fn evaluate(
        &self,
        gait: GaitName,
        velocity: f64,
        stream: u64,
        warmup: usize,
        strides: usize,
    ) -> Result<TrialMetrics> {
        let duration = (warmup + strides).max(3) as f64 * self.sim.period_s;
        let setup = TrialSetup::new(velocity, duration).stream(stream);
        let out = run_trial(GaitSource::gait(gait, self.sim), &setup, self.terrain, self.sim, self.params)?;
        evaluate_trial(&out.strides, out.failed(), warmup, strides, self.terrain, self.params, self.metrics)
    }
}

/// One trial of the sweep, kept so any `c` can be scored without rerunning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub gait: GaitName,
    pub v: f64,
    pub trial: u64,
    pub cot: f64,
    pub stb: f64,
    pub failed: bool,
}

/// Aggregate of all trials of one gait at one speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitStats {
    pub v: f64,
    pub gait: GaitName,
    pub cot: f64,
    pub stb: f64,
    pub success: usize,
    pub trials: usize,
}

impl GaitStats {
    pub fn j_e(&self, c: f64) -> Result<f64> {
        j_e(self.cot, self.stb, c)
    }
}

/// The winning gait of one (speed, c) cell with its means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub v: f64,
    pub c: f64,
    pub gait: GaitName,
    pub j_e: f64,
    pub cot: f64,
    pub stb: f64,
    pub success: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGaitMap {
    pub terrain: String,
    pub c: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub cells: Vec<MapCell>,
    /// Trials behind every per-gait mean.
    pub trials: usize,
    /// Per-gait means for every speed, from which the cells were chosen.
    pub stats: Vec<GaitStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

/// Runs every (gait, speed, trial) of the sweep in parallel. Trial `t` at
/// speed index `i` uses random stream `i·2¹⁶ + t` for every gait, so gaits
/// are compared under identical disturbances.
pub fn sweep(config: &MapConfig, evaluator: &dyn TrialEvaluator) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let grid = config.v_grid();
    let mut jobs = Vec::with_capacity(config.gaits.len() * grid.len() * config.trials);
    for &gait in &config.gaits {
        for (i, &v) in grid.iter().enumerate() {
            for t in 0..config.trials as u64 {
                jobs.push((gait, i as u64, v, t));
            }
        }
    }
    jobs.par_iter()
        .map(|&(gait, i, v, t)| {
            let m = evaluator.evaluate(gait, v, (i << 16) + t, config.warmup, config.strides)?;
            Ok(TrialResult { gait, v, trial: t, cot: m.cot, stb: m.stb, failed: m.failed })
        })
        .collect()
}

/// Averages trial results into per-gait statistics and picks the argmin gait
/// of every cell.
pub fn aggregate(terrain: &str, config: &MapConfig, results: &[TrialResult]) -> Result<VelocityGaitMap> {
    config.validate()?;
    let grid = config.v_grid();
    let mut stats = Vec::with_capacity(grid.len() * config.gaits.len());
    for &v in &grid {
        for &gait in &config.gaits {
            let rows: Vec<&TrialResult> =
                results.iter().filter(|r| r.gait == gait && (r.v - v).abs() < GRID_TOL).collect();
            if rows.is_empty() {
                return Err(invalid_arg(format!("no trials for {gait} at {v} m/s")));
            }
            let n = rows.len() as f64;
            stats.push(GaitStats {
                v,
                gait,
                cot: rows.iter().map(|r| r.cot).sum::<f64>() / n,
                stb: rows.iter().map(|r| r.stb).sum::<f64>() / n,
                success: rows.iter().filter(|r| !r.failed).count(),
                trials: rows.len(),
            });
        }
    }
    let mut cells = Vec::with_capacity(grid.len() * config.c_values.len());
    for &v in &grid {
        let candidates: Vec<&GaitStats> = stats.iter().filter(|s| s.v == v).collect();
        for &c in &config.c_values {
            let best = pick(&candidates, c)?;
            cells.push(MapCell {
                v,
                c,
                gait: best.gait,
                j_e: best.j_e(c)?,
                cot: best.cot,
                stb: best.stb,
                success: best.success,
            });
        }
    }
    Ok(VelocityGaitMap {
        terrain: terrain.to_string(),
        c: config.c_values.clone(),
        v_grid: grid,
        cells,
        trials: config.trials,
        stats,
        manifest: None,
    })
}

/// Lowest mean J_e wins. Ties go to the higher success rate, then to the
/// duty factor closest to a trot's, then to declaration order.
fn pick<'a>(candidates: &[&'a GaitStats], c: f64) -> Result<&'a GaitStats> {
    let mut best: Option<(&GaitStats, f64)> = None;
    for &s in candidates {
        let j = s.j_e(c)?;
        best = match best {
            None => Some((s, j)),
            Some((b, bj)) => {
                if beats(s, j, b, bj) {
                    Some((s, j))
                } else {
                    Some((b, bj))
                }
            }
        };
    }
    best.map(|(s, _)| s).ok_or_else(|| invalid_config("candidate gait set is empty"))
}

fn beats(a: &GaitStats, ja: f64, b: &GaitStats, jb: f64) -> bool {
    if (ja - jb).abs() > GRID_TOL {
        return ja < jb;
    }
    let ra = a.success as f64 / a.trials as f64;
    let rb = b.success as f64 / b.trials as f64;
    if ra != rb {
        return ra > rb;
    }
    let da = (a.gait.duty_factor() - 0.5).abs();
    let db = (b.gait.duty_factor() - 0.5).abs();
    if (da - db).abs() > GRID_TOL {
        return da < db;
    }
    (a.gait as u8) < (b.gait as u8)
}

/// Sweeps and aggregates in one go.
pub fn build_map(terrain: &str, config: &MapConfig, evaluator: &dyn TrialEvaluator) -> Result<VelocityGaitMap> {
    let results = sweep(config, evaluator)?;
    aggregate(terrain, config, &results)
}

/// Builds the map of a single-surface terrain by simulation.
pub fn build_map_sim(
    terrain: &Terrain,
    config: &MapConfig,
    sim: &SimConfig,
    params: &RobotParams,
    metrics: &MetricsConfig,
) -> Result<VelocityGaitMap> {
    sim.validate()?;
    params.validate()?;
    terrain.validate()?;
    let evaluator = SimEvaluator { terrain, sim, params, metrics };
    build_map(&terrain.id, config, &evaluator)
}

/// Answer to a selection query.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection<'a> {
    pub gait: GaitName,
    pub cell: &'a MapCell,
    /// The query speed lay outside the grid and was clamped to its edge.
    pub clamped: bool,
}

impl VelocityGaitMap {
    /// Nearest grid index, halfway points rounding up.
    fn bin(&self, v: f64) -> Result<(usize, bool)> {
        if self.v_grid.is_empty() {
            return Err(invalid_arg("map has an empty velocity grid"));
        }
        if !v.is_finite() {
            return Err(invalid_arg(format!("velocity {v} is not finite")));
        }
        let first = self.v_grid[0];
        let last = self.v_grid[self.v_grid.len() - 1];
        let clamped = v < first - GRID_TOL || v > last + GRID_TOL;
        let mut best = 0;
        for (i, &g) in self.v_grid.iter().enumerate() {
            let d = (v - g).abs();
            let db = (v - self.v_grid[best]).abs();
            if d < db - GRID_TOL || (d <= db + GRID_TOL && g > self.v_grid[best]) {
                best = i;
            }
        }
        Ok((best, clamped))
    }

    fn c_index(&self, c: f64) -> Result<usize> {
        self.c
            .iter()
            .position(|&x| (x - c).abs() <= GRID_TOL)
            .ok_or_else(|| invalid_arg(format!("c = {c} not present in map (have {:?})", self.c)))
    }

    pub fn cell(&self, v: f64, c: f64) -> Option<&MapCell> {
        self.cells.iter().find(|m| (m.v - v).abs() <= GRID_TOL && (m.c - c).abs() <= GRID_TOL)
    }

    pub fn select(&self, v: f64, c: f64) -> Result<Selection<'_>> {
        self.c_index(c)?;
        let (i, clamped) = self.bin(v)?;
        let cell = self
            .cell(self.v_grid[i], c)
            .ok_or_else(|| invalid_arg(format!("map has no cell at v = {}, c = {c}", self.v_grid[i])))?;
        Ok(Selection { gait: cell.gait, cell, clamped })
    }

    /// Whether `v` lies within the grid extent.
    pub fn covers(&self, v: f64) -> bool {
        match (self.v_grid.first(), self.v_grid.last()) {
            (Some(&a), Some(&b)) => v >= a - GRID_TOL && v <= b + GRID_TOL,
            _ => false,
        }
    }

    pub fn stats_at(&self, v: f64) -> impl Iterator<Item = &GaitStats> {
        self.stats.iter().filter(move |s| (s.v - v).abs() <= GRID_TOL)
    }

    pub fn to_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The cell table as CSV: `terrain,v,c,gait,j_e,cot,stb,success,trials`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["terrain", "v", "c", "gait", "j_e", "cot", "stb", "success", "trials"])?;
        for m in &self.cells {
            w.write_record([
                self.terrain.clone(),
                m.v.to_string(),
                m.c.to_string(),
                m.gait.to_string(),
                m.j_e.to_string(),
                m.cot.to_string(),
                m.stb.to_string(),
                m.success.to_string(),
                self.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Selection against a map for `terrain`.
pub fn select_gait<'a>(map: &'a VelocityGaitMap, terrain: &str, v: f64, c: f64) -> Result<Selection<'a>> {
    if map.terrain != terrain {
        return Err(invalid_arg(format!("map is for terrain '{}', not '{terrain}'", map.terrain)));
    }
    map.select(v, c)
}

/// Keeps `previous` unless the map disagrees and the speed has moved more
/// than `band` away from `last_switch_v`.
pub fn select_gait_hysteretic(
    map: &VelocityGaitMap,
    terrain: &str,
    v: f64,
    c: f64,
    previous: GaitName,
    last_switch_v: f64,
    band: f64,
) -> Result<GaitName> {
    let fresh = select_gait(map, terrain, v, c)?.gait;
    if fresh != previous && (v - last_switch_v).abs() > band {
        Ok(fresh)
    } else {
        Ok(previous)
    }
}

/// Maps for several surfaces, keyed by terrain label.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapSet {
    maps: BTreeMap<String, VelocityGaitMap>,
}

impl MapSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, map: VelocityGaitMap) {
        self.maps.insert(map.terrain.clone(), map);
    }

    pub fn get(&self, terrain: &str) -> Option<&VelocityGaitMap> {
        self.maps.get(terrain)
    }

    pub fn terrains(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn select(&self, terrain: &str, v: f64, c: f64) -> Result<Selection<'_>> {
        let map = self.get(terrain).ok_or_else(|| invalid_arg(format!("no map for terrain '{terrain}'")))?;
        map.select(v, c)
    }
}

impl FromIterator<VelocityGaitMap> for MapSet {
    fn from_iter<I: IntoIterator<Item = VelocityGaitMap>>(iter: I) -> Self {
        let mut set = MapSet::new();
        for m in iter {
            set.insert(m);
        }
        set
    }
}

/// Stateful hysteretic selection. The anchor is the speed of the last
/// switch; a change of terrain resets it and takes the map's choice at once.
#[derive(Clone, Debug)]
pub struct HystereticSelector {
    pub band: f64,
    state: Option<(String, GaitName, f64)>,
}

impl Default for HystereticSelector {
    fn default() -> Self {
        Self::new(DEFAULT_BAND)
    }
}

impl HystereticSelector {
    pub fn new(band: f64) -> Self {
        Self { band, state: None }
    }

    pub fn current(&self) -> Option<GaitName> {
        self.state.as_ref().map(|s| s.1)
    }

    pub fn select(&mut self, maps: &MapSet, terrain: &str, v: f64, c: f64) -> Result<GaitName> {
        let map = maps.get(terrain).ok_or_else(|| invalid_arg(format!("no map for terrain '{terrain}'")))?;
        let gait = match &self.state {
            Some((t, prev, anchor)) if t == terrain => {
                let g = select_gait_hysteretic(map, terrain, v, c, *prev, *anchor, self.band)?;
                if g == *prev {
                    return Ok(g);
                }
                g
            }
            _ => select_gait(map, terrain, v, c)?.gait,
        };
        self.state = Some((terrain.to_string(), gait, v));
        Ok(gait)
    }
}
