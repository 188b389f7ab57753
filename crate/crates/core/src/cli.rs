//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on usage or configuration errors, 2 when the robot fell.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::Config;
use crate::error::{invalid_arg, Error, Result};
use crate::gait::{GaitName, LegId};
use crate::manifest::RunManifest;
use crate::mapping::{build_map_sim, MapSet, VelocityGaitMap};
use crate::metrics::{evaluate_stride, evaluate_trial, MetricsRecord, StrideMetrics, TrialMetrics};
use crate::robot::Terrain;
use crate::sim::trial::{FailureKind, TransitionWindow};
use crate::sim::{run_trial, run_trial_with_hook, write_stride_csv, EventRecord, GaitSource, StrideLog, TrialSetup};
use crate::strategy::{compare, write_comparison_csv, Strategy};
use crate::transition::GaitEvent;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Demo maps built with the default config and shipped with the crate.
pub const DEMO_MAPS: [(&str, &str); 2] = [
    ("flat", include_str!("../data/map_flat.json")),
    ("slope12", include_str!("../data/map_slope12.json")),
];

const DEFAULT_STRATEGIES: &str = "fixed:trot,fixed:trot-run,per-velocity:0.5,multi:0.1,multi:0.5,multi:0.9";

#[derive(Debug, Parser)]
#[command(name = "quadgait", version, about = "Quadruped multi-gait selection and transition toolkit")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one gait at one speed and write stride logs and metrics.
    Simulate(SimulateArgs),
    /// Switch gaits in motion and write foot heights and attitude.
    TransitionDemo(TransitionArgs),
    /// Sweep gaits over speeds and write a velocity-gait map.
    BuildMap(BuildMapArgs),
    /// Query a map for the gait at a speed.
    Select(SelectArgs),
    /// Compare strategies on paired random trials.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub gait: String,
    #[arg(long)]
    pub velocity: f64,
    #[arg(long, default_value = "flat")]
    pub terrain: String,
    /// Simulated seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
}

#[derive(Debug, Args)]
pub struct TransitionArgs {
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long, default_value_t = 1.0)]
    pub velocity: f64,
    #[arg(long, default_value = "flat")]
    pub terrain: String,
    /// Strides in the source gait before the event and after the chain.
    #[arg(long, default_value_t = 5)]
    pub settle: usize,
}

#[derive(Debug, Args)]
pub struct BuildMapArgs {
    #[arg(long, default_value = "flat")]
    pub terrain: String,
    #[arg(long)]
    pub v_min: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub v_step: Option<f64>,
    /// Comma-separated c values.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Measured strides per trial.
    #[arg(long)]
    pub strides: Option<usize>,
    /// Comma-separated candidate gaits.
    #[arg(long, value_delimiter = ',')]
    pub gaits: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Map file, or `demo:<terrain>` for a shipped map.
    #[arg(long, default_value = "demo:flat")]
    pub map: String,
    #[arg(long)]
    pub velocity: f64,
    #[arg(long)]
    pub c: f64,
    /// Defaults to the map's terrain.
    #[arg(long)]
    pub terrain: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `fixed:<gait>`, `per-velocity:<c>` or `multi:<c>`, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_STRATEGIES)]
    pub strategies: Vec<String>,
    #[arg(long, default_value = "flat-slope")]
    pub terrain: String,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Map files; the shipped demo maps when omitted.
    #[arg(long, value_delimiter = ',')]
    pub maps: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub v_min: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::RobotFailed(kind)) => {
            eprintln!("robot failure: {kind:?}");
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Ok,
    RobotFailed(FailureKind),
}

fn context(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = context(cli)?;
    let jobs = cli.jobs.unwrap_or(0);
    if cli.jobs == Some(0) {
        return Err(invalid_arg("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid_arg(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(cli, &cfg, a),
        Command::TransitionDemo(a) => transition_demo(cli, &cfg, a),
        Command::BuildMap(a) => build_map_cmd(cli, &cfg, a),
        Command::Select(a) => select_cmd(a),
        Command::Compare(a) => compare_cmd(cli, &cfg, a),
    })
}

fn manifest(cli: &Cli, cfg: &Config, command: &str, outputs: &[&Path]) -> RunManifest {
    RunManifest::new(command, cli.config.as_ref().map(|p| p.display().to_string()), cfg.sim.seed)
        .with_outputs(outputs.iter().map(|p| p.display().to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn gait(name: &str) -> Result<GaitName> {
    name.parse()
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    manifest: RunManifest,
    gait: GaitName,
    velocity: f64,
    terrain: &'a str,
    duration: f64,
    failure: Option<FailureKind>,
    failure_time: Option<f64>,
    /// Mean over strides after the warm-up, clamped if the robot fell.
    trial: TrialMetrics,
    record: MetricsRecord,
    strides: Vec<StrideMetrics>,
    infeasible_steps: usize,
}

fn simulate(cli: &Cli, cfg: &Config, a: &SimulateArgs) -> Result<Outcome> {
    let g = gait(&a.gait)?;
    let terrain = cfg.terrain(&a.terrain)?;
    let setup = TrialSetup::new(a.velocity, a.duration);
    let out = run_trial(GaitSource::gait(g, &cfg.sim), &setup, &terrain, &cfg.sim, &cfg.robot)?;
    let csv_path = cli.out.join("strides.csv");
    let json_path = cli.out.join("metrics.json");
    let mut w = create(&csv_path)?;
    write_stride_csv(&out.strides, &mut w)?;
    w.flush()?;
    let warmup = cfg.map.warmup;
    let n = out.strides.len().saturating_sub(warmup);
    let trial = evaluate_trial(&out.strides, out.failed(), warmup, n, &terrain, &cfg.robot, &cfg.metrics)?;
    let strides = out
        .strides
        .iter()
        .map(|s| evaluate_stride(s, &terrain, &cfg.robot, &cfg.metrics).unwrap_or_else(|_| StrideMetrics::failure()))
        .collect();
    let report = SimulateReport {
        manifest: manifest(cli, cfg, "simulate", &[&csv_path, &json_path]),
        gait: g,
        velocity: a.velocity,
        terrain: &terrain.id,
        duration: a.duration,
        failure: out.failure,
        failure_time: out.failure_time,
        trial,
        record: MetricsRecord::new(&terrain.id, g.as_str(), a.velocity, 0, &trial, &cfg.map.c_values)?,
        strides,
        infeasible_steps: out.infeasible_steps,
    };
    write_json(&json_path, &report)?;
    println!("{g} at {} m/s on {}: CoT {:.3}, STB {:.3}", a.velocity, terrain.id, trial.cot, trial.stb);
    Ok(match out.failure {
        Some(kind) => Outcome::RobotFailed(kind),
        None => Outcome::Ok,
    })
}

#[derive(Serialize)]
struct TransitionReport {
    manifest: RunManifest,
    from: GaitName,
    to: GaitName,
    velocity: f64,
    events: Vec<EventRecord>,
    windows: Vec<TransitionWindow>,
    failure: Option<FailureKind>,
}

fn transition_demo(cli: &Cli, cfg: &Config, a: &TransitionArgs) -> Result<Outcome> {
    let from = gait(&a.from)?;
    let to = gait(&a.to)?;
    let terrain = cfg.terrain(&a.terrain)?;
    let sim = &cfg.sim;
    let chain = crate::transition::action_chain(from, to).len() as f64;
    let busy = chain * (sim.transition_duration_s + sim.dwell_strides as f64 * sim.period_s);
    let strides = 2 * a.settle.max(1) + (busy / sim.period_s).ceil() as usize;
    let setup = TrialSetup::new(a.velocity, strides as f64 * sim.period_s);
    let settle = a.settle.max(1);
    let mut sent = false;
    let out = run_trial_with_hook(GaitSource::gait(from, sim), &setup, &terrain, sim, &cfg.robot, |b| {
        if !sent && b.strides >= settle {
            sent = true;
            return Some(GaitEvent::new(to));
        }
        None
    })?;

    let csv_path = cli.out.join("transition.csv");
    let json_path = cli.out.join("transition.json");
    write_transition_csv(&csv_path, &out.strides, &out.windows, &terrain)?;
    let report = TransitionReport {
        manifest: manifest(cli, cfg, "transition-demo", &[&csv_path, &json_path]),
        from,
        to,
        velocity: a.velocity,
        events: out.events.clone(),
        windows: out.windows.clone(),
        failure: out.failure,
    };
    write_json(&json_path, &report)?;
    for e in &out.events {
        println!("{:.2} s: {} -> {} via [{}]", e.time, e.from, e.to, e.chain.join(", "));
    }
    Ok(match out.failure {
        Some(kind) => Outcome::RobotFailed(kind),
        None => Outcome::Ok,
    })
}

/// Foot heights above the ground under each foot, trunk attitude and the
/// transition action running at every sample.
fn write_transition_csv(path: &Path, logs: &[StrideLog], windows: &[TransitionWindow], terrain: &Terrain) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["time_s".to_string(), "gait".into(), "action".into()];
    header.extend(LegId::ALL.iter().map(|l| format!("foot_z_{}", l.label().to_lowercase())));
    header.extend(["roll".to_string(), "pitch".into()]);
    w.write_record(&header)?;
    for (li, log) in logs.iter().enumerate() {
        for k in usize::from(li > 0)..log.len() {
            let t = log.time[k];
            let action = windows.iter().find(|x| t >= x.start && t < x.end).map(|x| x.action.as_str()).unwrap_or("");
            let mut row = vec![t.to_string(), log.gait.clone(), action.to_string()];
            for p in &log.forces[k].positions {
                row.push((p.z - terrain.query_clamped(p.x).height).to_string());
            }
            row.push(log.body[k].roll().to_string());
            row.push(log.body[k].pitch().to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn build_map_cmd(cli: &Cli, cfg: &Config, a: &BuildMapArgs) -> Result<Outcome> {
    let terrain = cfg.terrain(&a.terrain)?;
    let mut mc = cfg.map.clone();
    if let Some(v) = a.v_min {
        mc.v_min = v;
    }
    if let Some(v) = a.v_max {
        mc.v_max = v;
    }
    if let Some(v) = a.v_step {
        mc.v_step = v;
    }
    if let Some(c) = &a.c {
        mc.c_values = c.clone();
    }
    if let Some(t) = a.trials {
        mc.trials = t;
    }
    if let Some(n) = a.strides {
        mc.strides = n;
    }
    if let Some(g) = &a.gaits {
        mc.gaits = g.iter().map(|s| gait(s)).collect::<Result<_>>()?;
    }
    let mut map = build_map_sim(&terrain, &mc, &cfg.sim, &cfg.robot, &cfg.metrics)?;
    let json_path = cli.out.join(format!("map_{}.json", terrain.id));
    let csv_path = cli.out.join(format!("map_{}.csv", terrain.id));
    let m = manifest(cli, cfg, "build-map", &[&json_path, &csv_path]);
    map.manifest = Some(m.clone());
    write_json(&json_path, &map)?;
    let mut w = create(&csv_path)?;
    map.write_csv(&mut w)?;
    w.flush()?;
    write_json(&csv_path.with_extension("manifest.json"), &m)?;
    for &c in &map.c {
        let row: Vec<&str> = map
            .v_grid
            .iter()
            .filter_map(|&v| map.cell(v, c).map(|cell| cell.gait.as_str()))
            .collect();
        println!("c={c}: {}", row.join(" "));
    }
    Ok(Outcome::Ok)
}

/// Reads a map file or a shipped `demo:<terrain>` map.
pub fn load_map(spec: &str) -> Result<VelocityGaitMap> {
    if let Some(name) = spec.strip_prefix("demo:") {
        let (_, text) = DEMO_MAPS
            .iter()
            .find(|(t, _)| *t == name)
            .ok_or_else(|| invalid_arg(format!("no demo map '{name}'")))?;
        return VelocityGaitMap::from_json(text);
    }
    let text = fs::read_to_string(spec).map_err(|e| invalid_arg(format!("cannot read map {spec}: {e}")))?;
    VelocityGaitMap::from_json(&text)
}

pub fn demo_maps() -> Result<MapSet> {
    DEMO_MAPS.iter().map(|(t, _)| load_map(&format!("demo:{t}"))).collect()
}

fn select_cmd(a: &SelectArgs) -> Result<Outcome> {
    let map = load_map(&a.map)?;
    let terrain = a.terrain.clone().unwrap_or_else(|| map.terrain.clone());
    let s = crate::mapping::select_gait(&map, &terrain, a.velocity, a.c)?;
    println!(
        "{} j_e={:.4} cot={:.4} stb={:.4}{}",
        s.gait,
        s.cell.j_e,
        s.cell.cot,
        s.cell.stb,
        if s.clamped { " (velocity clamped to map range)" } else { "" }
    );
    Ok(Outcome::Ok)
}

/// Parses `fixed:<gait>`, `per-velocity:<c>` or `multi:<c>`.
pub fn parse_strategy(spec: &str, maps: &MapSet) -> Result<Strategy> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| invalid_arg(format!("strategy '{spec}' is not of the form kind:arg")))?;
    let c = || arg.parse::<f64>().map_err(|_| invalid_arg(format!("bad c value in '{spec}'")));
    match kind {
        "fixed" => Ok(Strategy::FixedGait(gait(arg)?)),
        "per-velocity" => Ok(Strategy::PerVelocityFixed { maps: maps.clone(), c: c()? }),
        "multi" => Ok(Strategy::MultiGait { maps: maps.clone(), c: c()? }),
        other => Err(invalid_arg(format!("unknown strategy kind '{other}'"))),
    }
}

fn compare_cmd(cli: &Cli, cfg: &Config, a: &CompareArgs) -> Result<Outcome> {
    let terrain = cfg.terrain(&a.terrain)?;
    let maps = match &a.maps {
        Some(paths) => paths.iter().map(|p| load_map(&p.display().to_string())).collect::<Result<MapSet>>()?,
        None => demo_maps()?,
    };
    let strategies = a.strategies.iter().map(|s| parse_strategy(s, &maps)).collect::<Result<Vec<_>>>()?;
    let mut cc = cfg.compare.clone();
    if let Some(t) = a.trials {
        cc.trials = t;
    }
    if let Some(v) = a.v_min {
        cc.v_min = v;
    }
    if let Some(v) = a.v_max {
        cc.v_max = v;
    }
    let result = compare(&strategies, &terrain, &cc, &cfg.sim, &cfg.robot, &cfg.metrics).map_err(|e| match e {
        Error::Strategy(s) => invalid_arg(s),
        other => other,
    })?;
    let csv_path = cli.out.join("comparison.csv");
    let trials_path = cli.out.join("comparison_trials.csv");
    let mut w = create(&csv_path)?;
    write_comparison_csv(&result.rows, &mut w)?;
    w.flush()?;
    let mut tw = csv::Writer::from_writer(create(&trials_path)?);
    for t in &result.trials {
        tw.serialize(t)?;
    }
    tw.flush()?;
    let m = manifest(cli, cfg, "compare", &[&csv_path, &trials_path]);
    write_json(&cli.out.join("comparison.manifest.json"), &m)?;
    for r in &result.rows {
        println!("{:<22} CoT {:.3}  STB {:.3}  {}/{}", r.strategy, r.cot, r.stb, r.success, r.trials);
    }
    Ok(Outcome::Ok)
}
