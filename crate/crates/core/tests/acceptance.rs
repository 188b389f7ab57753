//! One PASS/FAIL line per acceptance criterion, with runtimes.

mod common;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DVector, Vector3};
use quadgait::gait::{flight_fraction, stance_count, stance_measure, standard_gait, DEFAULT_PERIOD_S};
use quadgait::mapping::{build_map_sim, MapConfig, VelocityGaitMap};
use quadgait::metrics::{clamp_with, cot, j_e, stb, stride_energy, ClampMode, MetricsConfig, StbWeights, StrideMetrics};
use quadgait::metrics::{COT_BOUND, STB_BOUND};
use quadgait::robot::{leg_fk, leg_ik, leg_jacobian, JointVector, RobotParams, Terrain};
use quadgait::sim::forces::cone_violation;
use quadgait::sim::{distribute_forces, BodyState, ContactForceSet, SimConfig, StrideLog};
use quadgait::strategy::{compare, write_comparison_csv, CompareConfig};
use quadgait::transition::{
    advance, fsm_dispatch, transition_params, FsmConfig, FsmState, GaitEvent, TransitionAction, EDGES,
};
use quadgait::{cli, GaitName, LegId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Name, check and time budget of one criterion.
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gait_schedule() -> Check {
    let g = |n| standard_gait(n, DEFAULT_PERIOD_S).unwrap();
    for k in 0..1000 {
        let phase = k as f64 / 1000.0;
        ensure(stance_count(&g(GaitName::Walk), phase) == 3, || format!("walk at {phase}"))?;
    }
    for n in [GaitName::Trot, GaitName::Bound] {
        // sample mid-way between the quarter-stride events
        for k in 0..1000 {
            let phase = (k as f64 + 0.5) / 1000.0;
            ensure(stance_count(&g(n), phase) == 2, || format!("{n} at {phase}"))?;
        }
    }
    for n in [GaitName::Run, GaitName::TrotRun] {
        let f = flight_fraction(&g(n));
        ensure((f - 0.4).abs() <= 1e-9, || format!("{n} flight {f}"))?;
    }
    for n in GaitName::ALL {
        let total: f64 = stance_measure(&g(n)).iter().sum();
        ensure(total == 4.0 * g(n).beta(), || format!("{n} stance measure {total}"))?;
    }
    Ok("stance counts 3/2/2, flight 0.4, stance measure 4β bitwise".into())
}

fn transition_conformance() -> Check {
    let dt = 1e-3;
    for (from, to) in EDGES {
        let a = TransitionAction::new(from, to, T_S, DEFAULT_PERIOD_S).unwrap();
        let g = |n| standard_gait(n, DEFAULT_PERIOD_S).unwrap();
        ensure(transition_params(&a, 0.0).unwrap() == g(from), || format!("{a} start"))?;
        ensure(transition_params(&a, T_S).unwrap() == g(to), || format!("{a} end"))?;
        let mut prev = transition_params(&a, 0.0).unwrap();
        for k in 1..=500 {
            let t = k as f64 * dt;
            let p = transition_params(&a, t).unwrap();
            let (beta, rf, rh) = expected(from, to, t);
            ensure((p.beta() - beta).abs() < 1e-12, || format!("{a} beta at {t}"))?;
            ensure(circular(p.offset(LegId::RF), rf) < 1e-12 && circular(p.offset(LegId::RH), rh) < 1e-12, || {
                format!("{a} offsets at {t}")
            })?;
            let bound = a.slope() * dt * (1.0 + 1e-9);
            ensure((p.beta() - prev.beta()).abs() <= bound, || format!("{a} beta jump at {t}"))?;
            for leg in LegId::ALL {
                ensure(circular(p.offset(leg), prev.offset(leg)) <= bound, || format!("{a} {leg:?} jump at {t}"))?;
            }
            prev = p;
        }
    }
    Ok(format!("{} edges, exact endpoints, Lipschitz at 1 ms", EDGES.len()))
}

fn fsm_conformance() -> Check {
    let config = FsmConfig::default();
    for (i, row) in ORDER_TABLE.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            let (from, to) = (GaitName::from_code(i as u8).unwrap(), GaitName::from_code(j as u8).unwrap());
            let mut state = fsm_dispatch(&FsmState::new(from, config), GaitEvent::new(to));
            let labels = state.queued_labels().join(",");
            ensure(&labels == entry, || format!("({from}, E{j}): {labels} != {entry}"))?;
            ensure(!labels.contains("a34") && !labels.contains("a43"), || format!("direct run edge in {labels}"))?;
            let mut t = 0.0;
            while !state.is_idle() && t < 10.0 {
                state = advance(&state, 1e-3).0;
                t += 1e-3;
            }
            ensure(state.is_idle() && state.current() == to, || format!("({from}, E{j}) ended in {}", state.current()))?;
        }
    }
    Ok("25 pairs verbatim, every chain lands on target".into())
}

fn force_solver() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_res, mut worst_cone) = (0.0f64, 0.0f64);
    for trial in 0..500 {
        let count = rng.random_range(3..=4);
        let contacts = random_contacts(&mut rng, count);
        let com = random_com(&mut rng);
        let mut seed = ContactForceSet::empty();
        for c in &contacts {
            seed.set(c.leg, in_cone_force(&mut rng, c), c.position);
        }
        let w = newton_euler(&seed, &com);
        let d = distribute_forces(&w, &contacts, &com, MU, F_MAX);
        let got = newton_euler(&d.forces, &com);
        let res = ((got.force - w.force).norm_squared() + (got.moment - w.moment).norm_squared()).sqrt() / w.norm().max(1.0);
        worst_res = worst_res.max(res);
        worst_cone = worst_cone.max(cone_violation(&d.forces, &contacts, MU, F_MAX));
        for leg in LegId::ALL {
            if !contacts.iter().any(|c| c.leg == leg) {
                ensure(d.forces.force(leg) == Vector3::zeros(), || format!("trial {trial}: swing {leg:?} loaded"))?;
            }
        }
    }
    ensure(worst_res <= 1e-6, || format!("residual {worst_res:e}"))?;
    ensure(worst_cone <= 1e-9, || format!("cone violation {worst_cone:e}"))?;
    let mut worst_gap = 0.0f64;
    for _ in 0..50 {
        let contacts = random_contacts(&mut rng, 3);
        let com = random_com(&mut rng);
        let mut seed = ContactForceSet::empty();
        let mut start = DVector::zeros(9);
        for (k, c) in contacts.iter().enumerate() {
            let f = in_cone_force(&mut rng, c);
            seed.set(c.leg, f, c.position);
            start.rows_mut(3 * k, 3).copy_from(&f);
        }
        let d = distribute_forces(&newton_euler(&seed, &com), &contacts, &com, MU, F_MAX);
        let solver: f64 = contacts.iter().map(|c| d.forces.force(c.leg).norm_squared()).sum();
        let oracle = search_oracle(&contacts, &com, &start, &mut rng);
        worst_gap = worst_gap.max((solver - oracle).abs() / oracle);
    }
    ensure(worst_gap <= 0.01, || format!("objective gap {worst_gap:.4}"))?;
    Ok(format!("residual {worst_res:.1e}, cone {worst_cone:.1e}, oracle gap {:.3}%", 100.0 * worst_gap))
}

fn metrics_suite() -> Check {
    let period = 0.4;
    let signal = |t: f64| {
        let p = 2.0 * std::f64::consts::PI * t / period;
        (8.0 * p.sin() + 2.0, 3.0 * (p + 0.4).sin())
    };
    let n = 400;
    let time: Vec<f64> = (0..=n).map(|k| k as f64 * 1e-3).collect();
    let joint = |v: f64| JointVector([v; 12]);
    let log = StrideLog {
        index: 0,
        time: time.clone(),
        body: vec![BodyState::at_rest(Vector3::new(0.0, 0.0, 0.3)); n + 1],
        torques: time.iter().map(|&t| joint(signal(t).0)).collect(),
        joint_velocities: time.iter().map(|&t| joint(signal(t).1)).collect(),
        forces: vec![ContactForceSet::empty(); n + 1],
        v_cmd: 1.0,
        displacement: 0.4,
        duration: period,
        failed: false,
        gait: "trot".into(),
        torque_flags: 0,
    };
    let w = stride_energy(&log).unwrap();
    let h = 1e-5;
    let reference: f64 =
        (0..40_000).map(|k| signal(k as f64 * h)).map(|(u, v)| 12.0 * (u * v).max(0.0) * h).sum();
    let rel = (w - reference).abs() / reference;
    ensure(rel <= 0.005, || format!("energy error {rel:.4}"))?;
    ensure(cot(12.0 * 9.81 * 0.5, 12.0, 0.5, 9.81).unwrap() == 1.0, || "CoT identity".into())?;
    let mut still = log.clone();
    for b in &mut still.body {
        b.velocity = Vector3::new(1.0, 0.0, 0.0);
    }
    ensure(stb(&still, &Terrain::preset("flat").unwrap(), &StbWeights::default()).unwrap() == 0.0, || {
        "STB zero case".into()
    })?;
    for (cot_v, stb_v) in [(0.8, 0.3), (1.25, 0.0), (0.1, 1.36)] {
        for c in [0.0, 0.25, 0.5, 1.0] {
            let direct = c * stb_v + (1.0 - c) * cot_v;
            ensure(j_e(cot_v, stb_v, c).unwrap() == direct, || format!("J_e at c = {c}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let m = StrideMetrics {
            work: 1.0,
            cot: rng.random_range(0.0..3.0),
            stb: rng.random_range(0.0..3.0),
            failed: rng.random_bool(0.3),
            stb_guards: 0,
        };
        for mode in [ClampMode::All, ClampMode::FailedOnly] {
            let once = clamp_with(m, mode);
            ensure(clamp_with(once, mode) == once, || "clamp not idempotent".into())?;
        }
    }
    Ok(format!("energy error {:.3}%, identities exact", 100.0 * rel))
}

fn kinematics() -> Check {
    let params = RobotParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_fk, mut worst_j) = (0.0f64, 0.0f64);
    for leg in LegId::ALL {
        for k in 0..1000 {
            let q: Vector3<f64> =
                Vector3::new(rng.random_range(-0.6..0.6), rng.random_range(-1.0..1.0), rng.random_range(-2.4..-0.4));
            let foot = leg_fk(&q, leg, &params);
            let back = leg_ik(&foot, leg, &params).map_err(|e| format!("{leg:?}: {e}"))?;
            worst_fk = worst_fk.max((leg_fk(&back, leg, &params) - foot).norm());
            if k < 100 {
                let j = leg_jacobian(&q, leg, &params);
                for col in 0..3 {
                    let mut dq = Vector3::zeros();
                    dq[col] = 1e-6;
                    let fd = (leg_fk(&(q + dq), leg, &params) - leg_fk(&(q - dq), leg, &params)) / 2e-6;
                    worst_j = worst_j.max((j.column(col) - fd).norm() / j.column(col).norm().max(1e-3));
                }
            }
        }
    }
    ensure(worst_fk <= 1e-9, || format!("round trip {worst_fk:e} m"))?;
    ensure(worst_j <= 1e-6, || format!("jacobian {worst_j:e}"))?;
    Ok(format!("round trip {worst_fk:.1e} m, jacobian {worst_j:.1e}"))
}

fn trend(map: &VelocityGaitMap, c: f64) -> String {
    map.v_grid.iter().map(|&v| map.select(v, c).unwrap().gait.to_string()).collect::<Vec<_>>().join(" ")
}

fn trend_reproduction() -> Check {
    let flat = Terrain::preset("flat").unwrap();
    let (sim, params, metrics) = (SimConfig::default(), RobotParams::default(), MetricsConfig::default());
    let config = MapConfig::default();
    let map = build_map_sim(&flat, &config, &sim, &params, &metrics).map_err(|e| e.to_string())?;
    let low = &map.v_grid[..2];
    for &c in &config.c_values {
        for &v in low {
            let g = map.select(v, c).unwrap().gait;
            ensure(g == GaitName::Trot, || format!("{g} at {v} m/s, c = {c}"))?;
        }
    }
    let top = *map.v_grid.last().unwrap();
    for &c in config.c_values.iter().filter(|&&c| c <= 0.3) {
        let g = map.select(top, c).unwrap().gait;
        ensure(g.duty_factor() == 0.3, || format!("{g} at {top} m/s, c = {c}"))?;
    }

    let reduced = MapConfig { v_step: 0.6, c_values: vec![0.1, 0.9], trials: 3, strides: 5, ..MapConfig::default() };
    let start = Instant::now();
    let small = build_map_sim(&flat, &reduced, &sim, &params, &metrics).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(15 * 60), || format!("reduced grid took {took:?}"))?;
    let mut err = std::io::stderr();
    let _ = writeln!(err, "  info: default map c=0.1: {}", trend(&map, 0.1));
    let _ = writeln!(err, "  info: default map c=0.9: {}", trend(&map, 0.9));
    let _ = writeln!(err, "  info: reduced grid ({:.1} s) c=0.1: {}", took.as_secs_f64(), trend(&small, 0.1));
    let _ = writeln!(err, "  info: reduced grid c=0.9: {}", trend(&small, 0.9));
    Ok(format!("trot at {low:?} m/s for all c, β=0.3 gait at {top} m/s for c ≤ 0.3; reduced grid {:.1} s", took.as_secs_f64()))
}

fn comparison() -> Check {
    let terrain = Terrain::preset("flat-slope").unwrap();
    let maps = cli::demo_maps().map_err(|e| e.to_string())?;
    let specs = ["fixed:trot", "fixed:trot-run", "per-velocity:0.5", "multi:0.1", "multi:0.5", "multi:0.9"];
    let strategies: Vec<_> = specs.iter().map(|s| cli::parse_strategy(s, &maps).unwrap()).collect();
    let config = CompareConfig { trials: 10, ..CompareConfig::default() };
    let result = compare(&strategies, &terrain, &config, &SimConfig::default(), &RobotParams::default(), &MetricsConfig::default())
        .map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_comparison_csv(&result.rows, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    ensure(csv.lines().next() == Some("strategy,cot,stb,success,trials") && csv.lines().count() == 7, || csv.clone())?;
    let row = |label: &str| result.rows.iter().find(|r| r.strategy == label).unwrap();
    let trot_run = row("fixed-trot-run").success_ratio();
    for other in ["fixed-trot", "per-velocity-c0.5"] {
        ensure(trot_run < row(other).success_ratio(), || format!("trot-run {trot_run} vs {other} {}", row(other).success_ratio()))?;
    }
    for t in result.trials.iter().filter(|t| t.strategy.starts_with("multi")) {
        ensure(t.cot <= COT_BOUND && t.stb <= STB_BOUND, || format!("{t:?}"))?;
    }
    for r in &result.rows {
        let _ = writeln!(std::io::stderr(), "  info: {:<20} CoT {:.3} STB {:.3} {}/{}", r.strategy, r.cot, r.stb, r.success, r.trials);
    }
    Ok(format!("fixed-trot-run success {}/10 is lowest of the fixed baselines", row("fixed-trot-run").success))
}

/// Every file under `dir`, with manifest timestamps and the directory
/// itself blanked out.
fn snapshot(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let text: Vec<&str> = text.lines().filter(|l| !l.contains("\"timestamp\"")).collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), text.join("\n").replace(dir.to_str().unwrap(), "<out>"))
        })
        .collect()
}

fn determinism() -> Check {
    let commands: [&[&str]; 4] = [
        &["simulate", "--gait", "trot", "--velocity", "1.2", "--duration", "4"],
        &["transition-demo", "--from", "walk", "--to", "bound"],
        &["build-map", "--v-min", "0.6", "--v-max", "1.2", "--v-step", "0.6", "--c", "0.5", "--trials", "1", "--strides", "2"],
        &["compare", "--trials", "2", "--strategies", "fixed:trot,multi:0.5"],
    ];
    for cmd in commands {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let mut args = vec!["quadgait", "--seed", "13", "--out", dir.path().to_str().unwrap()];
                args.extend_from_slice(cmd);
                let code = cli::run(args);
                (code, snapshot(dir.path()))
            })
            .collect();
        ensure(runs[0].0 == 0 && runs[1].0 == 0, || format!("{} exited {} / {}", cmd[0], runs[0].0, runs[1].0))?;
        ensure(runs[0].1 == runs[1].1, || format!("{} output differs between runs", cmd[0]))?;
    }
    Ok("simulate, transition-demo, build-map and compare rerun identically".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("gait schedule", gait_schedule, Duration::from_secs(1)),
        ("transition conformance", transition_conformance, Duration::from_secs(1)),
        ("state machine conformance", fsm_conformance, Duration::from_secs(1)),
        ("force solver", force_solver, Duration::from_secs(30)),
        ("metrics oracles", metrics_suite, Duration::from_secs(5)),
        ("kinematics", kinematics, Duration::from_secs(5)),
        ("trend reproduction", trend_reproduction, Duration::from_secs(15 * 60)),
        ("comparison harness", comparison, Duration::from_secs(20 * 60)),
        ("determinism", determinism, Duration::from_secs(20 * 60)),
    ];
    let mut failed = Vec::new();
    for (k, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let verdict = match (&result, took <= budget) {
            (Ok(detail), true) => format!("PASS {}: {name} ({:.2} s) {detail}", k + 1, took.as_secs_f64()),
            (Ok(_), false) => format!("FAIL {}: {name} took {:.2} s, budget {:?}", k + 1, took.as_secs_f64(), budget),
            (Err(why), _) => format!("FAIL {}: {name} ({:.2} s) {why}", k + 1, took.as_secs_f64()),
        };
        if verdict.starts_with("FAIL") {
            failed.push(k + 1);
        }
        // written past the harness capture so the verdicts always show
        let _ = writeln!(std::io::stderr(), "{verdict}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
