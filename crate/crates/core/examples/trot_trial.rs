//! Trots at 1 m/s on flat ground for ten seconds and reports per-stride
//! displacement, cost of transport and stability.

use quadgait::metrics::{evaluate_stride, evaluate_trial, MetricsConfig};
use quadgait::robot::{RobotParams, Terrain};
use quadgait::sim::{run_trial, GaitSource, SimConfig, TrialSetup};
use quadgait::GaitName;

fn main() -> quadgait::Result<()> {
    let sim = SimConfig::default();
    let params = RobotParams::default();
    let metrics = MetricsConfig::default();
    let terrain = Terrain::preset("flat")?;
    let out = run_trial(GaitSource::gait(GaitName::Trot, &sim), &TrialSetup::new(1.0, 10.0), &terrain, &sim, &params)?;

    println!("stride   ds [m]    CoT     STB");
    for s in out.strides.iter().take(12) {
        let m = evaluate_stride(s, &terrain, &params, &metrics)?;
        println!("{:>6} {:>8.3} {:>7.3} {:>7.3}", s.index, s.displacement, m.cot, m.stb);
    }
    let n = out.strides.len() - 3;
    let trial = evaluate_trial(&out.strides, out.failed(), 3, n, &terrain, &params, &metrics)?;
    println!("...\n{} strides, failure {:?}", out.strides.len(), out.failure);
    println!("mean over strides 3..: CoT {:.3}, STB {:.3}", trial.cot, trial.stb);
    println!("least-squares force steps: {} of {}", out.infeasible_steps, out.steps);
    Ok(())
}
