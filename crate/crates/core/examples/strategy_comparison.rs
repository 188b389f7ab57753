//! Compares fixed gaits with map-driven strategies on flat-then-slope
//! terrain, using the shipped demo maps and paired trials.

use quadgait::cli::demo_maps;
use quadgait::metrics::MetricsConfig;
use quadgait::robot::{RobotParams, Terrain};
use quadgait::sim::SimConfig;
use quadgait::strategy::{compare, write_comparison_csv, CompareConfig, Strategy};
use quadgait::GaitName;

fn main() -> quadgait::Result<()> {
    let maps = demo_maps()?;
    let strategies = vec![
        Strategy::FixedGait(GaitName::Trot),
        Strategy::FixedGait(GaitName::TrotRun),
        Strategy::PerVelocityFixed { maps: maps.clone(), c: 0.5 },
        Strategy::MultiGait { maps: maps.clone(), c: 0.1 },
        Strategy::MultiGait { maps, c: 0.9 },
    ];
    let terrain = Terrain::preset("flat-slope")?;
    let config = CompareConfig { trials: 8, ..Default::default() };
    let result = compare(&strategies, &terrain, &config, &SimConfig::default(), &RobotParams::default(), &MetricsConfig::default())?;
    write_comparison_csv(&result.rows, std::io::stdout())?;
    let switches: usize = result.trials.iter().filter(|t| t.strategy.starts_with("multi")).map(|t| t.events).sum();
    eprintln!("gait events dispatched by multi-gait runs: {switches}");
    Ok(())
}
