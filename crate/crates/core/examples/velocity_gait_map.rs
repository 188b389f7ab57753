//! Builds a coarse velocity-gait map on flat ground and queries it.

use quadgait::mapping::{build_map_sim, MapConfig};
use quadgait::metrics::MetricsConfig;
use quadgait::robot::{RobotParams, Terrain};
use quadgait::sim::SimConfig;

fn main() -> quadgait::Result<()> {
    let terrain = Terrain::preset("flat")?;
    let config = MapConfig { v_step: 0.4, c_values: vec![0.1, 0.5, 0.9], ..Default::default() };
    let map = build_map_sim(&terrain, &config, &SimConfig::default(), &RobotParams::default(), &MetricsConfig::default())?;

    print!("{:>6}", "v");
    for c in &map.c {
        print!("  c={c:<8}");
    }
    println!();
    for &v in &map.v_grid {
        print!("{v:>6.1}");
        for &c in &map.c {
            let cell = map.cell(v, c).expect("every grid cell is filled");
            print!("  {:<10}", cell.gait.as_str());
        }
        println!();
    }
    let s = map.select(1.05, 0.1)?;
    println!("\n1.05 m/s, c = 0.1 -> {} (bin {} m/s, J_e {:.3})", s.gait, s.cell.v, s.cell.j_e);
    Ok(())
}
