//! Splits a standing wrench over four feet and over a trot diagonal, and
//! shows the friction pyramid limiting a lateral push.

use nalgebra::Vector3;
use quadgait::robot::RobotParams;
use quadgait::sim::forces::{cone_violation, Contact};
use quadgait::sim::{distribute_forces, Wrench};
use quadgait::LegId;

fn report(title: &str, wrench: &Wrench, contacts: &[Contact], com: &Vector3<f64>, mu: f64, f_max: f64) {
    let d = distribute_forces(wrench, contacts, com, mu, f_max);
    println!("{title}: {:?}, residual {:.2e}", d.status, d.residual);
    for c in contacts {
        let f = d.forces.force(c.leg);
        println!("  {:<2} f = ({:+7.2}, {:+7.2}, {:+7.2}) N", c.leg.label(), f.x, f.y, f.z);
    }
    println!("  pyramid violation {:.1e} N", cone_violation(&d.forces, contacts, mu, f_max));
}

fn main() {
    let params = RobotParams::default();
    let com = Vector3::new(0.0, 0.0, params.nominal_height);
    let feet: Vec<Contact> = LegId::ALL
        .iter()
        .map(|&leg| {
            let mut p = params.nominal_foot(leg, params.nominal_height);
            p.z += com.z;
            Contact::flat(leg, p)
        })
        .collect();
    let mg = params.weight();
    let f_max = 2.0 * mg;
    let stand = Wrench::new(Vector3::new(0.0, 0.0, mg), Vector3::zeros());

    report("four feet, standing", &stand, &feet, &com, 0.7, f_max);
    let diagonal: Vec<Contact> = feet.iter().copied().filter(|c| matches!(c.leg, LegId::RF | LegId::LH)).collect();
    report("trot diagonal RF+LH, standing", &stand, &diagonal, &com, 0.7, f_max);
    let shove = Wrench::new(Vector3::new(0.0, 0.9 * mg, mg), Vector3::zeros());
    report("four feet, lateral force above the pyramid", &shove, &feet, &com, 0.7, f_max);
}
