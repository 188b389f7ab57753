//! Requests trot-run while running. The state machine never links run and
//! trot-run directly, so it goes through bound and trot; the duty factor and
//! offsets are sampled along the way.

use quadgait::transition::{fsm_dispatch, trace, FsmConfig, FsmState, GaitEvent};
use quadgait::GaitName;

fn main() {
    let fsm = FsmState::new(GaitName::Run, FsmConfig::default());
    let event = GaitEvent::new(GaitName::TrotRun);
    let planned = fsm_dispatch(&fsm, event);
    println!("run -> trot-run: [{}]", planned.queued_labels().join(", "));

    let rows = trace(fsm, &[(0.0, event)], 3.0, 1e-3);
    println!("{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}  {:<9} action", "t", "beta", "RF", "RH", "LF", "LH", "state");
    for r in rows.iter().step_by(100) {
        println!(
            "{:>6.2} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}  {:<9} {}",
            r.time_s, r.beta, r.phi_rf, r.phi_rh, r.phi_lf, r.phi_lh, r.state, r.action
        );
    }
}
