//! Prints a contact diagram for the five canonical gaits: `#` is stance,
//! `.` is swing, one column per 1/40 of a stride.

use quadgait::gait::{flight_fraction, leg_contact, stance_count, standard_gait, DEFAULT_PERIOD_S};
use quadgait::{GaitName, LegId};

fn main() -> quadgait::Result<()> {
    const COLS: usize = 40;
    for name in GaitName::ALL {
        let p = standard_gait(name, DEFAULT_PERIOD_S)?;
        println!("{name}  (beta {}, flight {:.0}%)", p.beta(), 100.0 * flight_fraction(&p));
        for leg in LegId::ALL {
            let row: String = (0..COLS)
                .map(|i| if leg_contact(&p, i as f64 / COLS as f64, leg).is_stance() { '#' } else { '.' })
                .collect();
            println!("  {:<2} {row}", leg.label());
        }
        let counts: String = (0..COLS).map(|i| char::from(b'0' + stance_count(&p, i as f64 / COLS as f64) as u8)).collect();
        println!("  n  {counts}\n");
    }
    Ok(())
}
