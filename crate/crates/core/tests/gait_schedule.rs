use proptest::prelude::*;
use quadgait::gait::{
    flight_fraction, leg_contact, stance_count, stance_measure, standard_gait, ContactState, GaitPattern, LegOffsets,
    DEFAULT_PERIOD_S,
};
use quadgait::{GaitName, LegId};

fn gait(name: GaitName) -> GaitPattern {
    standard_gait(name, DEFAULT_PERIOD_S).unwrap()
}

/// Phases `k / 1000` that do not coincide with a lift-off or touchdown.
fn interior_phases(p: &GaitPattern) -> impl Iterator<Item = f64> + '_ {
    (0..1000).map(|k| k as f64 / 1000.0).filter(move |&phase| {
        LegId::ALL.iter().all(|&leg| {
            let lo = p.offset(leg);
            let td = (lo + 1.0 - p.beta()).rem_euclid(1.0);
            (phase - lo).abs() > 1e-9 && (phase - td).abs() > 1e-9
        })
    })
}

/// Independent contact rule: swing iff the lift-off lies at most `1 − β`
/// behind the phase on the stride circle.
fn swinging(p: &GaitPattern, phase: f64, leg: LegId) -> bool {
    let mut since = phase - p.offset(leg);
    while since < 0.0 {
        since += 1.0;
    }
    since < 1.0 - p.beta()
}

#[test]
fn walk_keeps_three_feet_down() {
    let walk = gait(GaitName::Walk);
    for k in 0..1000 {
        assert_eq!(stance_count(&walk, k as f64 / 1000.0), 3, "phase {}", k as f64 / 1000.0);
    }
}

#[test]
fn trot_and_bound_keep_two_feet_down() {
    for name in [GaitName::Trot, GaitName::Bound] {
        let p = gait(name);
        for phase in interior_phases(&p) {
            assert_eq!(stance_count(&p, phase), 2, "{name} at {phase}");
        }
        assert_eq!(flight_fraction(&p), 0.0);
    }
}

#[test]
fn flight_gaits_spend_forty_percent_airborne() {
    for name in [GaitName::Run, GaitName::TrotRun] {
        let p = gait(name);
        assert!((flight_fraction(&p) - 0.4).abs() <= 1e-9, "{name}");
        assert!(interior_phases(&p).any(|phase| stance_count(&p, phase) == 0));
    }
    assert_eq!(stance_count(&gait(GaitName::Run), 0.1), 0);
    assert_eq!(flight_fraction(&gait(GaitName::Walk)), 0.0);
}

#[test]
fn canonical_stance_measure_is_four_beta() {
    for name in GaitName::ALL {
        let p = gait(name);
        let total: f64 = stance_measure(&p).iter().sum();
        assert_eq!(total, 4.0 * p.beta(), "{name}");
    }
}

#[test]
fn documented_contacts() {
    let trot = gait(GaitName::Trot);
    assert_eq!(leg_contact(&trot, 0.25, LegId::LF), ContactState::Swing(0.5));
    assert_eq!(leg_contact(&trot, 0.25, LegId::RF), ContactState::Stance);
    assert_eq!(stance_count(&trot, 0.1), 2);
    let walk = gait(GaitName::Walk);
    assert_eq!(walk.offsets().as_array(), [0.75, 0.25, 0.0, 0.5]);
}

#[test]
fn pattern_json_shape() {
    let text = serde_json::to_string(&gait(GaitName::Bound)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["beta"], 0.5);
    assert_eq!(v["offsets"]["RH"], 0.5);
    assert_eq!(v["period_s"], 0.4);
    let back: GaitPattern = serde_json::from_str(&text).unwrap();
    assert_eq!(back, gait(GaitName::Bound));
}

fn any_pattern() -> impl Strategy<Value = GaitPattern> {
    (0.05f64..0.95, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.1f64..2.0).prop_map(
        |(beta, rf, rh, lf, lh, period)| GaitPattern::new(beta, LegOffsets::new(rf, rh, lf, lh), period).unwrap(),
    )
}

proptest! {
    #[test]
    fn contact_is_periodic(p in any_pattern(), phase in 0.0f64..1.0, k in 1i32..4) {
        for leg in LegId::ALL {
            let since = (phase - p.offset(leg)).rem_euclid(1.0);
            // adding k may round across a lift-off or touchdown instant
            if since.min(1.0 - since) < 1e-9 || (since - (1.0 - p.beta())).abs() < 1e-9 {
                continue;
            }
            match (leg_contact(&p, phase, leg), leg_contact(&p, phase + k as f64, leg)) {
                (ContactState::Stance, ContactState::Stance) => {}
                (ContactState::Swing(a), ContactState::Swing(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn contact_matches_lift_off_rule(p in any_pattern(), phase in 0.0f64..1.0) {
        for leg in LegId::ALL {
            let c = leg_contact(&p, phase, leg);
            prop_assert_eq!(!c.is_stance(), swinging(&p, phase, leg));
            if let ContactState::Swing(s) = c {
                prop_assert!((0.0..1.0).contains(&s));
            }
        }
    }

    #[test]
    fn stance_measure_sums_to_four_beta(p in any_pattern()) {
        let m = stance_measure(&p);
        for leg in LegId::ALL {
            prop_assert_eq!(m[leg.index()], p.beta());
        }
        prop_assert!((m.iter().sum::<f64>() - 4.0 * p.beta()).abs() <= 1e-12);
    }

    #[test]
    fn flight_fraction_matches_sampling(p in any_pattern()) {
        let n = 20_000;
        let airborne = (0..n).filter(|&k| stance_count(&p, (k as f64 + 0.5) / n as f64) == 0).count();
        // each of at most eight event boundaries can flip one sample
        prop_assert!((flight_fraction(&p) - airborne as f64 / n as f64).abs() <= 8.0 / n as f64);
    }
}
