//! Oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use quadgait::gait::wrap_phase;
use quadgait::sim::{Contact, ContactForceSet, Wrench};
use quadgait::{GaitName, LegId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Transition time used throughout the suites, s.
pub const T_S: f64 = 0.5;

/// The transition-order table: row = current state, column = event target,
/// entries as printed.
pub const ORDER_TABLE: [[&str; 5]; 5] = [
    ["a00", "a01", "a01,a12", "a01,a12,a23", "a01,a14"],
    ["a10", "a11", "a12", "a12,a23", "a14"],
    ["a21,a10", "a21", "a22", "a23", "a21,a14"],
    ["a32,a21,a10", "a32,a21", "a32", "a33", "a32,a21,a14"],
    ["a41,a10", "a41", "a41,a12", "a41,a12,a23", "a44"],
];

/// Closed-form schedules written out per action.
pub fn expected(from: GaitName, to: GaitName, t: f64) -> (f64, f64, f64) {
    use GaitName::*;
    match (from, to) {
        (Trot, Walk) => {
            let b = 0.5 + t / (4.0 * T_S);
            (b, b, wrap_phase(b + 0.5))
        }
        (Walk, Trot) => {
            let b = 0.75 - t / (4.0 * T_S);
            (b, b, wrap_phase(b - 0.5))
        }
        (Trot, Bound) => (0.5, 0.5 - t / (2.0 * T_S), t / (2.0 * T_S)),
        (Bound, Trot) => (0.5, t / (2.0 * T_S), 0.5 - t / (2.0 * T_S)),
        (Trot, TrotRun) => (0.5 - t / (5.0 * T_S), 0.5, 0.0),
        (TrotRun, Trot) => (0.3 + t / (5.0 * T_S), 0.5, 0.0),
        (Bound, Run) => (0.5 - t / (5.0 * T_S), 0.0, 0.5),
        (Run, Bound) => (0.3 + t / (5.0 * T_S), 0.0, 0.5),
        _ => unreachable!(),
    }
}

pub fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

pub const MU: f64 = 0.7;
pub const F_MAX: f64 = 2.0 * 12.0 * 9.81;

/// Random force strictly inside the pyramid `|f_t| ≤ μ f_n`, `f_n ≤ f_max`.
pub fn in_cone_force(rng: &mut ChaCha8Rng, c: &Contact) -> Vector3<f64> {
    let (t1, t2) = c.tangents();
    let fn_ = rng.random_range(5.0..60.0);
    let a = rng.random_range(-0.9..0.9) * MU * fn_;
    let b = rng.random_range(-0.9..0.9) * MU * fn_;
    c.normal * fn_ + t1 * a + t2 * b
}

pub fn random_contacts(rng: &mut ChaCha8Rng, count: usize) -> Vec<Contact> {
    let mut legs = LegId::ALL.to_vec();
    while legs.len() > count {
        legs.remove(rng.random_range(0..legs.len()));
    }
    let incline: f64 = rng.random_range(-0.3..0.3);
    let normal = Vector3::new(-incline.sin(), 0.0, incline.cos());
    legs.into_iter()
        .map(|leg| {
            let side = if matches!(leg, LegId::LF | LegId::LH) { 1.0 } else { -1.0 };
            let fore = if matches!(leg, LegId::RF | LegId::LF) { 1.0 } else { -1.0 };
            let x = fore * 0.19 + rng.random_range(-0.08..0.08);
            let position = Vector3::new(x, side * 0.21 + rng.random_range(-0.05..0.05), x * incline.tan());
            Contact { leg, position, normal }
        })
        .collect()
}

/// Net force and moment about `com`, written out leg by leg.
pub fn newton_euler(forces: &ContactForceSet, com: &Vector3<f64>) -> Wrench {
    let mut w = Wrench::zero();
    for leg in LegId::ALL {
        let f = forces.force(leg);
        w.force += f;
        w.moment += (forces.positions[leg.index()] - com).cross(&f);
    }
    w
}

pub fn random_com(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.03..0.03), rng.random_range(0.25..0.35))
}

pub fn stacked(contacts: &[Contact], com: &Vector3<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 3 * contacts.len());
    for (k, c) in contacts.iter().enumerate() {
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = 1.0;
            a[(i, 3 * k + i)] = 1.0;
            let m = (c.position - com).cross(&e);
            for r in 0..3 {
                a[(3 + r, 3 * k + i)] = m[r];
            }
        }
    }
    a
}

pub fn admissible(x: &DVector<f64>, contacts: &[Contact]) -> bool {
    contacts.iter().enumerate().all(|(k, c)| {
        let f = Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        let (t1, t2) = c.tangents();
        let fn_ = f.dot(&c.normal);
        (0.0..=F_MAX).contains(&fn_) && f.dot(&t1).abs() <= MU * fn_ && f.dot(&t2).abs() <= MU * fn_
    })
}

/// Minimum-norm admissible force found by shrinking random search over the
/// nullspace of the wrench map, starting from a known admissible point.
pub fn search_oracle(contacts: &[Contact], com: &Vector3<f64>, start: &DVector<f64>, rng: &mut ChaCha8Rng) -> f64 {
    // zero-padded to square so the decomposition returns a full basis
    let dim = 3 * contacts.len();
    let mut a = DMatrix::zeros(dim, dim);
    a.rows_mut(0, 6).copy_from(&stacked(contacts, com));
    let svd = a.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let null: Vec<DVector<f64>> =
        (0..dim).filter(|&i| svd.singular_values[i] < 1e-9).map(|i| v_t.row(i).transpose()).collect();
    assert_eq!(null.len(), dim - 6);
    let mut best = start.clone();
    let mut best_cost = best.norm_squared();
    let mut radius = best.norm();
    let mut misses = 0;
    let mut budget = 200_000;
    while radius > 1e-9 && budget > 0 {
        budget -= 1;
        let mut cand = best.clone();
        for n in &null {
            cand += n * (rng.random_range(-1.0..1.0) * radius);
        }
        if admissible(&cand, contacts) && cand.norm_squared() < best_cost {
            best_cost = cand.norm_squared();
            best = cand;
            radius *= 2.0;
            misses = 0;
        } else {
            misses += 1;
            if misses == 60 {
                radius *= 0.5;
                misses = 0;
            }
        }
    }
    best_cost
}

