//! Ground reaction force distribution under a linearized friction cone.
//!
//! Forces minimize `Σ‖f_l‖²` subject to producing the desired wrench
//! exactly, staying inside a four-face friction pyramid with
//! `0 ≤ f_n ≤ f_max`, and vanishing on swing legs. When no force set can
//! produce the wrench (line contacts, flight, friction limits) the solver
//! falls back to the constrained least-squares wrench and reports the
//! residual.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::gait::LegId;
use crate::qp::{Constraint, Qp, QpStatus};

/// Force and moment about the centre of mass, world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self { force: Vector3::zeros(), moment: Vector3::zeros() }
    }

    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { force, moment }
    }

    fn to_dvector(self) -> DVector<f64> {
        DVector::from_iterator(6, self.force.iter().chain(self.moment.iter()).copied())
    }

    pub fn norm(&self) -> f64 {
        (self.force.norm_squared() + self.moment.norm_squared()).sqrt()
    }
}

/// Per-leg contact forces (world frame) with the foot positions they act at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactForceSet {
    pub forces: [Vector3<f64>; 4],
    pub positions: [Vector3<f64>; 4],
    pub stance: [bool; 4],
}

impl ContactForceSet {
    pub fn empty() -> Self {
        Self { forces: [Vector3::zeros(); 4], positions: [Vector3::zeros(); 4], stance: [false; 4] }
    }

    pub fn set(&mut self, leg: LegId, force: Vector3<f64>, position: Vector3<f64>) {
        let i = leg.index();
        self.forces[i] = force;
        self.positions[i] = position;
        self.stance[i] = true;
    }

    pub fn force(&self, leg: LegId) -> Vector3<f64> {
        self.forces[leg.index()]
    }

    pub fn total(&self) -> Vector3<f64> {
        self.forces.iter().sum()
    }
}

/// A stance foot available for support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub leg: LegId,
    pub position: Vector3<f64>,
    /// Unit terrain normal at the foot.
    pub normal: Vector3<f64>,
}

impl Contact {
    pub fn flat(leg: LegId, position: Vector3<f64>) -> Self {
        Self { leg, position, normal: Vector3::z() }
    }

    /// Orthonormal tangents spanning the contact plane.
    pub fn tangents(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let mut t1 = Vector3::x() - n * n.x;
        if t1.norm() < 1e-6 {
            t1 = Vector3::y() - n * n.y;
        }
        let t1 = t1.normalize();
        (t1, n.cross(&t1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForceStatus {
    /// The wrench is produced exactly.
    Feasible,
    /// No admissible force set produces the wrench; the forces are the
    /// constrained least-squares fit.
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceDistribution {
    pub forces: ContactForceSet,
    pub status: ForceStatus,
    /// `‖A f − w‖ / max(‖w‖, 1)`.
    pub residual: f64,
}

impl ForceDistribution {
    pub fn is_feasible(&self) -> bool {
        self.status == ForceStatus::Feasible
    }
}

/// Solver knobs for the least-squares fallback.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceSolverOptions {
    /// Weight on moment rows relative to force rows.
    pub moment_weight: f64,
    /// Tikhonov weight on `‖f‖²`.
    pub regularization: f64,
}

impl Default for ForceSolverOptions {
    fn default() -> Self {
        Self { moment_weight: 4.0, regularization: 1e-4 }
    }
}

/// Wrench map `A` with `A f = (Σ f, Σ f × (r − p))`.
pub fn wrench_matrix(contacts: &[Contact], com: &Vector3<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 3 * contacts.len());
    for (k, c) in contacts.iter().enumerate() {
        let d = com - c.position;
        for i in 0..3 {
            a[(i, 3 * k + i)] = 1.0;
        }
        // f × d = −[d]× f
        let skew = -d.cross_matrix();
        a.view_mut((3, 3 * k), (3, 3)).copy_from(&skew);
    }
    a
}

/// Friction-pyramid and normal-bound constraints as `nᵀ f ≥ b` rows.
pub fn cone_constraints(contacts: &[Contact], mu: f64, f_max: f64) -> Vec<Constraint> {
    let dim = 3 * contacts.len();
    let mut rows = Vec::with_capacity(5 * contacts.len());
    for (k, c) in contacts.iter().enumerate() {
        let (t1, t2) = c.tangents();
        let n = c.normal;
        let mut push = |v: Vector3<f64>, b: f64| {
            let mut row = DVector::zeros(dim);
            row.rows_mut(3 * k, 3).copy_from(&v);
            rows.push(Constraint { normal: row, bound: b });
        };
        push(mu * n - t1, 0.0);
        push(mu * n + t1, 0.0);
        push(mu * n - t2, 0.0);
        push(mu * n + t2, 0.0);
        push(-n, -f_max);
    }
    rows
}

/// Largest violation of the pyramid or normal bounds by `forces` (N).
pub fn cone_violation(forces: &ContactForceSet, contacts: &[Contact], mu: f64, f_max: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in contacts {
        let f = forces.force(c.leg);
        let (t1, t2) = c.tangents();
        let fn_ = f.dot(&c.normal);
        worst = worst
            .max(f.dot(&t1).abs() - mu * fn_)
            .max(f.dot(&t2).abs() - mu * fn_)
            .max(-fn_)
            .max(fn_ - f_max);
    }
    worst
}

pub fn distribute_forces(
    wrench: &Wrench,
    contacts: &[Contact],
    com: &Vector3<f64>,
    mu: f64,
    f_max: f64,
) -> ForceDistribution {
    distribute_forces_with(wrench, contacts, com, mu, f_max, &ForceSolverOptions::default())
}

pub fn distribute_forces_with(
    wrench: &Wrench,
    contacts: &[Contact],
    com: &Vector3<f64>,
    mu: f64,
    f_max: f64,
    options: &ForceSolverOptions,
) -> ForceDistribution {
    let w = wrench.to_dvector();
    let scale = wrench.norm().max(1.0);
    let mut out = ContactForceSet::empty();
    for c in contacts {
        out.set(c.leg, Vector3::zeros(), c.position);
    }
    if contacts.is_empty() {
        let residual = wrench.norm() / scale;
        let status = if wrench.norm() == 0.0 { ForceStatus::Feasible } else { ForceStatus::Infeasible };
        return ForceDistribution { forces: out, status, residual };
    }

    let dim = 3 * contacts.len();
    let a = wrench_matrix(contacts, com);
    let cones = cone_constraints(contacts, mu, f_max);

    let strict = Qp {
        hessian: DMatrix::identity(dim, dim),
        linear: DVector::zeros(dim),
        equalities: (0..6)
            .map(|i| Constraint { normal: a.row(i).transpose(), bound: w[i] })
            .collect(),
        inequalities: cones.clone(),
    };
    let sol = strict.solve();
    let mut status = ForceStatus::Feasible;
    let mut x = sol.x;
    let accepted = sol.status == QpStatus::Optimal && (&a * &x - &w).norm() / scale <= 1e-9;
    if !accepted {
        status = ForceStatus::Infeasible;
        let mut weights = DVector::from_element(6, 1.0);
        weights.rows_mut(3, 3).fill(options.moment_weight * options.moment_weight);
        let aw = DMatrix::from_diagonal(&weights);
        let at_w = a.transpose() * aw;
        let fallback = Qp {
            hessian: &at_w * &a + DMatrix::identity(dim, dim) * options.regularization,
            linear: -(at_w * &w),
            equalities: vec![],
            inequalities: cones,
        };
        let sol = fallback.solve();
        x = if sol.status == QpStatus::Infeasible { DVector::zeros(dim) } else { sol.x };
    }
    for (k, c) in contacts.iter().enumerate() {
        out.forces[c.leg.index()] = Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
    }
    let residual = (&a * &x - &w).norm() / scale;
    ForceDistribution { forces: out, status, residual }
}
