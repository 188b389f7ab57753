//! Small dense strictly-convex QP solver (dual active set, Goldfarb-Idnani).
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀ G x + aᵀ x
//! subject to  nᵢᵀ x  = bᵢ   (equalities)
//!             nⱼᵀ x >= bⱼ   (inequalities)
//! ```
//!
//! starting from the unconstrained minimizer and adding violated constraints
//! one at a time. Problems here have at most a dozen variables, so the
//! projections are recomputed densely at every step.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct Constraint {
    pub normal: DVector<f64>,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum QpStatus {
    Optimal,
    /// Equalities inconsistent or inequalities unsatisfiable.
    Infeasible,
    /// Iteration cap hit; the returned point is the last iterate.
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

pub struct Qp {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
}

const MAX_ITER: usize = 500;

struct ActiveSet {
    /// Constraint indices; equalities are `0..neq`, inequalities follow.
    idx: Vec<usize>,
    mult: Vec<f64>,
}

impl Qp {
    fn normal(&self, i: usize) -> &DVector<f64> {
        let neq = self.equalities.len();
        if i < neq {
            &self.equalities[i].normal
        } else {
            &self.inequalities[i - neq].normal
        }
    }

    fn bound(&self, i: usize) -> f64 {
        let neq = self.equalities.len();
        if i < neq {
            self.equalities[i].bound
        } else {
            self.inequalities[i - neq].bound
        }
    }

    /// Primal step direction `z` and multiplier change `r` for adding normal
    /// `np` to the active set.
    fn directions(
        &self,
        g_inv: &DMatrix<f64>,
        active: &ActiveSet,
        np: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let q = active.idx.len();
        let ginv_np = g_inv * np;
        if q == 0 {
            return Some((ginv_np, DVector::zeros(0)));
        }
        let n = self.hessian.nrows();
        let mut nmat = DMatrix::zeros(n, q);
        for (c, &i) in active.idx.iter().enumerate() {
            nmat.set_column(c, self.normal(i));
        }
        let ginv_n = g_inv * &nmat;
        let m = nmat.transpose() * &ginv_n;
        let rhs = nmat.transpose() * &ginv_np;
        let r = m.lu().solve(&rhs)?;
        let z = ginv_np - ginv_n * &r;
        Some((z, r))
    }

    pub fn solve(&self) -> QpSolution {
        let n = self.hessian.nrows();
        let neq = self.equalities.len();
        let g_inv = match self.hessian.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => {
                return QpSolution { x: DVector::zeros(n), status: QpStatus::Infeasible, iterations: 0 }
            }
        };
        let mut x = -(&g_inv * &self.linear);
        let mut active = ActiveSet { idx: Vec::new(), mult: Vec::new() };
        let mut iterations = 0;

        let scale = 1.0 + self.linear.amax();
        let feas_tol = 1e-11 * scale.max(self.max_bound());
        let step_tol = 1e-14;

        for i in 0..neq {
            iterations += 1;
            let np = self.normal(i).clone();
            let s = np.dot(&x) - self.bound(i);
            let Some((z, r)) = self.directions(&g_inv, &active, &np) else {
                return QpSolution { x, status: QpStatus::Infeasible, iterations };
            };
            let zn = z.dot(&np);
            if zn <= step_tol * np.norm_squared().max(1.0) {
                // dependent on the active normals: must already hold
                if s.abs() > feas_tol {
                    return QpSolution { x, status: QpStatus::Infeasible, iterations };
                }
                continue;
            }
            let t = -s / zn;
            x += t * &z;
            for (u, ri) in active.mult.iter_mut().zip(r.iter()) {
                *u -= t * ri;
            }
            active.idx.push(i);
            active.mult.push(t);
        }

        loop {
            if iterations >= MAX_ITER {
                return QpSolution { x, status: QpStatus::MaxIterations, iterations };
            }
            // most violated inactive inequality
            let mut worst: Option<(usize, f64)> = None;
            for j in 0..self.inequalities.len() {
                let i = neq + j;
                if active.idx.contains(&i) {
                    continue;
                }
                let c = &self.inequalities[j];
                let s = (c.normal.dot(&x) - c.bound) / c.normal.norm().max(1e-300);
                if s < -feas_tol && worst.is_none_or(|(_, w)| s < w) {
                    worst = Some((i, s));
                }
            }
            let Some((p, _)) = worst else {
                return QpSolution { x, status: QpStatus::Optimal, iterations };
            };
            let np = self.normal(p).clone();
            let mut u_p = 0.0;

            loop {
                iterations += 1;
                if iterations >= MAX_ITER {
                    return QpSolution { x, status: QpStatus::MaxIterations, iterations };
                }
                let s_p = np.dot(&x) - self.bound(p);
                let Some((z, r)) = self.directions(&g_inv, &active, &np) else {
                    return QpSolution { x, status: QpStatus::Infeasible, iterations };
                };

                // largest dual step keeping active inequality multipliers >= 0
                let mut blocking: Option<(usize, f64)> = None;
                for (k, (&ci, &rk)) in active.idx.iter().zip(r.iter()).enumerate() {
                    if ci >= neq && rk > 0.0 {
                        let ratio = active.mult[k] / rk;
                        if blocking.is_none_or(|(_, b)| ratio < b) {
                            blocking = Some((k, ratio));
                        }
                    }
                }

                let zn = z.dot(&np);
                let full = if zn > step_tol * np.norm_squared().max(1.0) { Some(-s_p / zn) } else { None };

                let (t, add) = match (full, blocking) {
                    (None, None) => return QpSolution { x, status: QpStatus::Infeasible, iterations },
                    (None, Some((_, tb))) => (tb, false),
                    (Some(tf), None) => (tf, true),
                    (Some(tf), Some((_, tb))) => {
                        if tf <= tb {
                            (tf, true)
                        } else {
                            (tb, false)
                        }
                    }
                };

                if full.is_some() {
                    x += t * &z;
                }
                for (u, ri) in active.mult.iter_mut().zip(r.iter()) {
                    *u -= t * ri;
                }
                u_p += t;

                if add {
                    active.idx.push(p);
                    active.mult.push(u_p);
                    break;
                }
                let (k, _) = blocking.expect("partial step needs a blocking constraint");
                active.idx.remove(k);
                active.mult.remove(k);
            }
        }
    }

    fn max_bound(&self) -> f64 {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .map(|c| c.bound.abs())
            .fold(1.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(normal: &[f64], bound: f64) -> Constraint {
        Constraint { normal: DVector::from_row_slice(normal), bound }
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = Qp {
            hessian: DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 4.0])),
            linear: DVector::from_row_slice(&[-2.0, -4.0]),
            equalities: vec![],
            inequalities: vec![],
        };
        let sol = qp.solve();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_onto_halfspace_and_line() {
        // min ½|x|² s.t. x0 + x1 = 2, x0 >= 1.5
        let qp = Qp {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::zeros(2),
            equalities: vec![c(&[1.0, 1.0], 2.0)],
            inequalities: vec![c(&[1.0, 0.0], 1.5)],
        };
        let sol = qp.solve();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.5).abs() < 1e-12 && (sol.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let qp = Qp {
            hessian: DMatrix::identity(1, 1),
            linear: DVector::zeros(1),
            equalities: vec![],
            inequalities: vec![c(&[1.0], 1.0), c(&[-1.0], 0.0)],
        };
        assert_eq!(qp.solve().status, QpStatus::Infeasible);

        let qp = Qp {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::zeros(2),
            equalities: vec![c(&[1.0, 1.0], 1.0), c(&[2.0, 2.0], 3.0)],
            inequalities: vec![],
        };
        assert_eq!(qp.solve().status, QpStatus::Infeasible);
    }

    #[test]
    fn redundant_equalities_are_accepted() {
        let qp = Qp {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::zeros(2),
            equalities: vec![c(&[1.0, 1.0], 1.0), c(&[2.0, 2.0], 2.0)],
            inequalities: vec![],
        };
        let sol = qp.solve();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_constrained_matches_clipping() {
        // separable: min ½|x - t|² over x in [0, 1]^3
        let target = [1.7, -0.3, 0.4];
        let mut ineq = Vec::new();
        for i in 0..3 {
            let mut lo = [0.0; 3];
            lo[i] = 1.0;
            ineq.push(c(&lo, 0.0));
            let mut hi = [0.0; 3];
            hi[i] = -1.0;
            ineq.push(c(&hi, -1.0));
        }
        let qp = Qp {
            hessian: DMatrix::identity(3, 3),
            linear: -DVector::from_row_slice(&target),
            equalities: vec![],
            inequalities: ineq,
        };
        let sol = qp.solve();
        assert_eq!(sol.status, QpStatus::Optimal);
        for (x, t) in sol.x.iter().zip(target) {
            assert!((x - t.clamp(0.0, 1.0)).abs() < 1e-12);
        }
    }
}
