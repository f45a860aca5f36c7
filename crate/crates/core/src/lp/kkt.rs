//! Independent optimality check: recomputes reduced costs from the row duals
//! and measures primal feasibility, dual feasibility and complementarity.

use serde::Serialize;

use super::{LinearProgram, LpSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Dual residual: a reduced cost that is positive must sit at a finite lower
/// bound, a negative one at a finite upper bound. The mismatch (distance to the
/// bound times the reduced cost) is the complementarity residual; a reduced
/// cost of the wrong sign with an infinite bound is a dual infeasibility.
pub fn check_kkt(lp: &LinearProgram, sol: &LpSolution) -> KktReport {
    let x = &sol.x;
    let mut primal: f64 = 0.0;
    if lp.num_eq() > 0 {
        let r = &lp.eq_matrix * x - &lp.eq_rhs;
        primal = primal.max(r.amax());
    }
    if lp.num_ineq() > 0 {
        let r = &lp.ineq_matrix * x - &lp.ineq_rhs;
        primal = primal.max(r.max().max(0.0));
    }
    for j in 0..lp.num_vars() {
        primal = primal.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
    }

    let mut d = lp.objective.clone();
    if lp.num_eq() > 0 {
        d -= lp.eq_matrix.tr_mul(&sol.eq_duals);
    }
    if lp.num_ineq() > 0 {
        d -= lp.ineq_matrix.tr_mul(&sol.ineq_duals);
    }

    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for (i, &y) in sol.ineq_duals.iter().enumerate() {
        dual = dual.max(y);
        let slack = lp.ineq_rhs[i] - lp.ineq_matrix.row(i).dot(&x.transpose());
        comp = comp.max((y * slack).abs());
    }
    for j in 0..lp.num_vars() {
        let dj = d[j];
        if dj > 0.0 {
            if lp.lower[j].is_finite() {
                comp = comp.max(dj * (x[j] - lp.lower[j]).abs());
            } else {
                dual = dual.max(dj);
            }
        } else if dj < 0.0 {
            if lp.upper[j].is_finite() {
                comp = comp.max(-dj * (lp.upper[j] - x[j]).abs());
            } else {
                dual = dual.max(-dj);
            }
        }
    }
    KktReport {
        primal_residual: primal,
        dual_residual: dual,
        complementarity: comp,
    }
}
