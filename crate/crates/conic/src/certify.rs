use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::problem::{Cone, ConicProblem};
use crate::solver::ConicSolution;
use crate::svec::{smat, svec_len};

/// Outcome of independent re-checks on a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `‖A x − b‖_∞ ≤ tol·(1 + ‖b‖_∞)`
    pub equalities: bool,
    /// `‖G x + s − h‖_∞ ≤ tol·(1 + ‖h‖_∞)`
    pub cone_rows: bool,
    /// Every slack block in its cone up to `tol` (PSD relative to block norm).
    pub cone_membership: bool,
    /// `cᵀx` equals the reported objective up to `tol·(1 + |cᵀx|)`.
    pub objective: bool,
    pub max_equality_violation: f64,
    pub max_cone_row_violation: f64,
    pub min_cone_margin: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.equalities && self.cone_rows && self.cone_membership && self.objective
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Re-checks `sol` against `p` from the problem data alone: equality and
/// cone-row residuals of `(x, s)`, cone membership of `h − G x`, and the
/// reported objective.
pub fn certify_solution(p: &ConicProblem, sol: &ConicSolution, tol: f64) -> CertificateReport {
    certify_parts(p, &sol.x, Some(&sol.s), sol.objective_value, tol)
}

/// As [`certify_solution`] for a bare primal point; the slack is taken as
/// `h − G x`.
pub fn certify_point(p: &ConicProblem, x: &[f64], objective: f64, tol: f64) -> CertificateReport {
    certify_parts(p, x, None, objective, tol)
}

fn certify_parts(
    p: &ConicProblem,
    x: &[f64],
    slack: Option<&[f64]>,
    objective: f64,
    tol: f64,
) -> CertificateReport {
    if x.len() != p.c.len() || slack.is_some_and(|s| s.len() != p.h.len()) {
        return CertificateReport {
            equalities: false,
            cone_rows: false,
            cone_membership: false,
            objective: false,
            max_equality_violation: f64::INFINITY,
            max_cone_row_violation: f64::INFINITY,
            min_cone_margin: f64::NEG_INFINITY,
        };
    }
    let mut eq = p.a.mul(x);
    for (r, b) in eq.iter_mut().zip(&p.b) {
        *r -= b;
    }
    let max_eq = inf_norm(&eq);

    let gx = p.g.mul(x);
    let s: Vec<f64> = p.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let max_row = match slack {
        Some(rep) => inf_norm(&s.iter().zip(rep).map(|(a, b)| a - b).collect::<Vec<_>>()),
        None => 0.0,
    };

    let mut margin = f64::INFINITY;
    let mut member = true;
    let mut off = 0;
    for cone in &p.cones {
        match *cone {
            Cone::NonNeg { dim } => {
                for &v in &s[off..off + dim] {
                    margin = margin.min(v);
                    member &= v >= -tol;
                }
            }
            Cone::Psd { side } => {
                let m = smat(&s[off..off + svec_len(side)], side);
                let scale = m.norm().max(1.0);
                let mn = SymmetricEigen::new(m).eigenvalues.min();
                margin = margin.min(mn);
                member &= mn >= -tol * scale;
            }
        }
        off += cone.dim();
    }
    let cx: f64 = p.c.iter().zip(x).map(|(a, b)| a * b).sum();
    CertificateReport {
        equalities: max_eq <= tol * (1.0 + inf_norm(&p.b)),
        cone_rows: max_row <= tol * (1.0 + inf_norm(&p.h)),
        cone_membership: member,
        objective: (cx - objective).abs() <= tol * (1.0 + cx.abs()),
        max_equality_violation: max_eq,
        max_cone_row_violation: max_row,
        min_cone_margin: margin,
    }
}
