//! Decentralized CBF-QP collision avoidance. The ego optimizes its own action
//! together with copies of every other agent's action, with one robust
//! second-order barrier constraint per pair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::QpProblem;
use crate::error::{Error, Result};
use crate::model::{Action, AgentParams, VehicleState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbfParams {
    /// Barrier gain (1/s²).
    pub l0: f64,
    /// Barrier-rate gain (1/s).
    pub l1: f64,
    pub d_safe: f64,
    /// Clip the ego action to its bounds after solving.
    pub saturate: bool,
}

impl Default for CbfParams {
    /// Gains put both barrier poles on the real axis (at −1 and −2); the
    /// radius keeps a small margin above the 4 m collision threshold because
    /// the barrier is only enforced at sample instants.
    fn default() -> Self {
        Self {
            l0: 2.0,
            l1: 3.0,
            d_safe: 4.1,
            saturate: false,
        }
    }
}

impl CbfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0 && self.l1 > 0.0 && self.l0.is_finite() && self.l1.is_finite()) {
            return Err(Error::config("l0 and l1 must be positive"));
        }
        if !(self.d_safe > 0.0 && self.d_safe.is_finite()) {
            return Err(Error::config("d_safe must be positive"));
        }
        Ok(())
    }
}

/// Coefficients of `b + c·a_ego − c·a_j − c·ω̃_j ≥ 0` for one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbfRow {
    pub b: f64,
    pub c: [f64; 2],
}

impl CbfRow {
    pub fn slack(&self, ego: Action, other: Action, omega: Action) -> f64 {
        let d = ego - other - omega;
        self.b + self.c[0] * d.ax + self.c[1] * d.ay
    }
}

pub fn cbf_row(ego: &VehicleState, other: &VehicleState, params: &CbfParams) -> Result<CbfRow> {
    let x = [ego.x - other.x, ego.y - other.y];
    let v = [ego.vx - other.vx, ego.vy - other.vy];
    let xx = x[0] * x[0] + x[1] * x[1];
    if xx == 0.0 {
        return Err(Error::DegenerateGeometry("coincident vehicle positions".into()));
    }
    let vv = v[0] * v[0] + v[1] * v[1];
    let xv = x[0] * v[0] + x[1] * v[1];
    Ok(CbfRow {
        b: 2.0 * vv + 2.0 * params.l1 * xv + params.l0 * (xx - params.d_safe * params.d_safe),
        c: [2.0 * x[0], 2.0 * x[1]],
    })
}

/// Other agent as seen by the ego: state, last realized action and the
/// copy carried from the previous solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PccaNeighbor<'a> {
    pub state: VehicleState,
    pub params: &'a AgentParams,
    pub previous_action: Action,
    pub previous_copy: Action,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PccaOutput {
    /// Applied ego action (clipped when saturating).
    pub ego: Action,
    /// QP solution before any clipping.
    pub unclipped: Action,
    pub copies: Vec<Action>,
    pub rows: Vec<CbfRow>,
    pub omegas: Vec<Action>,
    pub infeasible: bool,
}

/// Builds and solves the pairwise CBF-QP over `(a_ego, a_1, …, a_m)` in 2D.
/// Lateral components of lateral-locked agents are zeroed afterwards.
pub fn pcca_solve(
    ego_state: &VehicleState,
    ego_params: &AgentParams,
    neighbors: &[PccaNeighbor<'_>],
    nominal: Action,
    params: &CbfParams,
) -> Result<PccaOutput> {
    params.validate()?;
    let m = neighbors.len();
    let n = 2 * (m + 1);
    let mut linear = DVector::zeros(n);
    linear[0] = -2.0 * nominal.ax;
    linear[1] = -2.0 * nominal.ay;
    let mut rows_mat = DMatrix::zeros(m, n);
    let mut rhs = DVector::zeros(m);
    let mut rows = Vec::with_capacity(m);
    let mut omegas = Vec::with_capacity(m);
    for (j, nb) in neighbors.iter().enumerate() {
        let row = cbf_row(ego_state, &nb.state, params)?;
        let omega = nb.previous_action - nb.previous_copy;
        // c·a_ego − c·a_j ≥ c·ω̃_j − b
        rows_mat[(j, 0)] = row.c[0];
        rows_mat[(j, 1)] = row.c[1];
        rows_mat[(j, 2 * (j + 1))] = -row.c[0];
        rows_mat[(j, 2 * (j + 1) + 1)] = -row.c[1];
        rhs[j] = row.c[0] * omega.ax + row.c[1] * omega.ay - row.b;
        rows.push(row);
        omegas.push(omega);
    }
    let qp = QpProblem {
        hessian: DMatrix::identity(n, n) * 2.0,
        linear,
        constraint_rows: rows_mat,
        constraint_rhs: rhs,
    };
    let solution = qp.solve()?;
    let infeasible = solution.is_none();
    let (unclipped, mut copies) = match solution {
        Some(s) => (
            Action::new(s.z[0], s.z[1]),
            (0..m)
                .map(|j| Action::new(s.z[2 * (j + 1)], s.z[2 * (j + 1) + 1]))
                .collect(),
        ),
        None => (ego_params.clamp_action(nominal), vec![Action::ZERO; m]),
    };
    for (copy, nb) in copies.iter_mut().zip(neighbors) {
        *copy = zero_lateral(*copy, nb.params);
    }
    let mut ego = zero_lateral(unclipped, ego_params);
    if params.saturate {
        ego = ego_params.clamp_action(ego);
    }
    Ok(PccaOutput {
        ego,
        unclipped,
        copies,
        rows,
        omegas,
        infeasible,
    })
}

fn zero_lateral(a: Action, params: &AgentParams) -> Action {
    if !params.lateral_locked {
        return a;
    }
    match params.longitudinal_axis {
        crate::model::Axis::X => Action::new(a.ax, 0.0),
        crate::model::Axis::Y => Action::new(0.0, a.ay),
    }
}
