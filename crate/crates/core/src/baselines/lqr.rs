//! Per-axis discrete LQR for the double integrator `x' = x + v·dt`, `v' = v + a·dt`.

use nalgebra::{Matrix2, Vector2};

use crate::model::{Action, AgentParams, VehicleState};

/// Control-effort weight of the nominal regulator.
pub const LQR_INPUT_WEIGHT: f64 = 1.0;

const SDA_MAX_ITER: usize = 64;
const SDA_TOL: f64 = 1e-14;

/// State feedback `a = −kp·(x − x_d) − kv·(v − v_d)` together with the Riccati solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisGains {
    pub kp: f64,
    pub kv: f64,
    pub riccati: Matrix2<f64>,
}

pub fn double_integrator(dt: f64) -> (Matrix2<f64>, Vector2<f64>) {
    (Matrix2::new(1.0, dt, 0.0, 1.0), Vector2::new(0.0, dt))
}

/// Infinite-horizon gains for one axis. `q_pos = 0` means velocity regulation only.
pub fn axis_gains(q_pos: f64, q_vel: f64, r: f64, dt: f64) -> AxisGains {
    if q_pos <= 0.0 {
        // Scalar DARE for v' = v + dt·a: dt²·p² − q·dt²·p − q·r = 0.
        let d2 = dt * dt;
        let p = (q_vel * d2 + (q_vel * q_vel * d2 * d2 + 4.0 * d2 * q_vel * r).sqrt()) / (2.0 * d2);
        let kv = dt * p / (r + d2 * p);
        return AxisGains {
            kp: 0.0,
            kv,
            riccati: Matrix2::new(0.0, 0.0, 0.0, p),
        };
    }
    let (a, b) = double_integrator(dt);
    let q = Matrix2::new(q_pos, 0.0, 0.0, q_vel);
    let p = solve_dare_doubling(&a, &b, &q, r);
    let gain = (b.transpose() * p * a) / (r + (b.transpose() * p * b)[(0, 0)]);
    AxisGains {
        kp: gain[(0, 0)],
        kv: gain[(0, 1)],
        riccati: p,
    }
}

/// Structured doubling iteration for `P = AᵀPA − AᵀPB(r + BᵀPB)⁻¹BᵀPA + Q`.
fn solve_dare_doubling(a: &Matrix2<f64>, b: &Vector2<f64>, q: &Matrix2<f64>, r: f64) -> Matrix2<f64> {
    let mut ak = *a;
    let mut gk = b * b.transpose() / r;
    let mut hk = *q;
    for _ in 0..SDA_MAX_ITER {
        let Some(w) = (Matrix2::identity() + gk * hk).try_inverse() else {
            break;
        };
        let a_next = ak * w * ak;
        let g_next = gk + ak * w * gk * ak.transpose();
        let h_next = hk + ak.transpose() * hk * w * ak;
        let delta = (h_next - hk).abs().max();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if delta <= SDA_TOL * hk.abs().max().max(1.0) {
            break;
        }
    }
    hk
}

/// Residual of the DARE for a candidate `P`.
pub fn dare_residual(p: &Matrix2<f64>, q_pos: f64, q_vel: f64, r: f64, dt: f64) -> f64 {
    let (a, b) = double_integrator(dt);
    let q = Matrix2::new(q_pos, 0.0, 0.0, q_vel);
    let s = r + (b.transpose() * p * b)[(0, 0)];
    let rhs = a.transpose() * p * a - (a.transpose() * p * b) * (b.transpose() * p * a) / s + q;
    (rhs - p).abs().max()
}

/// Nominal regulator toward the agent's desired state, evaluated per axis.
pub fn nominal_controller(state: &VehicleState, params: &AgentParams, dt: f64) -> Action {
    let pos = state.position();
    let vel = state.velocity();
    let mut out = [0.0; 2];
    for axis in 0..2 {
        let target_pos = params
            .desired_position
            .map(|p| p[axis])
            .filter(|_| params.q_weights[axis] > 0.0);
        let g = axis_gains(
            target_pos.map_or(0.0, |_| params.q_weights[axis]),
            params.r_weights[axis],
            LQR_INPUT_WEIGHT,
            dt,
        );
        let pos_err = target_pos.map_or(0.0, |xd| pos[axis] - xd);
        out[axis] = -g.kp * pos_err - g.kv * (vel[axis] - params.desired_velocity[axis]);
    }
    let mut a = Action::new(out[0], out[1]);
    if params.lateral_locked {
        match params.longitudinal_axis {
            crate::model::Axis::X => a.ay = 0.0,
            crate::model::Axis::Y => a.ax = 0.0,
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Axis, Bounds};

    /// Plain Riccati recursion from P = Q, run to a fixed point.
    fn riccati_by_iteration(q_pos: f64, q_vel: f64, r: f64, dt: f64) -> Matrix2<f64> {
        let (a, b) = double_integrator(dt);
        let q = Matrix2::new(q_pos, 0.0, 0.0, q_vel);
        let mut p = q;
        for _ in 0..200_000 {
            let s = r + (b.transpose() * p * b)[(0, 0)];
            let next = a.transpose() * p * a - (a.transpose() * p * b) * (b.transpose() * p * a) / s + q;
            if (next - p).abs().max() < 1e-13 {
                return next;
            }
            p = next;
        }
        p
    }

    fn driver(q: [f64; 2], pos: Option<[f64; 2]>) -> AgentParams {
        AgentParams {
            theta: 1.0,
            q_weights: q,
            r_weights: [1.0, 1.0],
            desired_position: pos,
            desired_velocity: [0.0, 5.0],
            action_bounds: [Bounds::symmetric(3.0); 2],
            longitudinal_axis: Axis::Y,
            lateral_locked: false,
        }
    }

    #[test]
    fn doubling_matches_iteration_and_satisfies_dare() {
        for &(qp, qv, r, dt) in &[(1.0, 1.0, 1.0, 0.5), (4.0, 0.5, 2.0, 0.1), (0.3, 2.0, 0.7, 1.0)] {
            let g = axis_gains(qp, qv, r, dt);
            let oracle = riccati_by_iteration(qp, qv, r, dt);
            assert!((g.riccati - oracle).abs().max() < 1e-8, "{qp} {qv} {r} {dt}");
            assert!(dare_residual(&g.riccati, qp, qv, r, dt) < 1e-8);
            assert!(g.kp > 0.0 && g.kv > 0.0);
        }
    }

    #[test]
    fn velocity_only_axis_satisfies_dare() {
        let g = axis_gains(0.0, 1.0, 1.0, 0.5);
        assert_eq!(g.kp, 0.0);
        assert!(dare_residual(&g.riccati, 0.0, 1.0, 1.0, 0.5) < 1e-8);
        let oracle = riccati_by_iteration(0.0, 1.0, 1.0, 0.5);
        assert!((g.riccati - oracle).abs().max() < 1e-8);
    }

    #[test]
    fn equilibrium_gives_zero_action() {
        let p = driver([1.0, 0.0], Some([0.0, 0.0]));
        let a = nominal_controller(&VehicleState::new(0.0, 12.0, 0.0, 5.0), &p, 0.5);
        assert_eq!(a, Action::ZERO);
    }

    #[test]
    fn slow_vehicle_accelerates_in_proportion() {
        let p = driver([0.0, 0.0], None);
        let a1 = nominal_controller(&VehicleState::new(0.0, 0.0, 0.0, 4.0), &p, 0.5);
        let a2 = nominal_controller(&VehicleState::new(0.0, 0.0, 0.0, 3.0), &p, 0.5);
        assert!(a1.ay > 0.0);
        assert!((a2.ay - 2.0 * a1.ay).abs() < 1e-12);
        assert_eq!(a1.ax, 0.0);
    }

    #[test]
    fn lateral_offset_pulls_back_to_lane() {
        let p = driver([1.0, 0.0], Some([0.0, 0.0]));
        let a = nominal_controller(&VehicleState::new(1.5, 0.0, 0.0, 5.0), &p, 0.5);
        assert!(a.ax < 0.0);
        assert_eq!(a.ay, 0.0);
    }
}
