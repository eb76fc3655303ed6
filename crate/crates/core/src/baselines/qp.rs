//! Small dense QP, `min ½zᵀHz + fᵀz  s.t.  Gz ≥ h`, solved exactly by
//! enumerating active sets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Enumeration is exponential in the number of rows.
pub const MAX_QP_CONSTRAINTS: usize = 12;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    /// One row per inequality `g·z ≥ h`.
    pub constraint_rows: DMatrix<f64>,
    pub constraint_rhs: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub objective: f64,
    /// Bit k set when row k is treated as active.
    pub active_set: u32,
}

impl QpProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.hessian.nrows();
        if self.hessian.ncols() != n || self.linear.len() != n {
            return Err(Error::config("hessian and linear term dimensions disagree"));
        }
        if self.constraint_rows.ncols() != n || self.constraint_rows.nrows() != self.constraint_rhs.len() {
            return Err(Error::config("constraint dimensions disagree"));
        }
        if self.constraint_rows.nrows() > MAX_QP_CONSTRAINTS {
            return Err(Error::config(format!(
                "{} constraints exceed the enumeration limit {MAX_QP_CONSTRAINTS}",
                self.constraint_rows.nrows()
            )));
        }
        if self.hessian.iter().chain(self.linear.iter()).any(|v| !v.is_finite())
            || self
                .constraint_rows
                .iter()
                .chain(self.constraint_rhs.iter())
                .any(|v| !v.is_finite())
        {
            return Err(Error::config("QP data must be finite"));
        }
        if (&self.hessian - self.hessian.transpose()).abs().max() > 1e-12 * (1.0 + self.hessian.abs().max()) {
            return Err(Error::config("hessian must be symmetric"));
        }
        if self.hessian.clone().cholesky().is_none() {
            return Err(Error::config("hessian must be positive definite"));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.linear.dot(z)
    }

    /// Smallest slack `g·z − h` over all rows (`+∞` without constraints).
    pub fn min_slack(&self, z: &DVector<f64>) -> f64 {
        let slack = &self.constraint_rows * z - &self.constraint_rhs;
        slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Returns `None` when no active set yields a feasible KKT point.
    pub fn solve(&self) -> Result<Option<QpSolution>> {
        self.validate()?;
        let n = self.hessian.nrows();
        let m = self.constraint_rows.nrows();
        let mut best: Option<QpSolution> = None;
        for mask in 0u32..(1u32 << m) {
            let active: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
            let Some((z, lambda_active)) = self.kkt_point(&active, n) else {
                continue;
            };
            if lambda_active.iter().any(|l| *l < -FEAS_TOL) {
                continue;
            }
            let scale = 1.0 + self.constraint_rhs.abs().max();
            if self.min_slack(&z) < -FEAS_TOL * scale {
                continue;
            }
            let objective = self.objective(&z);
            if best
                .as_ref()
                .is_none_or(|b| objective < b.objective - 1e-14 * (1.0 + objective.abs()))
            {
                let mut multipliers = DVector::zeros(m);
                for (slot, &k) in active.iter().enumerate() {
                    multipliers[k] = lambda_active[slot].max(0.0);
                }
                best = Some(QpSolution {
                    z,
                    multipliers,
                    objective,
                    active_set: mask,
                });
            }
        }
        Ok(best)
    }

    /// Solves `[H −Gₐᵀ; Gₐ 0][z; λ] = [−f; hₐ]`.
    fn kkt_point(&self, active: &[usize], n: usize) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.hessian);
        for i in 0..n {
            rhs[i] = -self.linear[i];
        }
        for (slot, &row) in active.iter().enumerate() {
            for j in 0..n {
                let g = self.constraint_rows[(row, j)];
                kkt[(j, n + slot)] = -g;
                kkt[(n + slot, j)] = g;
            }
            rhs[n + slot] = self.constraint_rhs[row];
        }
        let lu = kkt.lu();
        if k > 0 {
            // Linearly dependent active rows give a singular system.
            let det = lu.determinant();
            if !det.is_finite() || det.abs() < 1e-12 {
                return None;
            }
        }
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projection_problem(z0: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> QpProblem {
        let n = z0.len();
        QpProblem {
            hessian: DMatrix::identity(n, n) * 2.0,
            linear: DVector::from_iterator(n, z0.iter().map(|v| -2.0 * v)),
            constraint_rows: DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]),
            constraint_rhs: DVector::from_row_slice(rhs),
        }
    }

    #[test]
    fn unconstrained_minimum() {
        let p = projection_problem(&[1.0, -2.0], &[], &[]);
        let s = p.solve().unwrap().unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] + 2.0).abs() < 1e-12);
        assert_eq!(s.active_set, 0);
    }

    #[test]
    fn half_space_projection() {
        // z ≥ 1 in the first coordinate, start at 0
        let p = projection_problem(&[0.0, 3.0], &[vec![1.0, 0.0]], &[1.0]);
        let s = p.solve().unwrap().unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-12);
        assert!((s.z[1] - 3.0).abs() < 1e-12);
        assert!((s.multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_active_rows() {
        let p = projection_problem(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 2.0]);
        let s = p.solve().unwrap().unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.active_set, 0b11);
    }

    #[test]
    fn infeasible_returns_none() {
        let p = projection_problem(&[0.0], &[vec![1.0], vec![-1.0]], &[1.0, 0.0]);
        assert_eq!(p.solve().unwrap(), None);
    }

    #[test]
    fn duplicate_rows_are_handled() {
        let p = projection_problem(&[0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 1.0]], &[2.0, 2.0]);
        let s = p.solve().unwrap().unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-10 && (s.z[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let mut p = projection_problem(&[0.0, 0.0], &[], &[]);
        p.hessian[(1, 1)] = -1.0;
        assert!(p.solve().unwrap_err().is_configuration());
    }
}
