//! Comparison controllers: an LQR nominal law and the pairwise CBF-QP filter.

pub mod lqr;
pub mod pcca;
pub mod qp;

pub use lqr::nominal_controller;
pub use pcca::{cbf_row, pcca_solve, CbfParams, CbfRow, PccaNeighbor, PccaOutput};
pub use qp::{QpProblem, QpSolution};
