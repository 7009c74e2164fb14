//! Concrete problem instances.

mod quadratic;
mod soss;
mod toy;

pub use quadratic::{make_quadratic_l1, QuadraticL1, QuadraticSmooth};
pub use soss::{
    semismooth_remainder, soss_case, soss_chain_check, soss_remainder, soss_table, ChainReport,
    ScalarSossCase, SmoothScalar, SossRow, SOSS_CASES,
};
pub use toy::{make_toy_problem, ToyProblemParams, ToySmooth};
