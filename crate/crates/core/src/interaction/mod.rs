//! AC load flow and algebraic interaction factors between generators and
//! candidate load buses.

mod factors;
mod powerflow;

pub use factors::{
    compute_if_matrix, default_perturbation_mw, driving_point_reactance, emf_behind,
    internal_emf, AugmentedNetwork, IFMatrix,
};
pub use powerflow::{
    build_ybus, solve_power_flow, PowerFlowOptions, PowerFlowProblem, PowerFlowSolution,
    DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
