//! Carleman weights `sigma = theta (C - delta^2 psi - (delta/r0)^lambda e^{lambda psi})`,
//! their admissibility rules, pointwise inequalities and the empirical
//! Carleman inequality.

pub mod empirical;
pub mod lognum;
pub mod propositions;
pub mod psi;
pub mod weights;

pub use empirical::{
    empirical_carleman, random_terminal_states, select_r, CarlemanSides, EmpiricalCarleman, RSelection,
};
pub use lognum::LogNum;
pub use propositions::{find_lambda0, sample_propositions, LambdaSearch, PropositionReport};
pub use psi::{build_psi1, build_psi1_from, Psi1};
pub use weights::{
    admissibility, check_boundary_flux, Admissibility, FluxReport, RuleStatus, WeightConfig, WeightFields,
    WeightParams, Weights,
};
