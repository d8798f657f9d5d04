//! Seesaw CHSH maximization, randomized strategy sampling, Gilbert distance
//! to vertex hulls, and the filtering demo.

mod gilbert;
mod hidden;
mod sampling;
mod seesaw;

pub use gilbert::{
    gilbert_distance, local_box_by_distance, membership_tol, membership_tol_with, DenseVertices, GilbertResult,
    TolOracle, VertexOracle, GILBERT_MAX_ITERS, GILBERT_TOL,
};
pub use hidden::{default_mixing, hidden_nonlocality_demo, hidden_nonlocality_strategy, HiddenNonlocalityReport};
pub use sampling::{
    bloch_strategy, random_qubit_projective_strategy, random_strategy, sample_qubit_projective_strategies,
    seesaw_tuned_qubit_strategy, SamplingReport,
};
pub use seesaw::{
    chsh_expectation, random_observable, seesaw_chsh, SeesawResult, SEESAW_MAX_ITERS, SEESAW_MAX_LOCAL_DIM, SEESAW_TOL,
};
