//! States, measurement instruments and the sequential Born-rule simulation.

pub mod linalg;
mod measurement;
mod state;
mod strategy;

pub use linalg::{hermitian_eig, partial_trace, tensor_product, ComplexMatrix, HermitianEigen, Subsystem, C64};
pub use measurement::{
    conditional_post_state, local_filter_instrument, observable_projectors, projective_qubit_instrument,
    KrausInstrument, Povm, COMPLETENESS_TOL,
};
pub use state::{maximally_entangled_state, werner_state, DensityMatrix};
pub use strategy::{simulate, PartyProgram, SequentialStrategy};
