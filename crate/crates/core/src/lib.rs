//! Bipartite sequential-measurement correlations in which earlier events may
//! influence later measurements of both parties.
//!
//! * [`corr`]: correlation tensors, constraint checks, factorization.
//! * [`polytope`]: single-step vertices, the spatio-temporal polytope `P`,
//!   the sequential local polytope `Q`, time-ordered local vertices.
//! * [`quantum`]: states, instruments, sequential Born-rule simulation.
//! * [`witness`]: concatenated CHSH witness and its bound ladder.
//! * [`optimize`]: seesaw, strategy sampling, Gilbert distance.

pub mod corr;
pub mod error;
pub mod optimize;
pub mod polytope;
pub mod quantum;
pub mod rng;
pub mod witness;

pub use corr::{
    Conditional, Factorization, History, Scenario, SequentialCorrelation, SingleStepBox, StepRecord, DEFAULT_TOL,
};
pub use error::{Error, Result};
pub use optimize::{GilbertResult, HiddenNonlocalityReport, SeesawResult};
pub use polytope::{BoxVertex, ExtremalityCertificate, ExtremePointSpec, MembershipVerdict};
pub use quantum::{ComplexMatrix, DensityMatrix, KrausInstrument, Povm, SequentialStrategy};
pub use witness::{Bounds, WitnessClass, WitnessReport};
