//! Simulation toolkit for quantum state tomography and state testing under
//! adversarial corruption of measurement outcomes.
//!
//! - [`linalg`]: Hermitian matrices, pure and mixed states, norms, projections.
//! - [`haar`]: Haar-random unitaries and states, exact Haar moments.
//! - [`measure`]: POVMs, Born-rule sampling, the uniform POVM sampler.
//! - [`adversary`]: budgeted corruption of outcome records.
//! - [`estimate`]: plain, rank-truncated and robust tomography.
//! - [`qtest`]: Haar-basis identity testing and outcome-distance diagnostics.
//! - [`lowerbound`]: perturbation ensembles and information-channel bounds.
//! - [`harness`]: experiment configs, seeded runs and CSV output.

pub mod adversary;
pub mod error;
pub mod estimate;
pub mod haar;
pub mod harness;
pub mod linalg;
pub mod lowerbound;
pub mod measure;
pub mod qtest;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use haar::UnitaryMatrix;
pub use linalg::{DensityMatrix, HermitianMatrix, PureState};
pub use measure::{OutcomeDistribution, Povm, UniformPovmSample};
