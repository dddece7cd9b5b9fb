//! Numerical laboratory for error-disturbance relations in indirect
//! measurement models.
//!
//! An indirect measurement couples an object system to a probe through a
//! unitary, then reads out a probe observable perfectly. From the model this
//! crate derives the readout statistics, the conditional post-measurement
//! object states, the optimal (posterior-mean) estimator, and the scalar
//! functionals that enter the uncertainty relations: resolution, precision,
//! disturbance, standard deviations and the unbiasedness residual. The
//! relations themselves are evaluated as signed slacks.
//!
//! Conventions: the object factor is always the leftmost (slow) tensor index,
//! so a joint amplitude for object index `i` and probe index `a` lives at
//! `i * d_probe + a`.

pub mod cli;
pub mod error;
pub mod explorer;
pub mod hilbert;
pub mod inequalities;
pub mod measurement;
pub mod metrics;
pub mod models;
pub mod sampler;

pub use error::{Error, Result};
pub use hilbert::{Operator, SpectralDecomposition, StateVector, C64};
pub use inequalities::{evaluate_report, EdrReport, InequalityId, InequalityResult};
pub use measurement::{ConditionalEnsemble, Estimator, Provenance, ReadoutFrame};
pub use metrics::MetricsBundle;
pub use models::{BuilderSpec, GridConfig, MeasurementModel};
