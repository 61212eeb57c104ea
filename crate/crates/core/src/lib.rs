//! Open-system dynamics of spin networks under spatially correlated noise.
//!
//! Two propagation engines share one model:
//! [`full`] evolves the complete `2^N` density matrix, [`reduced`] the
//! `(N+1)`-dimensional single-excitation sector. [`analytics`] holds stationary
//! state prediction and the transfer/fit metrics, [`experiments`] the scenario
//! drivers and their CSV/JSON output.

pub mod analytics;
pub mod error;
pub mod experiments;
pub mod full;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod reduced;

pub use error::{Error, Result};
pub use full::{FullLiouvillian, FullState, Frame};
pub use integrate::{EvolveOptions, MasterEquation, Observables, TimeSeries};
pub use linalg::{CMatrix, CVector};
pub use model::{build_kernel, CorrelationKernel, NetworkSpec, NoiseSpec};
pub use reduced::{ReducedLiouvillian, ReducedState};
