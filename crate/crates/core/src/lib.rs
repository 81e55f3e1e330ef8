//! Poisson Boolean percolation with heavy-tailed radii.
//!
//! The crate samples the Poisson process `η` of intensity `λ dz ⊗ μ`, answers
//! connectivity questions about the occupied set, and estimates the finite
//! volume quantities that control the phase transition: crossing and seed
//! event probabilities, the `φ` functional, pivotal integrals and their
//! `δ`-derivatives, Talagrand-type influence diagnostics, two-arm decay and a
//! Grimmett-Marstrand style exploration. Exact hypercube routines check the
//! dyadic reduction behind the influence inequality.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connectivity;
pub mod estimators;
pub mod exploration;
pub mod geometry;
pub mod hypercube;
pub mod measures;
pub mod par;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use geometry::Region;
pub use measures::{CellLaw, MeasureError, MeasureKind, RadiusMeasure};
pub use sampling::{CenterPolicy, Configuration, Sampler, SamplerSpec, SamplingError, Truncation, Window, WindowShape};
pub use estimators::{Estimate, EstimatorError, McSettings};
