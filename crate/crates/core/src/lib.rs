//! Compressed sensing for signals that live in a fusion frame.
//!
//! A signal is a collection of `N` blocks, block `j` confined to a
//! `k`-dimensional subspace `W_j` of `R^d`. This crate builds such subspace
//! collections and measures how coherent they are, takes scalar or
//! vector-valued random measurements, recovers block-sparse signals by
//! mixed `l2,1` minimization with duality-gap certificates, computes
//! restricted isometry constants, and evaluates the closed-form measurement
//! bounds used to design experiments.
//!
//! Signals are stored in coefficient space: block `j` holds `c_j in R^k`
//! and the ambient block is `x_j = U_j c_j`. Because every `U_j` has
//! orthonormal columns, block norms are identical in both representations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod experiment;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod rip;
pub mod seed;
pub mod signals;
pub mod solver;

pub use bounds::BoundReport;
pub use experiment::{CellResult, ExperimentConfig, ExperimentKind, Family, FripRow};
pub use frames::{CoherenceReport, FrameBounds, SubspaceCollection};
pub use measurement::{CoefficientOperator, Distribution, EnsembleSpec, MeasurementOperator};
pub use rip::{RipEstimate, RipMode};
pub use signals::{AmplitudeLaw, BlockSignal};
pub use solver::{Certificate, RecoverySolution, SolverParams, SolverStatus};
