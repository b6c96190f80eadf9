//! Engine for phase-gated, radially hierarchical problem-solving models.
//!
//! - [`model`]: goal, obstacle DAG, solutions and resources, with guarded
//!   pure mutations and a validator.
//! - [`session`]: hash-chained event log and the phase gate that decides
//!   which changes are admissible when.
//! - [`impact`]: goal-impact factors, progress rollup and sROI.
//! - [`applicability`]: goal-congruence checks and the dependency-network
//!   complexity gate.
//! - [`layout`]: sunburst geometry and SVG export.
//! - [`persist`]: canonical documents, log files and replay.

pub mod canonical;
pub mod model;
pub mod applicability;
pub mod session;
pub mod impact;
pub mod layout;
pub mod persist;
