//! Genealogical skeletons of critical branching random walks.
//!
//! Modules:
//! - [`treegen`]: Galton-Watson trees, spatial displacements and generation profiles.
//! - [`skeleton`]: branch-time matrices, shapes, minimal subtrees and projections.
//! - [`gst`]: graph spatial trees, interpolated paths and the `D` metric.
//! - [`latticeoracle`]: exact enumeration of small weighted lattice trees.
//! - [`limitlaw`]: closed-form limits and tree-indexed Brownian motion.
//! - [`harness`]: experiment configuration, records, statistics and drivers.

pub mod gst;
pub mod harness;
pub mod latticeoracle;
pub mod limitlaw;
pub mod replica;
pub mod scalar;
pub mod skeleton;
pub mod treegen;

pub use scalar::{FieldScalar, Rational, Scalar, DEFAULT_TOLERANCE};
