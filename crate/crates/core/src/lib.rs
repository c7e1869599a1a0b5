//! Design of multi-edge-type LDPC ensembles: ensemble algebra, concentrated
//! check-degree design, density-evolution thresholds and the optimizers that
//! search coefficient and degree-structure spaces.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod check_design;
pub mod data;
pub mod density_evolution;
pub mod ensemble;
pub mod error;
pub mod landscape;
pub mod optimizer_ar;
pub mod optimizer_struct;
pub mod template;

pub use ensemble::{
    ChannelAssignment, CheckClass, EdgeVector, Ensemble, ValidationReport, VariableClass,
};
pub use error::{Error, Result};
