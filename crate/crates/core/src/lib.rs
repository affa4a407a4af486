//! Column-generation boosting for structured outputs.
//!
//! A strong model is a nonnegative combination of weak-learner columns.
//! Training alternates between a restricted master LP (the 1-slack
//! cutting-plane formulation or the m-slack reference formulation) and a
//! weak-learner subproblem that returns the column with the largest
//! weighted edge under the master duals.

// Negated float comparisons are how NaN inputs get rejected; index loops
// mirror the triangular solves they implement.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod colgen;
pub mod error;
pub mod fit;
pub mod graphcut;
pub mod io;
pub mod lp;
pub mod master;
pub mod model;
pub mod task;
pub mod tasks;
pub mod weak;

pub use colgen::{train, train_with, StopReason, TrainOutput};
pub use error::{Error, Result};
pub use model::{
    predict, score, Dataset, Sample, SolverKind, StrongModel, StructuredLabel, TaskDescriptor, TrainParams,
};
pub use task::StructuredTask;
pub use weak::{WeakConfig, WeakKind, WeakLearner};
