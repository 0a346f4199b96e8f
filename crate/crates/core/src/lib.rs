//! Two-metric projection methods.
//!
//! The crate solves two problem classes:
//!
//! ```text
//!     minimize f(x)                 subject to x >= 0
//!     minimize f(x) + gamma*|x|_1
//! ```
//!
//! For the bound-constrained class it provides the classic two-metric
//! projection iteration and a scaled variant with an explicit iteration-count
//! certificate ([`bound`]). For the l1 class it provides the two-metric
//! adaptive projection iteration and a LASSO continuation wrapper ([`l1`]).
//! First-order reference solvers live in [`baselines`], and [`bench`] runs
//! seeded solver ensembles and writes traces, summaries and plots.
//!
//! Vectors and matrices are dense `nalgebra` types; problems are expected to
//! be desk scale (a few hundred variables).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod bound;
mod error;
pub mod l1;
pub mod linalg;
pub mod metric;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
pub use metric::{IndexPartition, MetricKind, MetricSpec};
pub use oracle::{Constants, LassoInstance, Objective};
pub use report::{SolverConfig, SolverReport, Status};
