//! Latency-minimizing task assignment and resource allocation for a local
//! user that offloads independent tasks to `K` D2D helpers over a fixed-order
//! TDMA frame (offload, execute, download).
//!
//! The solvers are generic over the floating-point type through
//! [`scalar::Real`]; the aliases at the crate root fix it to `f64`.

// `!(x > 0)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod harness;
pub mod heuristics;
mod dual;
pub mod error;
pub mod model;
pub mod numerics;
pub mod relax;
pub mod result;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;
pub use result::{Diagnostics, Scheme, Status};

pub type Scenario = model::Scenario<f64>;
pub type Assignment = model::Assignment<f64>;
pub type Allocation = model::Allocation<f64>;
pub type SchemeResult = result::SchemeResult<f64>;
