//! Monte Carlo option pricing partitioned across heterogeneous platforms.
//!
//! Tasks are described in [`findomain`], simulated by [`stochastic`] and
//! [`mcengine`], run on [`platforms`], modelled by [`metrics`], partitioned by
//! [`allocator`] and driven end to end by [`orchestrator`].

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod error;
pub mod findomain;
pub mod mcengine;
pub mod metrics;
pub mod orchestrator;
pub mod platforms;
pub mod stochastic;

pub use error::{Error, Result};
pub use findomain::{parse_task_file, Portfolio, PricingTask};
pub use platforms::{load_registry, PlatformRegistry, PlatformSpec};
