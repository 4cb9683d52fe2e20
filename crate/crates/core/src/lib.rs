//! Building blocks for benchmarking fair representation learning on
//! transfer tasks.

pub mod bench;
pub mod criteria;
pub mod error;
pub mod eval;
pub mod fare;
pub mod metrics;
pub mod pareto;
pub mod report;
pub mod sweep;
pub mod tabular;

pub use error::{Error, Result};
