//! Exact oracles and closed-form concentration bounds for growth-bounded
//! distributions, expander walks, low-degree polynomials and subgraph counts.

pub mod budget;
pub mod core_bounds;
pub mod corpus;
pub mod coupling;
pub mod dist;
pub mod error;
pub mod exact;
pub mod expander;
pub mod polybound;
pub mod seed;
pub mod subgraph;

pub use error::{Error, Result};
pub use exact::Q;
