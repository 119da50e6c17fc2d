//! Favorite edges and downcrossing sites of simple random walk: a path
//! engine, exact enumeration, branching-chain kernels, Ray-Knight style
//! profile samplers, event counters and Monte Carlo harnesses.

pub mod branching;
pub mod embedding;
pub mod error;
pub mod events;
pub mod harness;
pub mod oracle;
pub mod rayknight;
pub mod registry;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
