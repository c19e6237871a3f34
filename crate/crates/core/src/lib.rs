//! Cooperative perception for connected vehicles: shared-object selection,
//! broadcast scheduling over a lossy channel, and closed-loop evaluation.

pub mod channel;
pub mod control;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod scheduler;
pub mod spatial;
pub mod world;

pub use error::{Error, Result};
