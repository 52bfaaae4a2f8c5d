//! Timeline branching-process model of viral content.
//!
//! Timelines carrying a post form a continuous-time multi-type branching
//! process. The crate computes its virality threshold (the Perron root of the
//! generator), extinction probabilities, expected shares, optimal post quality
//! and two-provider equilibria, and simulates the process exactly.

pub mod cli;
pub mod error;
pub mod extinction;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod shares;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
