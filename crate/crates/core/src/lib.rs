//! Reductions from random constraint-satisfaction formulas to labeled samples
//! that are realizable by depth-2 ReLU networks with naturally distributed
//! random weights, plus the statistical harness that verifies every stage.
//!
//! The chain: K-SAT formulas -> conjunctive T-formulas (greedy variable-disjoint
//! grouping) -> mixed formulas with coin-flipped constraint polarity -> gadget
//! encodings in R^((n'+1)q) -> linear weight/input transforms that make the
//! realizing network's weights follow a chosen distribution family.

pub mod csp;
pub mod error;
pub mod gadget;
pub mod harness;
pub mod manifest;
pub mod neural;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
