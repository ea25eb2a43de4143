//! Floating-point constraint solving for counter-example search.

pub mod fpbits;
pub mod interval;
pub mod model;
pub mod parser;
pub mod metrics;
pub mod propagate;
pub mod strategy;
pub mod search;
pub mod harness;
pub mod cli;
