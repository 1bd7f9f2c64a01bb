//! Stepwise evaluation of a small functional language with strategy-driven
//! feedback on student derivations.

pub mod cli;
pub mod engine;
pub mod expr;
pub mod feedback;
pub mod prelude;
pub mod rules;
pub mod service;
pub mod strategy;
