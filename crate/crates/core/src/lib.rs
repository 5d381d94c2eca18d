//! Monte Carlo simulation of proof-of-work block races under a combined
//! selfish-mining and double-spending attack, with learning-automata
//! fork-resolution defenses.

pub mod attacker;
pub mod automata;
pub mod chain;
pub mod defense;
pub mod error;
pub mod experiments;
pub mod frp;
pub mod mining;
pub mod sim;

pub use error::{Error, Result};
