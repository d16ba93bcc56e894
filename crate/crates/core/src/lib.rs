//! Quantum robots on a one-dimensional qubit environment.

pub mod basis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod operator;
pub mod rules;
pub mod scenario;
pub mod state;
pub mod tasks;
pub mod validate;

pub use error::{Error, Result};
