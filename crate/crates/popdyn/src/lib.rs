//! Stochastic population dynamics.
//!
//! Birth-death chains and their scaling limits, continuous-state branching
//! processes, Feller diffusions with catastrophes, individual-based models
//! with trait structure, splitting diffusions on cell trees and branching
//! Markov processes on Galton-Watson trees. Every simulator ships with the
//! analytic quantity it is checked against.

pub mod bd;
pub mod catastrophe;
pub mod cli;
pub mod csbp;
pub mod error;
pub mod gwtree;
pub mod kernel;
pub mod numerics;
pub mod scaling;
pub mod splitting;
pub mod stats;
pub mod structpop;

pub use error::{Error, Result};
