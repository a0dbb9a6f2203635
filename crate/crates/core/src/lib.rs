//! Spatial evolutionary games in the weak-selection limit.
//!
//! The crate computes coalescing random walk constants, the modified games and
//! reaction terms they induce, classifies 2- and 3-strategy games, and checks
//! the predictions against a lattice simulator and a 1-D reaction-diffusion
//! solver.

pub mod cancer;
pub mod classifier;
pub mod coalescence;
pub mod error;
pub mod games;
pub mod io;
pub mod lattice;
pub mod pde;
pub mod presets;
pub mod repelling;
pub mod replicator;
pub mod rng;

pub use error::{Error, Result};
