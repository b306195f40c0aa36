//! Desk-scale experiments for counting and boundary limit theorems on
//! Gromov-hyperbolic groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`] holds concrete group oracles (free groups, free products of
//!   cyclic groups, C'(1/6) presentations), linear representations and the
//!   subadditive functionals evaluated on words.
//! * [`automaton`] builds, loads and validates strongly Markov structures.
//! * [`spectral`] performs the Perron/Parry analysis of the transition matrix.
//! * [`counting`] enumerates and samples spheres exactly and runs the
//!   spherical LLN/LDP/CLT pipelines.
//! * [`markov`] simulates Markovian random matrix products.
//! * [`boundary`] computes Patterson-Sullivan cylinder masses, samples rays
//!   and measures ray statistics.
//! * [`cli`] wires everything into the `hyperlab` binary.

pub mod automaton;
pub mod boundary;
pub mod builtins;
pub mod cli;
pub mod counting;
pub mod error;
pub mod group;
pub mod linalg;
pub mod markov;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
