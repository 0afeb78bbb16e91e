//! Evolutionary deep reinforcement learning for O-RAN slice resource
//! management.
//!
//! The crate contains a downlink slicing simulator ([`env`]), its MDP encoding
//! ([`mdp`]), a small dense network library ([`nn`]), a DDPG learner
//! ([`ddpg`]), an evolutionary population of actor policies ([`evo`]), the
//! hybrid trainer tying them together ([`orchestrator`]), and the run
//! management layer behind the command-line tool ([`experiment`]).

pub mod ddpg;
pub mod env;
pub mod error;
pub mod evo;
pub mod experiment;
pub mod mdp;
pub mod nn;
pub mod orchestrator;
pub mod rng;

pub use error::{Error, Result};
