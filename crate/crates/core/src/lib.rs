//! Simulation and verification engine for Bayesian incentive-compatible
//! exploration in combinatorial semi-bandits.
//!
//! Atoms carry Bernoulli rewards with unknown means drawn from a prior; an
//! arm is a feasible subset of atoms and pays the sum of its atoms' rewards.
//! The crate provides Thompson Sampling over structured arm families, two
//! initial-exploration schemes (hidden exploration along a posterior-best
//! arm sequence, and hidden hallucination through an MDP encoding of the
//! family), calculators for their prior-dependent constants, and exact and
//! Monte Carlo checks of the incentive-compatibility condition.

pub mod error;
pub mod hallucination;
pub mod harness;
pub mod mdp;
pub mod model;
pub mod posterior;
pub mod registry;
pub mod rng;
pub mod scalar;
pub mod sequence;
pub mod sim;
pub mod stats;
pub mod strategy;
pub mod thompson;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Arm, ArmFamily, Instance, Prior, Problem, ProductPrior};
pub use rng::RngStream;
