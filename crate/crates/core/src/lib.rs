//! Goal-oriented tensor modelling of sensing and actuation over a lossy
//! channel, with average-reward solvers for jointly optimal sampling and
//! actuation policies.
//!
//! A [`pomdp::DecPomdpModel`] couples a Markov source, a context chain, an
//! unreliable channel and a [`model::CostModel`]. The sampler observes the
//! full global state; the actuator observes only the latest delivered
//! estimate. [`solvers`] finds joint policies exactly by enumeration or
//! approximately by alternating best responses; [`benchmarks`] and [`sim`]
//! score them against classical freshness-driven baselines.

pub mod benchmarks;
pub mod error;
pub mod model;
pub mod pomdp;
pub mod scenario;
pub mod sim;
pub mod solvers;

pub use error::{Error, Result};
