//! Bayesian nonparametric principal stratification with a binary treatment
//! and a continuous post-treatment variable.
//!
//! The post-treatment variable under each arm is modelled by a probit
//! stick-breaking mixture whose atoms are shared between arms. A unit whose
//! two allocations hit the same atom is dissociative; otherwise the sign of
//! the atom gap decides between the positive and negative associative strata.
//!
//! * [`dist`]: random variates and densities (truncated MVN, SUN, bivariate CDF)
//! * [`model`]: state types, stick-breaking weights, prior stratum probability
//! * [`gibbs`]: the blocked Gibbs sampler
//! * [`strata`]: stratum assignment, causal effects, adjusted Rand index
//! * [`sim`]: the five simulation scenarios and the replication harness
//! * [`cli`]: command-line driver, CSV persistence, config files

pub mod cli;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod model;
pub mod sim;
pub mod strata;

pub use error::{CasbahError, Result};
pub use gibbs::{run_chain, GibbsConfig, OutcomeState, PosteriorDraws};
pub use model::{Hyperparams, MixtureState, ObservedDataset};
pub use strata::{StrataSummary, StratumLabel};
