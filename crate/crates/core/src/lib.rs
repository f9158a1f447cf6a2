//! Finite mixtures of exponential-family random graph models (ERGMs).
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: undirected simple graphs, node covariates and ensembles.
//! * [`terms`]: sufficient statistics, change statistics and the size offset.
//! * [`engine`]: pseudo-likelihood, MPLE, exact enumeration and graph simulation
//!   for a single ERGM.
//! * [`mixture`]: the Metropolis-within-Gibbs sampler over labels, weights and
//!   per-cluster parameters, plus K-means initialisation.
//! * [`selection`]: observed DIC, the relative-difference rule for K,
//!   membership probabilities and posterior-predictive ensembles.
//! * [`metrics`]: graph-level metrics and distribution/partition comparisons.

pub mod engine;
pub mod error;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod mixture;
pub mod rng;
pub mod selection;
pub mod terms;

pub use engine::{PlDesign, Proposal, SamplerConfig};
pub use error::{Error, Result};
pub use graph::{Ensemble, Graph, Network, NodeCovariates};
pub use mixture::{ChainConfig, InitStrategy, MixtureModel, MixtureState, PosteriorSample, PriorSpec};
pub use terms::{ModelSpec, Term};
