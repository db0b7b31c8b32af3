//! Bayesian finite mixtures of multivariate Gaussians.
//!
//! The crate provides conjugate Gibbs sampling with a fixed number of
//! components, sparse finite mixtures, and the telescoping sampler for a
//! random number of components, plus the post-processing needed to turn
//! raw draws into cluster-specific inference: relabeling through k-means
//! on the point process representation of the draws, final partitions and
//! partition agreement metrics.

pub mod clustering;
pub mod datasets;
pub mod distributions;
pub mod io;
pub mod linalg;
pub mod model;
pub mod postprocess;
pub mod sampler;

/// Random number generator used for every chain.
pub type ChainRng = rand_chacha::ChaCha8Rng;
