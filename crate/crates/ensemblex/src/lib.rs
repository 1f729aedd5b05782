//! Ensembles of multilayer random graphs under local (degree) and global
//! (link-count) constraints.
//!
//! The crate builds two probability distributions over simple multilayer
//! graphs: the *microcanonical* ensemble (uniform over all graphs meeting
//! the constraints exactly) and the *canonical* ensemble (maximum-entropy
//! distribution meeting the constraints on average). It computes their
//! relative entropy exactly at desk scale, asymptotically at any scale,
//! and evaluates the limiting per-node relative entropy for the standard
//! model families (multipartite, multiplex, block-model, scale-free, ...).
//!
//! Modules:
//! - [`model`]: graphs, layers, master graphs, constraint sets.
//! - [`graphical`]: realizability checks and deterministic witness graphs.
//! - [`canonical`]: maximum-entropy edge probabilities via Lagrange multipliers.
//! - [`microcanonical`]: exact and asymptotic graph counting.
//! - [`entropy`]: relative entropy, the Poissonisation cost `g`, limit formulas.
//! - [`sampling`]: canonical Bernoulli sampling and degree-preserving swap MCMC.
//! - [`structure`]: modularity, community condition, scale-free series, model families.

pub mod canonical;
pub mod entropy;
pub mod graphical;
pub mod logspace;
pub mod microcanonical;
pub mod model;
pub mod sampling;
pub mod structure;

mod error;

pub use error::{Error, Result};
