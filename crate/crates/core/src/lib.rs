//! Maximal entropy random walk (MERW) engine.
//!
//! The crate is organised bottom-up: [`graph`] holds nonnegative weight
//! matrices, [`spectral`] finds their Perron–Frobenius pairs, [`walk`] builds
//! stochastic matrices and information-theoretic diagnostics on top, and the
//! remaining modules specialise to defected lattices, time-dependent
//! schedules and many-particle configuration spaces.

pub mod error;
pub mod graph;
pub mod io;
pub mod lattice;
pub mod matrix;
pub mod multiparticle;
pub mod rng;
pub mod spectral;
pub mod timedep;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{GraphKind, WeightedGraph};
pub use spectral::{dominant_eigenpair, EigenOptions, EigenPair};
