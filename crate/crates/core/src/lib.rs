//! Markov chains, hidden Markov models, Bayesian filtering and smoothing,
//! written once against an abstract Markov-category interface and run on
//! finite probability, finite nondeterminism and Gaussian maps.

#![allow(clippy::needless_range_loop)]

pub mod category;
pub mod cli;
pub mod error;
pub mod filterchain;
pub mod filtering;
pub mod finite;
pub mod finsetmulti;
pub mod finstoch;
pub mod gauss;
pub mod laws;
pub mod models;
pub mod random;
pub mod smoothing;
pub mod suites;

pub use category::{Instance, MarkovCategory, Object, OutputPartition, Representable};
pub use error::{Error, Result};
pub use finsetmulti::FinSetMulti;
pub use finstoch::FinStoch;
pub use gauss::{Gauss, GaussMap};
