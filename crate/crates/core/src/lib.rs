//! Simulation toolkit for phenotype-driven genome re-identification.
//!
//! Synthetic cohorts of linked genotypes and phenotypes are generated under
//! Hardy–Weinberg proportions, attacked with likelihood ranking
//! (identification) and maximum-weight bipartite matching, and then defended
//! with genotype noise and keyed phenotypic salt.

pub mod attack;
pub mod cli;
pub mod countermeasures;
pub mod demo;
pub mod error;
pub mod eval;
pub mod genome;
pub mod model;
pub mod rng;
pub mod sequence;
pub mod synth;

pub use error::{Error, Result};
