//! Inference of latent tumor haplotypes from next-generation-sequencing
//! variant read counts.
//!
//! Observed variant allele fractions at S SNVs across T samples are explained
//! as mixtures of C latent haplotypes: a binomial likelihood sits on top of
//! success probabilities composed from a binary SNV-by-haplotype inclusion
//! matrix, per-sample mixing weights, and a background noise rate. C itself
//! is unknown and sampled by a trans-dimensional move, so a fit yields a
//! posterior over the number of haplotypes together with permutation-aligned
//! point estimates of the haplotypes and their proportions.
//!
//! The crate is organized as:
//! - [`model`]: types and pure density computations
//! - [`sampler`]: within-model and reversible-jump MCMC
//! - [`summary`]: posterior summaries under label permutation
//! - [`simulate`]: synthetic data with known truth
//! - [`io`] / [`cli`]: file formats and the command-line workflow

pub mod assignment;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod numerics;
pub mod sampler;
pub mod simulate;
pub mod summary;
pub mod trace;

pub use data::CountData;
pub use error::{Error, Result};
pub use model::{FeatureMatrix, Hyperparams, ModelState, WeightMatrix};
pub use sampler::{run_chain, McmcConfig, TrainTestSplit};
pub use summary::{summarize, FitSummary};
pub use trace::Trace;
