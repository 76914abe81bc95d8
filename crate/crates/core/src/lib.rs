//! Nutrition-targeted recipe completion and recommendation.
//!
//! The pipeline starts from a handful of ingredients, predicts compatible
//! ingredients ([`embedding`], [`baselines`]) and their gram amounts
//! ([`amounts`]), greedily grows a pseudo-recipe whose macro-nutrients
//! approach a daily target ([`recommender`]), and retrieves the most similar
//! real recipes from the corpus. [`eval`] holds the offline evaluation
//! protocols and [`cli`] wires everything into the `nutrec` binary.
//!
//! Data-parallel loops (evaluation sweeps, candidate scoring, retrieval,
//! mini-batch gradients) run on rayon when the `parallel` feature is on and
//! fall back to plain iterators otherwise. Results are identical either way.

pub mod amounts;
pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
mod linalg;
pub mod nutrition;
mod par;
pub mod persist;
pub mod predictor;
pub mod recommender;
pub mod synth;

pub use error::{Error, Result};
