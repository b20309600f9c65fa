//! Entailment operators over vectors of feature log-odds.
//!
//! A vector `X` holds, per feature, the log-odds that the feature is
//! *known* (as opposed to unknown). The operators in [`operators`] score how
//! likely one such vector entails another, [`inference`] solves mean-field
//! updates over graphs of entailment relations, and [`interp`] reads raw word
//! embeddings as such vectors. [`eval`] and [`trainer`] run hyponymy
//! detection on top of pretrained embeddings loaded by [`embeddings`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embeddings;
pub mod error;
pub mod eval;
pub mod format;
pub mod inference;
pub mod interp;
pub mod kernels;
pub mod operators;
pub mod oracle;
pub mod par;
pub mod trainer;
pub mod vector;

pub use error::{Error, Result};
pub use interp::{Interpretation, InterpKind};
pub use operators::{entail_backward, entail_factorized, entail_forward, Operator};
pub use vector::{EntailmentScore, LogOddsVector, ProbVector};
