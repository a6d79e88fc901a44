//! Stability certificates for binary feature-attribution explanations.
//!
//! An explanation is a mask `α` over the `n` input features. It is stable at
//! radius `r` when adding up to `r` more features to the mask does not change
//! the classifier's prediction. This crate estimates and certifies that
//! property for black-box models ([`sca`]), smooths models by random masking
//! ([`smoothing`]), analyses the smoothing operator exactly on small Boolean
//! domains ([`spectral`]), and scores attribution rankings with
//! influence-based insertion and deletion metrics ([`bise`]).

pub mod attribution;
pub mod bise;
pub mod error;
pub mod external;
pub mod mask;
pub mod model;
pub mod models;
pub mod perturb;
pub mod rng;
pub mod sca;
pub mod smoothing;
pub mod spectral;
pub mod stats;

pub use attribution::{binarize_top_fraction, Attribution};
pub use error::{Error, Result};
pub use mask::Mask;
pub use model::{
    apply_mask, decision_gap, predicts_same, Concurrency, CountingModel, InputVector, Model, ModelOutput,
    PredictionRelation,
};
