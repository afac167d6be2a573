//! Semi-supervised disentangled variational autoencoder for the inverse
//! design of single-phase high-entropy alloys.
//!
//! The pipeline: [`elements`] parses compositions over a fixed 30-element
//! vocabulary, [`featurize`] maps them to eight physical descriptors,
//! [`dvae`] trains the generative/recognition model on labelled and
//! unlabelled alloys, [`design`] runs screening, latent generation and the
//! iterative inversion loop, and [`explain`] attributes classifier output
//! to the descriptors with exact kernel SHAP.

pub mod data;
pub mod design;
pub mod dvae;
pub mod elements;
pub mod explain;
pub mod featurize;
pub mod fsio;
pub mod kde;
pub mod nncore;
pub mod par;
pub mod synth;

pub use elements::{Composition, ElementTable, Vocabulary, VOCAB_SIZE};
pub use featurize::{engineered_features, FeatureScaler, FeatureVector8};
