//! Feature interaction scores (FIS) measured across a mask-based Rashomon set.
//!
//! A single trained model gives one answer to "how strongly do these features
//! interact?". Every model whose loss sits within `epsilon` of the reference
//! is an equally defensible answer. This crate samples that set by composing a
//! per-feature multiplicative mask in front of a fixed backbone, then reports
//! the spread of interaction scores it induces.
//!
//! Layout:
//!
//! * [`data`], [`loss`], [`model`]: datasets, losses, the model contract and masking.
//! * [`effects`]: main/joint effects and the interaction score.
//! * [`rashomon`]: greedy mask-bound search, FISC and MCR ranges, model-class files.
//! * [`mlp`]: closed-form mask bounds and FIS extrema for a one-layer sigmoid network.
//! * [`synthetic`]: benchmark functions, the mixed-difference detector and ROC-AUC.
//! * [`halo`]: halo-curve and swarm data.
//! * [`train`]: small gradient-descent fitters for desk-scale reference models.

pub mod data;
pub mod effects;
pub mod error;
pub mod halo;
pub mod loss;
pub mod mlp;
pub mod model;
pub mod par;
pub mod rashomon;
pub mod rng;
pub mod roots;
pub mod synthetic;
pub mod train;

pub use data::{Dataset, FeatureSet, Matrix};
pub use error::{Error, Result};
pub use loss::{expected_loss, LossKind};
pub use model::{apply_mask, compose_masks, MaskVector, MaskedModel, PredictiveModel, SharedModel};
