//! Symmetrization weighted binary cross-entropy (SWBCE) for edge detection,
//! together with the tooling needed to study it: a synthetic scene
//! generator, a tiny trainable convolutional edge detector, binary PGM
//! input/output, and a strict tolerance-radius edge evaluation (ODS, OIS,
//! AP) without thinning.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod map;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod pgm;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use loss::{
    compute_label_weights, compute_pred_weights, label_loss, multi_level_loss, pred_loss,
    swbce_loss, GradMode, LossConfig, LossKind, LossResult, Normalization,
};
pub use map::{BinaryMap, SoftMap};
