//! forgeseek detects image forgeries by fusing two complementary detectors:
//!
//! - a splicing detector built on quantized high-pass residual co-occurrence
//!   features with linear-SVM model selection by cross-validated AUC, and
//! - a high-specificity copy-move detector built on a PatchMatch dense offset
//!   field with homogeneous-motion segmentation and a rotation sweep.
//!
//! An image is declared fake when at least one detector says so: the copy-move
//! detector is tuned so its "fake" verdict is near-certain, which lets the
//! fusion recover forgeries too small to shift the global descriptor.
//!
//! # Quick start
//!
//! ```
//! use forgeseek::prelude::*;
//!
//! // A flat image carries no duplicated content.
//! let img = GrayImage::constant(64, 64, 128.0);
//! let result = detect_copymove(&img, &PatchMatchConfig::default(), &CopyMoveConfig::default());
//! assert!(!result.unwrap().is_fake);
//! ```
//!
//! Each major capability has a runnable example under `examples/`; the
//! `forgeseek` binary wraps the same library calls in a small CLI
//! (`synth`, `features`, `train`, `cv`, `copymove`, `detect`, `eval`).

pub mod classifier;
pub mod cooccurrence;
pub mod copymove;
pub mod error;
pub mod fusion;
pub mod raster;
pub mod residuals;
pub mod synth;

pub use error::{Error, Result};

/// Convenience re-exports covering the whole pipeline.
pub mod prelude {
    pub use crate::classifier::{
        cross_validate, roc_auc, score, select_models, train_svm, Criterion, EvalReport, Label,
        LabeledItem, LabeledSet, SelectionReport, SvmModel,
    };
    pub use crate::cooccurrence::{
        count_cooc, extract_features, merge_features, symmetrize_linear, symmetrize_minmax,
        CoocTensor, FeatureVector,
    };
    pub use crate::copymove::{
        detect_copymove, eliminate_candidates, patchmatch, segment_offsets, CopyMoveConfig,
        CopyMoveResult, OffsetField, PatchMatchConfig,
    };
    pub use crate::error::{Error, Result};
    pub use crate::fusion::{fuse, Decision, Verdict};
    pub use crate::raster::{
        load_image, read_mask, rotate_image, to_grayscale, write_image, write_mask, BinaryMask,
        GrayImage,
    };
    pub use crate::residuals::{
        builtin_bank, compute_residual, quantize_truncate, FilterOrder, ModelId, ModelKind,
        QuantizedResidualField, ResidualField, ResidualModel,
    };
    pub use crate::synth::{generate_corpus, CorpusSpec, Manifest, ManifestEntry};
}
