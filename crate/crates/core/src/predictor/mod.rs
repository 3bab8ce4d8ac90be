//! Forward pass of the multimodal attention predictor.
//!
//! Four behavior modalities — head motion (HM), eye blink (EB), voice (VO),
//! and gaze direction (GD) — arrive as time-by-feature matrices. The kernel
//! aligns them to a common width with a 1-D convolution, adds positional and
//! timestamp encodings, runs crossmodal and self scaled-dot-product
//! attention inside one fusion core per modality, and maps the concatenated
//! fused vectors through a fully connected layer to the prediction.
//!
//! Everything here is a pure function of its inputs; parameters are
//! immutable after construction and safe to share across threads. Training
//! is out of scope: weights are supplied by the caller, loaded from JSON, or
//! drawn from a seeded initializer.

mod attention;
mod encoding;
mod eval;
mod fusion;
pub mod schema;

pub use attention::{
    crossmodal_attention, crossmodal_attention_with_weights, self_attention, AttentionParams,
};
pub use encoding::{
    align_dimensions, encode_modality, positional_encoding, timestamp_encoding, Conv1dKernel,
};
pub use eval::{mae, rmse};
pub use fusion::{
    fusion_core, predict, FeedForward, FusionCoreParams, LayerNorm, PredictionTarget, Predictor,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    ShapeMismatch { context: &'static str, expected: String, found: String },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("encoding dimension must be even and >= 2, got {0}")]
    OddDimension(usize),
    #[error("timestamps must be strictly increasing")]
    NonIncreasingTimestamps,
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("kernel width must be odd, got {0}")]
    EvenKernelWidth(usize),
    #[error("kernel width {width} exceeds 2T-1 = {max} for T = {t}")]
    KernelTooWide { width: usize, max: usize, t: usize },
    #[error("invalid attention params: {0}")]
    InvalidParams(String),
    #[error("fusion core modality mismatch: {0}")]
    ModalityMismatch(String),
    #[error("heads {heads} must evenly divide d_k {d_k} and d_v {d_v}")]
    HeadSplit { heads: usize, d_k: usize, d_v: usize },
    #[error("schema error: {0}")]
    Schema(String),
}

/// The four behavior modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "HM")]
    HeadMotion,
    #[serde(rename = "EB")]
    EyeBlink,
    #[serde(rename = "VO")]
    Voice,
    #[serde(rename = "GD")]
    GazeDirection,
}

impl Modality {
    pub const ALL: [Modality; 4] =
        [Modality::HeadMotion, Modality::EyeBlink, Modality::Voice, Modality::GazeDirection];

    pub fn code(self) -> &'static str {
        match self {
            Modality::HeadMotion => "HM",
            Modality::EyeBlink => "EB",
            Modality::Voice => "VO",
            Modality::GazeDirection => "GD",
        }
    }

    pub fn from_code(code: &str) -> Option<Modality> {
        match code {
            "HM" => Some(Modality::HeadMotion),
            "EB" => Some(Modality::EyeBlink),
            "VO" => Some(Modality::Voice),
            "GD" => Some(Modality::GazeDirection),
            _ => None,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// One modality's raw feature sequence: a `[T x d_m]` matrix with one
/// timestamp per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSequence {
    modality: Modality,
    data: Array2<f64>,
    timestamps: Vec<f64>,
}

impl ModalSequence {
    /// Validates: at least one row, finite values, strictly increasing
    /// timestamps matching the row count.
    pub fn new(modality: Modality, data: Array2<f64>, timestamps: Vec<f64>) -> Result<Self, PredictorError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(PredictorError::EmptySequence);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PredictorError::NonFinite("modal sequence"));
        }
        if timestamps.len() != data.nrows() {
            return Err(PredictorError::ShapeMismatch {
                context: "modal sequence timestamps",
                expected: format!("{} timestamps", data.nrows()),
                found: format!("{}", timestamps.len()),
            });
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(PredictorError::NonFinite("timestamps"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PredictorError::NonIncreasingTimestamps);
        }
        Ok(ModalSequence { modality, data, timestamps })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.data.ncols()
    }
}

/// A modality sequence after alignment and encoding: all four modalities
/// share the same feature width `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub modality: Modality,
    pub data: Array2<f64>,
}
