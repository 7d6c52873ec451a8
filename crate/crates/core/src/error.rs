use thiserror::Error;

/// Errors surfaced by the baking and rendering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not unit length (|v| = {norm})")]
    NotUnit { norm: f64 },

    #[error("direction is on the wrong side of the surface for this domain (z = {z})")]
    WrongHemisphere { z: f64 },

    #[error("BSDF parameter out of range: {name} = {value} not in [{min}, {max}]")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("tabulated slice is empty (all texels zero); params or incidence are degenerate")]
    EmptySlice,

    #[error("point sets must have equal size: {lhs} vs {rhs}")]
    PointSetSizeMismatch { lhs: usize, rhs: usize },

    #[error("point count {n} is not a perfect square")]
    NotPerfectSquare { n: usize },

    #[error("feature vector length {got} does not match network input {want}")]
    DimensionMismatch { got: usize, want: usize },

    #[error("training diverged at step {step} (loss became non-finite); last good checkpoint attached")]
    TrainingDiverged {
        step: usize,
        last_good: Box<crate::neural::MlpWeights>,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("image resolutions differ: {lhs_w}x{lhs_h} vs {rhs_w}x{rhs_h}")]
    ResolutionMismatch {
        lhs_w: usize,
        lhs_h: usize,
        rhs_w: usize,
        rhs_h: usize,
    },

    #[error("scene is invalid: {0}")]
    InvalidScene(String),

    #[error(
        "sampler `{sampler}` reports no pdf and cannot be used with MIS; \
         use the bsdf-only integrator or bind a map/neural sampler"
    )]
    NoPdfForMis { sampler: &'static str },

    #[error("malformed {kind} file: {reason}")]
    MalformedFile { kind: &'static str, reason: String },

    #[error("checksum mismatch in {path}: header {expected}, payload {actual}")]
    ChecksumMismatch {
        path: String,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
