use std::path::PathBuf;

/// Errors produced by field operations, codecs, and the generation driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("incompatible fields: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("empty warp: no valid source pixel to splat")]
    EmptyWarp,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too few valid pixels: {found} (need {required})")]
    TooFewValidPixels { found: usize, required: usize },

    #[error("no mutually valid pixels")]
    NoOverlap,

    #[error("all points behind the camera after motion")]
    BehindCamera,

    #[error("degenerate camera: {0}")]
    DegenerateCamera(String),

    #[error("bad magic")]
    BadMagic,

    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("dimension overflow: {width}x{height}")]
    DimensionOverflow { width: i64, height: i64 },

    #[error("flow out of encodable range at pixel ({x}, {y})")]
    OutOfRange { x: usize, y: usize },

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),

    #[error("config: {0}")]
    Config(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("all {0} samples failed")]
    AllSamplesFailed(usize),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyWarp => "empty_warp",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::TooFewValidPixels { .. } => "too_few_valid_pixels",
            Error::NoOverlap => "no_overlap",
            Error::BehindCamera => "behind_camera",
            Error::DegenerateCamera(_) => "degenerate_camera",
            Error::BadMagic => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::DimensionOverflow { .. } => "dimension_overflow",
            Error::OutOfRange { .. } => "out_of_range",
            Error::MalformedImage(_) => "malformed_image",
            Error::MalformedHeader(_) => "malformed_header",
            Error::UnsupportedBitDepth(_) => "unsupported_bit_depth",
            Error::Config(_) => "config",
            Error::Manifest { .. } => "manifest",
            Error::AllSamplesFailed(_) => "all_samples_failed",
            Error::Path { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Error {
        Error::Path {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
