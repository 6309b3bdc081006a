use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode tiff {path}: {source}")]
    Tiff {
        path: PathBuf,
        #[source]
        source: tiff::TiffError,
    },

    #[error("invalid raster {path}: {reason}")]
    InvalidRaster { path: PathBuf, reason: String },

    #[error("non-square pixels ({x} x {y}) are not supported")]
    NonSquarePixels { x: f64, y: f64 },

    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("crs mismatch: source {source_crs:?}, target {target_crs:?}")]
    CrsMismatch { source_crs: String, target_crs: String },

    #[error("band {0:?} has no valid pixels")]
    EmptyBand(String),

    #[error("no band named {0:?}")]
    MissingBand(String),

    #[error("no threshold exists: {0}")]
    DegenerateField(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("nothing to evaluate: {0}")]
    EmptyEvaluation(String),

    #[error("invalid centerline: {0}")]
    Centerline(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid synthetic scene: {0}")]
    Synth(String),

    #[error("invalid split request: {0}")]
    Split(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
