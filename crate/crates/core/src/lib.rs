//! River-width estimation from water masks, classical NDWI/Otsu water segmentation, and the
//! error metrics used to score both tasks.
//!
//! The modules mirror the processing chain: [`raster`] grids and I/O, [`segmentation`] for
//! water masks and mask metrics, [`centerline`] for node/reach geometry and transects,
//! [`width`] for per-node widths and their error statistics, [`synth`] for analytic test
//! scenes, and [`ingest`] for dataset manifests and reach-exclusive splits.

pub mod centerline;
pub mod error;
pub mod ingest;
pub mod numfmt;
pub mod raster;
pub mod segmentation;
pub mod synth;
pub mod width;

pub use error::{Error, Result};
