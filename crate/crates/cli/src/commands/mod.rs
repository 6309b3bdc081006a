pub mod eval_seg;
pub mod eval_width;
pub mod report;
pub mod segment;
pub mod split;
pub mod synth;
pub mod widths;

use std::path::{Path, PathBuf};

use anyhow::Context;

pub(crate) fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// File stem for naming outputs; npy stacks are named after their directory.
pub(crate) fn input_stem(path: &Path) -> String {
    let named = if path.is_dir() {
        path
    } else if path.file_name().is_some_and(|n| n == "geometry.json") {
        path.parent().unwrap_or(path)
    } else {
        return path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "raster".into());
    };
    named
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raster".into())
}

pub(crate) fn out_or_default(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(default))
}
