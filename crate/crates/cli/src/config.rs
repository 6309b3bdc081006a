//! Run configuration. Each subcommand reads an optional `[section]` of a TOML file; command
//! line flags override it, and the fully resolved section is written next to the outputs.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use rivwidth_core::centerline::DEFAULT_HALF_LENGTH;
use rivwidth_core::synth::{SweepSpec, SynthSpec};
use rivwidth_core::width::{WidthMode, DEFAULT_MAX_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMethod {
    #[default]
    Ndwi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Geotiff,
    NpyStack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub rasters: Vec<PathBuf>,
    /// Inferred from each path when unset.
    pub format: Option<InputFormat>,
    pub method: SegmentMethod,
    pub green_band: String,
    pub nir_band: String,
    /// Fixed NDWI threshold; bypasses Otsu.
    pub threshold: Option<f64>,
    pub otsu_bins: usize,
    /// One Otsu threshold over the NDWI values of all rasters instead of one per raster.
    pub global_otsu: bool,
    /// Min-max normalize each band before computing NDWI.
    pub normalize: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            rasters: Vec::new(),
            format: None,
            method: SegmentMethod::Ndwi,
            green_band: "green".into(),
            nir_band: "nir".into(),
            threshold: None,
            otsu_bins: 256,
            global_otsu: false,
            normalize: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WidthsConfig {
    pub mask: Option<PathBuf>,
    pub centerlines: Option<PathBuf>,
    pub half_length: f64,
    pub width_mode: WidthMode,
    pub out: Option<PathBuf>,
    /// Optional GeoJSON with one LineString per transect.
    pub transects_geojson: Option<PathBuf>,
}

impl Default for WidthsConfig {
    fn default() -> Self {
        WidthsConfig {
            mask: None,
            centerlines: None,
            half_length: DEFAULT_HALF_LENGTH,
            width_mode: WidthMode::PixelCount,
            out: None,
            transects_geojson: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSegConfig {
    pub pred: Vec<PathBuf>,
    pub gt: Vec<PathBuf>,
    /// Probability maps, one per prediction, for cross-entropy.
    pub prob: Vec<PathBuf>,
    /// Land-cover maps, one per prediction, for false-positive attribution.
    pub lulc: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalWidthConfig {
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    /// Read predictions from this node-reference field of a manifest instead of a CSV.
    pub pred_field: Option<String>,
    /// Read ground truth from this node-reference field of a manifest instead of a CSV.
    pub gt_field: Option<String>,
    pub max_width: f64,
    /// Drop predictions flagged as truncated or touching nodata.
    pub exclude_flagged: bool,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
}

impl Default for EvalWidthConfig {
    fn default() -> Self {
        EvalWidthConfig {
            pred: None,
            gt: None,
            pred_field: None,
            gt_field: None,
            max_width: DEFAULT_MAX_WIDTH,
            exclude_flagged: false,
            method: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSceneConfig {
    #[serde(flatten)]
    pub spec: SynthSpec,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSweepConfig {
    #[serde(flatten)]
    pub spec: SweepSpec,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub manifest: Option<PathBuf>,
    /// Train, val and test fractions of scenes.
    pub fractions: [f64; 3],
    pub seed: u64,
    /// Validate the manifest's own `split` column instead of drawing a new split.
    pub use_manifest_splits: bool,
    pub out: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            manifest: None,
            fractions: [0.7, 0.1, 0.2],
            seed: 0,
            use_manifest_splits: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub inputs: Vec<PathBuf>,
    pub out_csv: Option<PathBuf>,
    pub out_md: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSections {
    pub scene: SynthSceneConfig,
    pub sweep: SynthSweepConfig,
}

/// Contents of a `--config` file; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub workers: Option<usize>,
    pub segment: SegmentConfig,
    pub widths: WidthsConfig,
    pub eval_seg: EvalSegConfig,
    pub eval_width: EvalWidthConfig,
    pub synth: SynthSections,
    pub split: SplitConfig,
    pub report: ReportConfig,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        check_synth_keys(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

/// Flattened sections cannot deny unknown fields through serde, so `[synth.scene]` and
/// `[synth.sweep]` keys are checked against what their defaults serialize to.
fn check_synth_keys(text: &str) -> anyhow::Result<()> {
    let table: toml::Table = toml::from_str(text)?;
    let Some(synth) = table.get("synth").and_then(toml::Value::as_table) else {
        return Ok(());
    };
    let known = |v: toml::Value, extra: &str| {
        let mut keys: Vec<String> = v.as_table().map(|t| t.keys().cloned().collect()).unwrap_or_default();
        keys.push(extra.to_string());
        keys
    };
    let sections = [
        ("scene", known(toml::Value::try_from(SynthSpec::default())?, "out_dir")),
        ("sweep", known(toml::Value::try_from(SweepSpec::default())?, "out")),
    ];
    for (name, keys) in sections {
        if let Some(section) = synth.get(name).and_then(toml::Value::as_table) {
            if let Some(bad) = section.keys().find(|k| !keys.contains(k)) {
                anyhow::bail!(
                    "unknown field `{bad}` in [synth.{name}], expected one of {}",
                    keys.join(", ")
                );
            }
        }
    }
    Ok(())
}

/// Overwrites `slot` when the flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Replaces a list when the flag list is non-empty.
pub fn set_list<T>(slot: &mut Vec<T>, flag: Vec<T>) {
    if !flag.is_empty() {
        *slot = flag;
    }
}

pub fn required<'a, T>(value: &'a Option<T>, flag: &str) -> anyhow::Result<&'a T> {
    value
        .as_ref()
        .with_context(|| format!("missing {flag} (give the flag or set it in the config file)"))
}
