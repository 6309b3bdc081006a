use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ASSIGNABLE: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::InvalidValue(format!("unknown split {other:?}"))),
        }
    }
}

/// Reference widths of one node, in meters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRef {
    pub node_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sword_landsat_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swot_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentinel_width: Option<f64>,
}

/// One co-registered scene of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub scene_id: String,
    pub acquisition_time: String,
    pub planetscope_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentinel_path: Option<PathBuf>,
    pub label_path: PathBuf,
    pub reach_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub node_refs: Vec<NodeRef>,
    #[serde(default)]
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DanglingPath {
    pub scene_id: String,
    pub field: &'static str,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<SceneRecord>,
    /// Referenced files that do not exist (relative paths resolved against the manifest).
    pub dangling: Vec<DanglingPath>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonManifest {
    Wrapped { scenes: Vec<SceneRecord> },
    Bare(Vec<SceneRecord>),
}

/// CSV manifests carry the same fields minus `node_refs`; `reach_ids` is `;`-separated.
#[derive(Deserialize)]
struct CsvRow {
    scene_id: String,
    acquisition_time: String,
    planetscope_path: PathBuf,
    #[serde(default)]
    sentinel_path: Option<String>,
    label_path: PathBuf,
    reach_ids: String,
    #[serde(default)]
    split: Option<String>,
}

fn manifest_err(path: &Path, msg: impl fmt::Display) -> Error {
    Error::Manifest(format!("{}: {msg}", path.display()))
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let records = if is_csv { read_csv(path)? } else { read_json(path)? };
    validate_records(path, &records)?;

    let base = path.parent().unwrap_or(Path::new("."));
    let mut dangling = Vec::new();
    for r in &records {
        let fields = [
            ("planetscope_path", Some(&r.planetscope_path)),
            ("sentinel_path", r.sentinel_path.as_ref()),
            ("label_path", Some(&r.label_path)),
        ];
        for (field, p) in fields {
            if let Some(p) = p {
                if !base.join(p).exists() {
                    dangling.push(DanglingPath {
                        scene_id: r.scene_id.clone(),
                        field,
                        path: p.clone(),
                    });
                }
            }
        }
    }
    Ok(Manifest { records, dangling })
}

fn read_json(path: &Path) -> Result<Vec<SceneRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: JsonManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(match parsed {
        JsonManifest::Wrapped { scenes } => scenes,
        JsonManifest::Bare(scenes) => scenes,
    })
}

fn read_csv(path: &Path) -> Result<Vec<SceneRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| manifest_err(path, format_args!("row {}: {e}", i + 1)))?;
        let split = match row.split.as_deref() {
            Some(s) => s
                .parse()
                .map_err(|e| manifest_err(path, format_args!("row {}: {e}", i + 1)))?,
            None => Split::Unassigned,
        };
        records.push(SceneRecord {
            scene_id: row.scene_id,
            acquisition_time: row.acquisition_time,
            planetscope_path: row.planetscope_path,
            sentinel_path: row.sentinel_path.filter(|s| !s.is_empty()).map(PathBuf::from),
            label_path: row.label_path,
            reach_ids: row
                .reach_ids
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            node_refs: Vec::new(),
            split,
        });
    }
    Ok(records)
}

fn validate_records(path: &Path, records: &[SceneRecord]) -> Result<()> {
    let mut ids = HashSet::new();
    for r in records {
        if r.scene_id.is_empty() {
            return Err(manifest_err(path, "empty scene_id"));
        }
        if !ids.insert(r.scene_id.as_str()) {
            return Err(manifest_err(path, format_args!("duplicate scene_id {}", r.scene_id)));
        }
        if r.reach_ids.is_empty() {
            return Err(manifest_err(
                path,
                format_args!("scene {} references no reach", r.scene_id),
            ));
        }
        for n in &r.node_refs {
            for (name, w) in [
                ("sword_landsat_width", n.sword_landsat_width),
                ("swot_width", n.swot_width),
                ("sentinel_width", n.sentinel_width),
            ] {
                if let Some(w) = w {
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(manifest_err(
                            path,
                            format_args!("scene {} node {}: {name} must be > 0, got {w}", r.scene_id, n.node_id),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const TWO_SCENES: &str = r#"{"scenes": [
        {"scene_id": "s1", "acquisition_time": "2023-05-01T16:00:00Z",
         "planetscope_path": "ps/s1.tif", "label_path": "labels/s1.tif",
         "reach_ids": ["74265000061"],
         "node_refs": [{"node_id": "74265000060011", "swot_width": 41.9, "sword_landsat_width": 80.0}]},
        {"scene_id": "s2", "acquisition_time": "2023-06-01T16:00:00Z",
         "planetscope_path": "ps/s2.tif", "sentinel_path": "s2/s2.tif", "label_path": "labels/s2.tif",
         "reach_ids": ["74265000071", "74265000081"], "split": "test"}
    ]}"#;

    #[test]
    fn two_scene_json() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("ps")).unwrap();
        std::fs::write(dir.path().join("ps/s1.tif"), b"").unwrap();
        let m = load_manifest(&write(dir.path(), "m.json", TWO_SCENES)).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].node_refs[0].swot_width, Some(41.9));
        assert_eq!(m.records[1].split, Split::Test);
        assert_eq!(m.records[0].split, Split::Unassigned);
        // everything but ps/s1.tif is missing
        assert_eq!(m.dangling.len(), 4);
        assert_eq!(m.dangling[0].field, "label_path");
    }

    #[test]
    fn duplicate_scene_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let text = TWO_SCENES.replace("\"s2\"", "\"s1\"");
        let err = load_manifest(&write(dir.path(), "m.json", &text)).unwrap_err();
        assert!(err.to_string().contains("duplicate scene_id s1"), "{err}");
    }

    #[test]
    fn non_positive_width_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = TWO_SCENES.replace("41.9", "0.0");
        assert!(load_manifest(&write(dir.path(), "m.json", &text)).is_err());
    }

    #[test]
    fn csv_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let text = "scene_id,acquisition_time,planetscope_path,sentinel_path,label_path,reach_ids,split\n\
                    a,2023-01-01,a.tif,,la.tif,r1;r2,train\n\
                    b,2023-01-02,b.tif,sb.tif,lb.tif,r3,\n";
        let m = load_manifest(&write(dir.path(), "m.csv", text)).unwrap();
        assert_eq!(m.records[0].reach_ids, ["r1", "r2"]);
        assert_eq!(m.records[0].sentinel_path, None);
        assert_eq!(m.records[0].split, Split::Train);
        assert_eq!(m.records[1].split, Split::Unassigned);
        assert_eq!(m.records[1].sentinel_path, Some(PathBuf::from("sb.tif")));
    }

    #[test]
    fn malformed_csv_row() {
        let dir = tempfile::tempdir().unwrap();
        let text = "scene_id,acquisition_time,planetscope_path,label_path,reach_ids\na,t,p.tif\n";
        let err = load_manifest(&write(dir.path(), "m.csv", text)).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn scene_without_reach_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = "scene_id,acquisition_time,planetscope_path,label_path,reach_ids\na,t,p.tif,l.tif,\n";
        assert!(load_manifest(&write(dir.path(), "m.csv", text)).is_err());
    }
}
