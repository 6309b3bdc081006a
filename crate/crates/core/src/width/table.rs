use std::collections::HashSet;
use std::path::Path;

use super::estimate::{WidthEstimate, WidthFlags};
use crate::error::{Error, Result};
use crate::numfmt::sig6;

pub const WIDTHS_HEADER: [&str; 6] = ["node_id", "reach_id", "width_m", "water_px", "mode", "flags"];

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `node_id,reach_id,width_m,water_px,mode,flags` rows in the given order.
pub fn write_widths_csv(path: &Path, estimates: &[WidthEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(WIDTHS_HEADER).map_err(|e| csv_err(path, e))?;
    for e in estimates {
        w.write_record([
            e.node_id.as_str(),
            e.reach_id.as_str(),
            &sig6(e.width_m),
            &e.water_px.to_string(),
            e.mode.as_str(),
            &e.flags.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a width table: either an estimate file or a reference (ground-truth) file.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthRow {
    pub node_id: String,
    pub reach_id: Option<String>,
    pub width_m: f64,
    pub flags: WidthFlags,
}

/// Reads a CSV with at least `node_id` and `width_m` columns; `reach_id` and `flags` are
/// optional. Node ids must be unique.
pub fn read_width_table(path: &Path) -> Result<Vec<WidthRow>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::InvalidValue(format!("{}: missing column {name:?}", path.display()));
    let node_col = column("node_id").ok_or_else(|| missing("node_id"))?;
    let width_col = column("width_m").ok_or_else(|| missing("width_m"))?;
    let reach_col = column("reach_id");
    let flags_col = column("flags");

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let bad = |what: String| Error::InvalidValue(format!("{} line {line}: {what}", path.display()));
        let node_id = record.get(node_col).unwrap_or_default().to_string();
        if node_id.is_empty() {
            return Err(bad("empty node_id".into()));
        }
        let raw = record.get(width_col).unwrap_or_default();
        let width_m: f64 = raw
            .parse()
            .map_err(|_| bad(format!("width_m {raw:?} is not a number")))?;
        let flags = match flags_col.and_then(|c| record.get(c)) {
            Some(f) => f.parse().map_err(|e: Error| bad(e.to_string()))?,
            None => WidthFlags::default(),
        };
        if !seen.insert(node_id.clone()) {
            return Err(bad(format!("duplicate node_id {node_id}")));
        }
        rows.push(WidthRow {
            node_id,
            reach_id: reach_col.and_then(|c| record.get(c)).map(str::to_string),
            width_m,
            flags,
        });
    }
    Ok(rows)
}
