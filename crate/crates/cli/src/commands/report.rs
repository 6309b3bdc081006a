use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use rivwidth_core::numfmt::sig6;

use crate::config::{set, set_list, ReportConfig};
use crate::provenance;
use crate::{CmdResult, ReportArgs};

/// Fields read back from an eval-width report.
#[derive(Debug, Deserialize)]
struct EvalRow {
    #[serde(default)]
    method: Option<String>,
    n_nodes: usize,
    bias_m: f64,
    pct_bias: Option<f64>,
    mean_abs_m: f64,
    median_abs_m: f64,
}

const COLUMNS: [&str; 6] = ["method", "n_nodes", "bias_m", "pct_bias", "mean_abs_m", "median_abs_m"];

fn load(path: &Path) -> anyhow::Result<(String, EvalRow)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let row: EvalRow = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let name = row.method.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok((name, row))
}

fn cells(name: &str, r: &EvalRow) -> [String; 6] {
    [
        name.to_string(),
        r.n_nodes.to_string(),
        sig6(r.bias_m),
        r.pct_bias.map(sig6).unwrap_or_default(),
        sig6(r.mean_abs_m),
        sig6(r.median_abs_m),
    ]
}

pub fn run(args: ReportArgs, mut cfg: ReportConfig) -> CmdResult {
    set_list(&mut cfg.inputs, args.inputs);
    set(&mut cfg.out_csv, args.out_csv.map(Some));
    set(&mut cfg.out_md, args.out_md.map(Some));
    if cfg.inputs.is_empty() {
        return Err(anyhow::anyhow!("no eval-width reports given").into());
    }
    let out_csv = cfg.out_csv.clone().unwrap_or_else(|| PathBuf::from("report.csv"));
    let (sidecar, prov) = provenance::resolve("report", &cfg)?;

    let mut rows = cfg.inputs.iter().map(|p| load(p)).collect::<anyhow::Result<Vec<_>>>()?;
    rows.sort_by(|(na, a), (nb, b)| a.median_abs_m.total_cmp(&b.median_abs_m).then_with(|| na.cmp(nb)));

    let mut w = csv::Writer::from_path(&out_csv).with_context(|| format!("writing {}", out_csv.display()))?;
    w.write_record(COLUMNS)?;
    for (name, r) in &rows {
        w.write_record(cells(name, r))?;
    }
    w.flush().with_context(|| format!("writing {}", out_csv.display()))?;

    if let Some(md_path) = &cfg.out_md {
        let mut md = String::new();
        writeln!(
            md,
            "| Method | Nodes | Bias (m) | % Bias | Mean abs (m) | Median abs (m) |"
        )
        .unwrap();
        writeln!(md, "|---|---:|---:|---:|---:|---:|").unwrap();
        for (name, r) in &rows {
            let c = cells(&name.replace('|', "\\|"), r);
            writeln!(md, "| {} |", c.join(" | ")).unwrap();
        }
        writeln!(md).unwrap();
        writeln!(
            md,
            "tool version {}, config {}",
            prov.tool_version,
            &prov.config_hash[..12]
        )
        .unwrap();
        std::fs::write(md_path, md).with_context(|| format!("writing {}", md_path.display()))?;
    }
    provenance::write_sidecar(&out_csv, &sidecar)?;
    Ok(())
}
