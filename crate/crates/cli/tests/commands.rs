use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rivwidth_core::raster::{write_mask_geotiff, write_npy_stack, Band, GridGeometry, Plane, Raster, WaterMask};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rivwidth"));
    c.env_remove("RIVER_NUM_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "scene", "--out-dir", name, "--scene-px", "200"];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join(name)
}

#[test]
fn noiseless_scene_segments_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "sc", &["--width", "45", "--orientation", "0.6"]);
    ok(d, &["segment", "sc/image.tif", "-o", "seg"]);
    ok(
        d,
        &[
            "eval-seg",
            "--pred",
            "seg/image_mask.tif",
            "--gt",
            "sc/gt_mask.tif",
            "-o",
            "es.json",
        ],
    );
    let report = json(d.join("es.json"));
    assert_eq!(report["overall"]["f1"], 1.0);
    assert_eq!(report["overall"]["fp"], 0);
    assert_eq!(
        json(d.join("seg/segment.json"))["scenes"][0]["threshold_source"],
        "otsu"
    );
    assert!(d.join("seg/image_ndwi.tif").exists());
    assert!(d.join("seg/run_config.toml").exists());
}

#[test]
fn fixed_threshold_bypasses_otsu() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "sc", &[]);
    ok(d, &["segment", "sc/image", "-t", "0.0", "-o", "seg"]);
    let s = &json(d.join("seg/segment.json"))["scenes"][0];
    assert_eq!(s["threshold_source"], "fixed");
    assert_eq!(s["threshold"], 0.0);
}

#[test]
fn all_nodata_raster_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = GridGeometry::new(0.0, 30.0, 3.0, 10, 10, "EPSG:32615").unwrap();
    let band = |name: &str| Band {
        name: name.into(),
        values: Plane::filled(10, 10, 0.0),
    };
    let r = Raster::new(g, vec![band("green"), band("nir")], Plane::filled(10, 10, false)).unwrap();
    write_npy_stack(&d.join("empty"), &r, Some(-1.0)).unwrap();
    let out = run(d, &["segment", "empty", "-o", "seg"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no valid"), "{stderr}");
}

#[test]
fn widths_cover_every_node_and_honor_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "sc", &["--width", "60"]);
    let n_nodes = json(d.join("sc/scene.json"))["n_nodes"].as_u64().unwrap() as usize;
    let args = [
        "widths",
        "--mask",
        "sc/gt_mask.tif",
        "--centerlines",
        "sc/centerline.geojson",
    ];
    ok(
        d,
        &[&args[..], &["-o", "a.csv", "--width-mode", "contiguous-run"]].concat(),
    );
    let text = std::fs::read_to_string(d.join("a.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), n_nodes);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("contiguous-run")));

    ok(d, &[&args[..], &["-o", "b.csv"]].concat());
    ok(d, &[&args[..], &["-o", "c.csv"]].concat());
    assert_eq!(
        std::fs::read(d.join("b.csv")).unwrap(),
        std::fs::read(d.join("c.csv")).unwrap()
    );
    assert!(std::fs::read_to_string(d.join("b.csv"))
        .unwrap()
        .contains(",pixel-count,"));
}

#[test]
fn eval_width_identity_and_hand_case() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("pred.csv"), "node_id,width_m\na,50\nb,60\n").unwrap();
    std::fs::write(d.join("gt.csv"), "node_id,width_m\nb,80\na,40\nc,30\n").unwrap();

    ok(
        d,
        &["eval-width", "--pred", "gt.csv", "--gt", "gt.csv", "-o", "same.json"],
    );
    let same = json(d.join("same.json"));
    for k in ["bias_m", "pct_bias", "mean_abs_m", "median_abs_m"] {
        assert_eq!(same[k], 0.0, "{k}");
    }

    ok(
        d,
        &["eval-width", "--pred", "pred.csv", "--gt", "gt.csv", "-o", "hand.json"],
    );
    let hand = json(d.join("hand.json"));
    assert_eq!(hand["bias_m"], -5.0);
    assert_eq!(hand["pct_bias"], 0.0);
    assert_eq!(hand["mean_abs_m"], 15.0);
    assert_eq!(hand["median_abs_m"], 15.0);
    assert_eq!(hand["n_missing_pred"], 1);
    assert_eq!(hand["method"], "pred");
}

#[test]
fn eval_width_cutoff_drops_wide_reference_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut gt = String::from("node_id,width_m\n");
    let mut pred = String::from("node_id,width_m\n");
    for i in 0..445 {
        let w = 20.0 + (i as f64 * 37.0) % 700.0;
        gt.push_str(&format!("n{i},{w}\n"));
        pred.push_str(&format!("n{i},{}\n", w + 3.0));
    }
    std::fs::write(d.join("gt.csv"), gt).unwrap();
    std::fs::write(d.join("pred.csv"), pred).unwrap();
    ok(
        d,
        &["eval-width", "--pred", "pred.csv", "--gt", "gt.csv", "-o", "e.json"],
    );
    let e = json(d.join("e.json"));
    let n = e["n_nodes"].as_u64().unwrap();
    let excluded = e["n_excluded_gt_over_max"].as_u64().unwrap();
    assert!(n <= 445 && excluded > 0);
    assert_eq!(n + excluded, 445);
    assert_eq!(e["median_abs_m"], 3.0);
}

#[test]
fn eval_width_exclude_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("pred.csv"),
        "node_id,width_m,flags\na,50,\nb,10,truncated_at_boundary\nc,0,no_water\n",
    )
    .unwrap();
    std::fs::write(d.join("gt.csv"), "node_id,width_m\na,50\nb,80\nc,20\n").unwrap();
    ok(
        d,
        &[
            "eval-width",
            "--pred",
            "pred.csv",
            "--gt",
            "gt.csv",
            "--exclude-flagged",
            "-o",
            "e.json",
        ],
    );
    let e = json(d.join("e.json"));
    assert_eq!(e["n_flagged"], 1);
    assert_eq!(e["n_nodes"], 2);
    assert_eq!(e["mean_abs_m"], 10.0);
}

#[test]
fn eval_width_reads_manifest_reference_fields() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("m.json"),
        r#"[{"scene_id": "s1", "acquisition_time": "t", "planetscope_path": "p", "label_path": "l",
             "reach_ids": ["r"], "node_refs": [{"node_id": "a", "swot_width": 42.0, "sword_landsat_width": 50.0},
                                                 {"node_id": "b", "swot_width": 58.0}]}]"#,
    )
    .unwrap();
    std::fs::write(d.join("pred.csv"), "node_id,width_m\na,40\nb,60\n").unwrap();
    ok(
        d,
        &[
            "eval-width",
            "--pred",
            "pred.csv",
            "--gt",
            "m.json",
            "--gt-field",
            "swot_width",
            "-o",
            "e.json",
        ],
    );
    let e = json(d.join("e.json"));
    assert_eq!(e["n_nodes"], 2);
    assert_eq!(e["mean_abs_m"], 2.0);
    ok(
        d,
        &[
            "eval-width",
            "--pred",
            "m.json",
            "--pred-field",
            "sword_landsat_width",
            "--gt",
            "m.json",
            "--gt-field",
            "swot_width",
            "-o",
            "f.json",
        ],
    );
    let f = json(d.join("f.json"));
    assert_eq!(f["n_nodes"], 1);
    assert_eq!(f["bias_m"], 8.0);
    let bad = run(
        d,
        &[
            "eval-width",
            "--pred",
            "pred.csv",
            "--gt",
            "m.json",
            "--gt-field",
            "bogus",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

fn eval_json(d: &Path, name: &str, method: Option<&str>, median: f64) {
    let mut v = serde_json::json!({
        "n_nodes": 10, "bias_m": 1.5, "pct_bias": null, "mean_abs_m": median + 1.0, "median_abs_m": median,
    });
    if let Some(m) = method {
        v["method"] = m.into();
    }
    std::fs::write(d.join(name), v.to_string()).unwrap();
}

#[test]
fn report_sorts_by_median_then_name() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    eval_json(d, "zeta.json", None, 7.2);
    eval_json(d, "b.json", Some("alpha"), 7.2);
    eval_json(d, "c.json", Some("ndwi"), 3.0);
    ok(
        d,
        &[
            "report",
            "zeta.json",
            "b.json",
            "c.json",
            "--out-csv",
            "r.csv",
            "--out-md",
            "r.md",
        ],
    );
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["ndwi", "alpha", "zeta"]);
    assert!(csv.lines().nth(1).unwrap().ends_with(",3"));
    let md = std::fs::read_to_string(d.join("r.md")).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| ")).count(), 4);

    ok(d, &["report", "c.json", "--out-csv", "one.csv"]);
    assert_eq!(std::fs::read_to_string(d.join("one.csv")).unwrap().lines().count(), 2);
}

fn manifest_csv(d: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
    let mut text = String::from("scene_id,acquisition_time,planetscope_path,label_path,reach_ids,split\n");
    for (scene, reaches, split) in rows {
        text.push_str(&format!(
            "{scene},2023-01-01,{scene}.tif,{scene}_l.tif,{reaches},{split}\n"
        ));
    }
    let p = d.join("m.csv");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn split_is_reach_exclusive_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows: Vec<(String, String)> = (0..60)
        .map(|i| {
            (
                format!("s{i:02}"),
                format!("r{}", i % 17) + if i % 9 == 0 { ";r3" } else { "" },
            )
        })
        .collect();
    let rows: Vec<(&str, &str, &str)> = rows.iter().map(|(s, r)| (s.as_str(), r.as_str(), "")).collect();
    manifest_csv(d, &rows);
    ok(d, &["split", "--manifest", "m.csv", "--seed", "4", "-o", "a.csv"]);
    ok(d, &["split", "--manifest", "m.csv", "--seed", "4", "-o", "b.csv"]);
    let a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 18);
    assert!(a.starts_with("reach_id,split\n"));
}

#[test]
fn inconsistent_manifest_split_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    manifest_csv(
        d,
        &[("s1", "r1", "train"), ("s2", "r1;r2", "test"), ("s3", "r2", "test")],
    );
    let out = run(
        d,
        &["split", "--manifest", "m.csv", "--use-manifest-splits", "-o", "s.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reach r1"));

    manifest_csv(
        d,
        &[("s1", "r1", "train"), ("s2", "r1;r2", "train"), ("s3", "r3", "test")],
    );
    ok(
        d,
        &["split", "--manifest", "m.csv", "--use-manifest-splits", "-o", "s.csv"],
    );
    assert_eq!(
        std::fs::read_to_string(d.join("s.csv")).unwrap(),
        "reach_id,split\nr1,train\nr2,train\nr3,test\n"
    );
}

#[test]
fn config_file_is_overridden_by_flags_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "sc", &["--width", "30"]);
    std::fs::write(
        d.join("run.toml"),
        "workers = 2\n[widths]\nmask = \"sc/gt_mask.tif\"\ncenterlines = \"sc/centerline.geojson\"\nhalf_length = 100.0\nout = \"cfg.csv\"\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "widths", "--half-length", "150"]);
    let sidecar = std::fs::read_to_string(d.join("cfg.csv.run_config.toml")).unwrap();
    assert!(sidecar.contains("half_length = 150.0"), "{sidecar}");
    assert!(sidecar.contains("command = \"widths\""));

    std::fs::write(d.join("bad.toml"), "[widths]\nhalf_lenght = 1.0\n").unwrap();
    assert_eq!(run(d, &["--config", "bad.toml", "widths"]).status.code(), Some(2));
}

#[test]
fn worker_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("RIVER_NUM_WORKERS", "many")
        .args(["synth", "scene", "--out-dir", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .current_dir(dir.path())
        .env("RIVER_NUM_WORKERS", "1")
        .args(["synth", "scene", "--out-dir", "x", "--scene-px", "50"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn eval_seg_resamples_and_attributes_false_positives() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 10 m prediction over a 30 m × 30 m area; 5 m ground truth on the same extent
    let coarse = GridGeometry::new(0.0, 30.0, 10.0, 3, 3, "EPSG:32615").unwrap();
    let fine = GridGeometry::new(0.0, 30.0, 5.0, 6, 6, "EPSG:32615").unwrap();
    let pred = Plane::from_vec(3, 3, vec![true, true, false, false, true, false, false, false, false]).unwrap();
    write_mask_geotiff(
        &d.join("pred.tif"),
        &WaterMask::all_valid(coarse.clone(), pred).unwrap(),
    )
    .unwrap();
    let gt = Plane::from_fn(6, 6, |r, c| r < 2 && c < 2);
    write_mask_geotiff(&d.join("gt.tif"), &WaterMask::all_valid(fine, gt).unwrap()).unwrap();
    // land cover: cropland everywhere except built-up in the top-right block
    let lulc = Plane::from_vec(3, 3, vec![40.0, 50.0, 40.0, 40.0, 40.0, 40.0, 40.0, 40.0, 40.0]).unwrap();
    let r = Raster::new(
        coarse,
        vec![Band {
            name: "lc".into(),
            values: lulc,
        }],
        Plane::filled(3, 3, true),
    )
    .unwrap();
    write_npy_stack(&d.join("lulc"), &r, None).unwrap();

    ok(
        d,
        &[
            "eval-seg", "--pred", "pred.tif", "--gt", "gt.tif", "--lulc", "lulc", "-o", "e.json",
        ],
    );
    let e = json(d.join("e.json"));
    let s = &e["scenes"][0];
    assert_eq!(s["resampled"], true);
    assert_eq!(s["metrics"]["tp"], 4);
    assert_eq!(s["metrics"]["fp"], 8);
    assert_eq!(s["metrics"]["fn"], 0);
    assert_eq!(e["fp_attribution"]["Built-up"], 0.5);
    assert_eq!(e["fp_attribution"]["Cropland"], 0.5);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "sweep",
            "--widths",
            "30,90",
            "--orientations",
            "3",
            "--trials",
            "1",
            "--scene-extent",
            "600",
            "--half-length",
            "200",
            "-o",
            "s.csv",
        ],
    );
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("width_m,orientation_rad,pixel_size,"));
}

#[test]
fn missing_required_flag_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["widths", "--mask", "m.tif"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--centerlines"));
}
