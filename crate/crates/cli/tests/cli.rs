use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use impactloc::dataset::load_dataset;
use impactloc::num::argsort;
use impactloc::DatasetF64;
use serde_json::Value;

const FAST: &str = r#"{"fit.max_iters": 300}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impactloc"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fails(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {stderr}"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn load(p: &Path) -> DatasetF64 {
    load_dataset(p).unwrap()
}

#[test]
fn simulate_matches_independent_travel_times() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["simulate", "--out-dir", "out"]);
    let ds = load(&d.join("out/ref.csv"));
    assert_eq!(ds.len(), 35);
    // elliptical profile c(θ) = 400 (1 + 0.1 cos 2θ) at 1 kHz, impact 1 at (85, 60)
    let sensors = [
        [40.0, 40.0],
        [250.0, 40.0],
        [250.0, 160.0],
        [40.0, 160.0],
        [110.0, 20.0],
        [215.0, 185.0],
    ];
    let t: Vec<f64> = sensors
        .iter()
        .map(|[sx, sy]| {
            let (dx, dy): (f64, f64) = (sx - 85.0, sy - 60.0);
            let theta = dy.atan2(dx);
            dx.hypot(dy) / (400.0 * (1.0 + 0.1 * (2.0 * theta).cos()))
        })
        .collect();
    let min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let rec = &ds.records()[0];
    assert_eq!(rec.impact_id, "1");
    for (got, want) in rec.tdoa.values().iter().zip(&t) {
        assert!((got - (want - min)).abs() < 1e-9, "{got} vs {}", want - min);
    }
    assert!(d.join("out/manifest_simulate.json").is_file());
}

#[test]
fn temperature_alpha_scales_every_tdoa() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "warm.json",
        r#"{"scenario.temperature_alpha": 1.15, "scenario.condition": "TEM"}"#,
    );
    ok(d, &["simulate", "--out-dir", "out"]);
    ok(
        d,
        &["simulate", "--config", "warm.json", "--out-dir", "out"],
    );
    let a = load(&d.join("out/ref.csv"));
    let b = load(&d.join("out/tem.csv"));
    for (ra, rb) in a.records().iter().zip(b.records()) {
        for (x, y) in ra.tdoa.values().iter().zip(rb.tdoa.values()) {
            assert!((y - 1.15 * x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "bad.json", r#"{"speeed": 3}"#);
    let err = fails(d, &["simulate", "--config", "bad.json", "--out-dir", "out"]);
    assert!(err["error"].as_str().unwrap().contains("speeed"));
}

#[test]
fn extract_round_trip_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["simulate", "--signals", "--out-dir", "out"]);
    ok(
        d,
        &[
            "extract",
            "--signals",
            "out/signals",
            "--output",
            "out/extracted.csv",
            "--out-dir",
            "out",
        ],
    );
    let truth = load(&d.join("out/ref.csv"));
    let got = load(&d.join("out/extracted.csv"));
    assert_eq!(got.len(), 35);
    for r in got.records() {
        let t = truth
            .records()
            .iter()
            .find(|q| q.impact_id == r.impact_id)
            .unwrap();
        assert_eq!(
            argsort(r.tdoa.values()),
            argsort(t.tdoa.values()),
            "impact {}",
            r.impact_id
        );
        for (a, b) in r.tdoa.values().iter().zip(t.tdoa.values()) {
            assert!((a - b).abs() < 0.1, "impact {}: {a} vs {b}", r.impact_id);
        }
    }

    // identical waveforms on every sensor give the zero vector
    let one = d.join("same/REF_1_r1");
    fs::create_dir_all(&one).unwrap();
    let src = d.join("out/signals/REF_1_r1");
    fs::copy(src.join("impact.json"), one.join("impact.json")).unwrap();
    for j in 1..=6 {
        fs::copy(
            src.join("sensor_1.csv"),
            one.join(format!("sensor_{j}.csv")),
        )
        .unwrap();
    }
    ok(
        d,
        &[
            "extract",
            "--signals",
            "same",
            "--output",
            "same.csv",
            "--out-dir",
            "out",
        ],
    );
    let z = load(&d.join("same.csv"));
    assert!(z.records()[0].tdoa.values().iter().all(|&v| v == 0.0));

    fs::remove_file(one.join("sensor_3.csv")).unwrap();
    let err = fails(
        d,
        &[
            "extract",
            "--signals",
            "same",
            "--output",
            "same2.csv",
            "--out-dir",
            "out",
        ],
    );
    let msg = err["error"].as_str().unwrap();
    assert!(msg.contains("sensor 3") && msg.contains("missing"), "{msg}");
}

#[test]
fn train_localise_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "fast.json", FAST);
    ok(d, &["simulate", "--out-dir", "data"]);
    let stdout = ok(
        d,
        &[
            "train",
            "--config",
            "fast.json",
            "--reference",
            "data/ref.csv",
            "--out-dir",
            "m1",
        ],
    );
    assert_eq!(stdout.lines().count(), 3);
    for k in ["rbf", "cos", "comp"] {
        assert!(d.join(format!("m1/model_{k}.json")).is_file());
        assert!(d.join(format!("m1/model_{k}.train.csv")).is_file());
    }
    ok(
        d,
        &[
            "train",
            "--config",
            "fast.json",
            "--reference",
            "data/ref.csv",
            "--out-dir",
            "m2",
        ],
    );
    for k in ["rbf", "cos", "comp"] {
        let a = fs::read(d.join(format!("m1/model_{k}.json"))).unwrap();
        let b = fs::read(d.join(format!("m2/model_{k}.json"))).unwrap();
        assert_eq!(a, b, "model_{k}.json differs between identical runs");
    }

    // noise-free training interpolates, so targets equal to the training points come back
    write(
        d,
        "exact.json",
        r#"{"fit.max_iters": 300, "fit.train_noise": false, "fit.noise_variance": 1e-8}"#,
    );
    ok(
        d,
        &[
            "train",
            "--config",
            "exact.json",
            "--reference",
            "data/ref.csv",
            "--kernels",
            "comp",
            "--out-dir",
            "mx",
        ],
    );
    ok(
        d,
        &[
            "localise",
            "--models",
            "mx",
            "--targets",
            "data/ref.csv",
            "--out-dir",
            "lx",
        ],
    );
    let out = ok(
        d,
        &[
            "evaluate",
            "--predictions",
            "lx/predictions.json",
            "--truth",
            "data/ref.csv",
            "--out-dir",
            "ex",
        ],
    );
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert!(v["mean_error_mm"]["COMP"].as_f64().unwrap() < 1.0, "{v}");

    ok(
        d,
        &[
            "localise",
            "--models",
            "m1",
            "--targets",
            "data/ref.csv",
            "--fuse",
            "--out-dir",
            "loc",
        ],
    );
    let out = ok(
        d,
        &[
            "evaluate",
            "--predictions",
            "loc/predictions.json",
            "--truth",
            "data/ref.csv",
            "--out-dir",
            "ev",
        ],
    );
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert!(v["mean_error_mm"]["BMA"].as_f64().unwrap() < 5.0, "{v}");
    for f in [
        "evaluation.json",
        "results.csv",
        "cdf.csv",
        "cdf.svg",
        "manifest_evaluate.json",
    ] {
        assert!(d.join("ev").join(f).is_file(), "{f}");
    }

    // single-kernel fusion reproduces that kernel
    ok(
        d,
        &[
            "localise",
            "--models",
            "m1/model_comp.json",
            "--targets",
            "data/ref.csv",
            "--fuse",
            "--out-dir",
            "one",
        ],
    );
    let p: Value =
        serde_json::from_str(&fs::read_to_string(d.join("one/predictions.json")).unwrap()).unwrap();
    for t in p["targets"].as_array().unwrap() {
        assert_eq!(t["fused"]["mean"], t["per_kernel"][0]["prediction"]["mean"]);
    }

    // sensor-count mismatch between model and targets
    let err = fails(
        d,
        &[
            "localise",
            "--models",
            "m1",
            "--targets",
            "data/ref.csv",
            "--sensors",
            "1,2,3,4",
            "--out-dir",
            "bad",
        ],
    );
    assert!(err["error"].as_str().unwrap().contains("mismatch"));

    // empty target file
    fs::copy(d.join("data/ref.meta.json"), d.join("data/empty.meta.json")).unwrap();
    write(d, "data/empty.csv", "");
    let err = fails(
        d,
        &[
            "localise",
            "--models",
            "m1",
            "--targets",
            "data/empty.csv",
            "--out-dir",
            "bad",
        ],
    );
    assert!(err["error"].as_str().unwrap().contains("empty"));

    // truth missing some impacts
    let text = fs::read_to_string(d.join("data/ref.csv")).unwrap();
    let short: Vec<&str> = text.lines().take(3).collect();
    write(d, "data/short.csv", &(short.join("\n") + "\n"));
    fs::copy(d.join("data/ref.meta.json"), d.join("data/short.meta.json")).unwrap();
    let err = fails(
        d,
        &[
            "evaluate",
            "--predictions",
            "loc/predictions.json",
            "--truth",
            "data/short.csv",
            "--out-dir",
            "bad",
        ],
    );
    let msg = err["error"].as_str().unwrap();
    assert!(
        msg.contains("without ground truth") && msg.contains("35 (REF rep 1)"),
        "{msg}"
    );
}

#[test]
fn fs_on_constant_column_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "c.meta.json",
        r#"{"plate":{"lx":100,"ly":100,"h":4},"sensors":[[0,0],[100,0],[100,100]],"ids":[]}"#,
    );
    write(
        d,
        "c.csv",
        "impact_id,condition,repetition,x_mm,y_mm,frequency_khz,anchor_index,tdoa_1_ms,tdoa_2_ms,tdoa_3_ms\n\
         1,REF,1,10,20,1,0,0,0.1,0.2\n2,REF,1,20,10,1,0,0,0.2,0.3\n3,REF,1,15,15,1,0,0,0.15,0.4\n",
    );
    write(d, "fast.json", FAST);
    let err = fails(
        d,
        &[
            "train",
            "--config",
            "fast.json",
            "--reference",
            "c.csv",
            "--input-std",
            "fs",
            "--subset",
            "custom:0,1,2",
            "--out-dir",
            "m",
        ],
    );
    let text = err.to_string();
    assert!(text.contains("zero variance in column 1"), "{text}");
}

#[test]
fn report_writes_all_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "fast.json", FAST);
    ok(
        d,
        &[
            "report",
            "--config",
            "fast.json",
            "--fuse",
            "--subset",
            "ri9",
            "--out-dir",
            "r1",
        ],
    );
    ok(
        d,
        &[
            "report",
            "--config",
            "fast.json",
            "--fuse",
            "--subset",
            "ri9",
            "--out-dir",
            "r2",
        ],
    );
    for f in ["report.json", "results.csv", "cdf.csv", "cdf.svg"] {
        assert_eq!(
            fs::read(d.join("r1").join(f)).unwrap(),
            fs::read(d.join("r2").join(f)).unwrap(),
            "{f}"
        );
    }
    let m: Value =
        serde_json::from_str(&fs::read_to_string(d.join("r1/manifest_report.json")).unwrap())
            .unwrap();
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config"]["subset"], "ri9");
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
    let r: Value =
        serde_json::from_str(&fs::read_to_string(d.join("r1/report.json")).unwrap()).unwrap();
    assert_eq!(r["n_reference"], 9);
    assert!(r["notes"][0].as_str().unwrap().contains("numbered from 1"));
}
