use std::path::Path;
use std::process::{Command, Output};

use depthflow::fields::PixelGrid;
use depthflow::generate::find_tuples;
use depthflow::synthetic::write_demo_dataset;

fn depthflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depthflow"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_error(out: &Output) -> String {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn selftest_passes() {
    let out = depthflow(&["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        write_demo_dataset(&dir.path().join("data"), PixelGrid::new(64, 48), 1, 1, 1).unwrap();
    let config = dir.path().join("gen.toml");
    std::fs::write(
        &config,
        "[lateral]\nprobability = { flip = 0.0, rotate = 0.0, shear = 0.0 }\n",
    )
    .unwrap();
    let gen = dir.path().join("gen");
    let v = stdout_json(&depthflow(&[
        "generate",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&gen),
        "--seed",
        "3",
        "--workers",
        "2",
    ]));
    assert_eq!(v["tuples"], 6);
    assert_eq!(v["samples_ok"], 2);

    let aug = dir.path().join("aug");
    let v = stdout_json(&depthflow(&[
        "augment",
        "--in",
        s(&gen),
        "--out",
        s(&aug),
        "--seed",
        "5",
    ]));
    assert_eq!(v["tuples"], 6);
    assert_eq!(find_tuples(&aug).unwrap().len(), 6);

    let flow = gen.join("mono_000/mono_f01_0/flow.flo");
    let v = stdout_json(&depthflow(&["classify", "--flow", s(&flow)]));
    let total: f64 = v["posterior"]
        .as_object()
        .unwrap()
        .values()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(v["predicted"].is_string());

    let v = stdout_json(&depthflow(&[
        "eval",
        "--pred",
        s(&gen),
        "--gt",
        s(&gen),
        "--format",
        "flo",
    ]));
    assert_eq!(v["epe"], 0.0);
    assert_eq!(v["f1_all"], 0.0);
    assert_eq!(v["files"], 6);

    let png = dir.path().join("flow.png");
    assert!(
        depthflow(&["inspect", "--flow", s(&flow), "--out", s(&png)])
            .status
            .success()
    );
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (64, 48));
}

#[test]
fn failures_report_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        write_demo_dataset(&dir.path().join("data"), PixelGrid::new(32, 24), 1, 1, 0).unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "unknown_key = 1\n").unwrap();
    let out = depthflow(&[
        "generate",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(stderr_error(&out), "config");

    let out = depthflow(&["classify", "--flow", s(&dir.path().join("missing.flo"))]);
    assert_eq!(stderr_error(&out), "io");

    let bad = dir.path().join("bad.flo");
    std::fs::write(&bad, b"nope, not a flow file").unwrap();
    let out = depthflow(&[
        "inspect",
        "--flow",
        s(&bad),
        "--out",
        s(&dir.path().join("x.png")),
    ]);
    assert!(!stderr_error(&out).is_empty());
}
