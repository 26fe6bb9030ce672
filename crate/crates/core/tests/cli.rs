//! The `decomind` binary end to end.

mod common;

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use decomind::catalog::load_index;
use decomind::fixtures::write_demo_catalog;
use decomind::model::{DesignRequest, ExclusionReason, FurnitureSelection, OpeningKind, Wall};
use decomind::service::LayoutMeta;

fn decomind<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(common::bin()).args(args).env("DECOMIND_LOG", "warn").output().unwrap()
}

fn ok(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_request(dir: &Path, request: &DesignRequest) -> PathBuf {
    let path = dir.join("request.json");
    std::fs::write(&path, serde_json::to_vec(request).unwrap()).unwrap();
    path
}

fn request() -> DesignRequest {
    DesignRequest::new("bedroom", "minimalist", 4.0, 3.5, &["bed", "nightstand"])
        .with_opening(OpeningKind::Door, Wall::South, 0.4, 0.9)
        .with_seed(8)
}

#[test]
fn catalog_retrieve_layout_chain() {
    let dir = tempfile::tempdir().unwrap();
    let images = write_demo_catalog(&dir.path().join("images"), 2).unwrap();
    let catalog = dir.path().join("catalog.dcm");
    let summary =
        ok(&decomind(&["catalog", "build", "--root", s(&images), "--out", s(&catalog), "--scene-threshold", "0.5"]));
    assert_eq!(summary["assets"], 27);
    assert_eq!(summary["active_assets"], 25);
    let index = load_index(&catalog).unwrap();
    assert!(index.active_assets().all(|a| a.has_alpha));

    let req = write_request(dir.path(), &request());
    let selection_path = dir.path().join("selection.json");
    ok(&decomind(&["retrieve", "--index", s(&catalog), "--request", s(&req), "--out", s(&selection_path)]));
    let selection: FurnitureSelection = serde_json::from_slice(&std::fs::read(&selection_path).unwrap()).unwrap();
    assert_eq!(selection.picks["bed"].len(), 1);
    assert_eq!(index.asset(&selection.picks["bed"][0].asset_id).unwrap().category, "bed");

    let layout = dir.path().join("layout.png");
    ok(&decomind(&["layout", "render", "--request", s(&req), "--selection", s(&selection_path), "--out", s(&layout)]));
    let img = image::open(&layout).unwrap();
    assert_eq!((img.width(), img.height()), (400, 350));
    let meta: LayoutMeta = serde_json::from_slice(&std::fs::read(layout.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta.unplaceable.len(), 0);
}

#[test]
fn no_matting_keeps_opaque_images() {
    let dir = tempfile::tempdir().unwrap();
    let images = write_demo_catalog(&dir.path().join("images"), 3).unwrap();
    let catalog = dir.path().join("catalog.dcm");
    ok(&decomind(&["catalog", "build", "--no-matting", "--root", s(&images), "--out", s(&catalog)]));
    let index = load_index(&catalog).unwrap();
    assert!(index.active_assets().all(|a| !a.has_alpha));
    assert_eq!(index.assets.iter().filter(|a| a.exclusion_reason == ExclusionReason::SceneImage).count(), 2);
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = common::demo_catalog(dir.path());
    let req = write_request(dir.path(), &request());
    let out = dir.path().join("out");
    let summary = ok(&decomind(&["run", "--request", s(&req), "--out", s(&out), "--catalog", s(&catalog)]));
    assert_eq!(summary["state"], "done");
    for name in ["selection.json", "layout.png", "prompt.json", "design.png", "report.json", "job.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}

#[test]
fn invalid_request_exits_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = common::demo_catalog(dir.path());
    let mut bad = serde_json::to_value(request()).unwrap();
    bad["room_depth_m"] = Value::from(0.0);
    let req = dir.path().join("bad.json");
    std::fs::write(&req, bad.to_string()).unwrap();

    let out = decomind(&["run", "--request", s(&req), "--out", s(&dir.path().join("out")), "--catalog", s(&catalog)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("room_depth_m"));

    let out = decomind(&["retrieve", "--index", s(&catalog), "--request", s(&req)]);
    assert!(!out.status.success());
}

#[test]
fn serve_rejects_a_broken_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("service.toml");
    std::fs::write(&config, "workers = \"many\"\n").unwrap();
    let out = decomind(&["serve", "--config", s(&config)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("workers"));
}
