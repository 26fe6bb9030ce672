//! REST API behaviour the web UI relies on.

mod common;

use std::path::Path;
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use decomind::digest::sha256_hex;
use decomind::model::{DesignRequest, OpeningKind, Wall};
use decomind::service::{api, BackendConfig, DesignJob, JobService, JobState, ServiceConfig};

struct Api {
    _rt: tokio::runtime::Runtime,
    base: String,
    service: JobService,
    http: Client,
}

/// Service with a demo catalog behind a real listener. Workers run only if `workers` is set.
fn api(dir: &Path, workers: bool, tweak: impl FnOnce(&mut ServiceConfig)) -> Api {
    let mut config = ServiceConfig {
        catalog_path: Some(common::demo_catalog(dir)),
        data_dir: dir.join("data"),
        workers: 1,
        ..Default::default()
    };
    config.generation.output_size = (128, 128);
    tweak(&mut config);
    let service = JobService::open(config).unwrap();
    if workers {
        service.start().unwrap();
    }
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (listener, addr) = rt.block_on(api::bind("127.0.0.1:0")).unwrap();
    let app = api::router(service.clone());
    rt.spawn(async move { axum::serve(listener, app).await });
    Api { _rt: rt, base: format!("http://{addr}"), service, http: Client::new() }
}

impl Api {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
    fn get(&self, path: &str) -> reqwest::blocking::Response {
        self.http.get(self.url(path)).send().unwrap()
    }
    fn submit(&self, request: &DesignRequest) -> String {
        let resp = self.http.post(self.url("/api/jobs")).json(request).send().unwrap();
        assert_eq!(resp.status(), 202);
        let body: Value = resp.json().unwrap();
        assert_eq!(body["state"], "queued");
        body["job_id"].as_str().unwrap().to_string()
    }
}

fn bedroom() -> DesignRequest {
    DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"])
        .with_opening(OpeningKind::Door, Wall::North, 0.5, 0.9)
        .with_seed(5)
}

#[test]
fn submit_then_fetch_snapshot_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), false, |_| {});
    let request = bedroom();
    let id = api.submit(&request);

    let job: DesignJob = api.get(&format!("/api/jobs/{id}")).json().unwrap();
    assert_eq!(job.state, JobState::Queued);
    assert_eq!(job.request, request);
    assert!(job.artifacts.is_empty());

    let early = api.get(&format!("/api/jobs/{id}/artifacts/design"));
    assert_eq!(early.status(), 409);
    assert_eq!(early.json::<Value>().unwrap()["error"], "artifact_not_ready");

    api.service.run_job(&id).unwrap();
    let job: DesignJob = api.get(&format!("/api/jobs/{id}")).json().unwrap();
    assert_eq!(job.state, JobState::Done);
    for (kind, artifact) in &job.artifacts {
        let resp = api.get(&format!("/api/jobs/{id}/artifacts/{kind}"));
        assert_eq!(resp.status(), 200, "{kind}");
        assert_eq!(resp.headers()["content-type"], artifact.media_type.as_str());
        assert_eq!(sha256_hex(&resp.bytes().unwrap()), artifact.digest, "{kind}");
    }
    let report = job.report.unwrap();
    let served: Value = api.get(&format!("/api/jobs/{id}/artifacts/report")).json().unwrap();
    assert_eq!(served["final_score"], json!(report.final_score));
}

#[test]
fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), false, |_| {});

    assert_eq!(api.get("/api/jobs/no-such-job").status(), 404);
    let id = api.submit(&bedroom());
    let resp = api.get(&format!("/api/jobs/{id}/artifacts/blueprint"));
    assert_eq!(resp.status(), 404);
    assert_eq!(resp.json::<Value>().unwrap()["error"], "unknown_stage");

    let resp = api
        .http
        .post(api.url("/api/jobs"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .unwrap();
    assert_eq!(resp.status(), 400);

    let mut bad = serde_json::to_value(bedroom()).unwrap();
    bad["room_type"] = json!("spaceship");
    bad["room_width_m"] = json!(-1.0);
    let resp = api.http.post(api.url("/api/jobs")).json(&bad).send().unwrap();
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().unwrap();
    let fields: Vec<&str> =
        body["violations"].as_array().unwrap().iter().map(|v| v["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"room_type") && fields.contains(&"room_width_m"), "{fields:?}");

    assert_eq!(api.get("/api/jobs?state=sleeping").status(), 400);
}

#[test]
fn listing_filters_and_pages() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), false, |_| {});
    let first = api.submit(&bedroom());
    let second = api.submit(&DesignRequest::new("living_room", "classic", 5.0, 4.0, &["sofa"]).with_seed(1));
    let third = api.submit(&bedroom());
    api.service.run_job(&first).unwrap();

    let page: Value = api.get("/api/jobs").json().unwrap();
    assert_eq!(page["total"], 3);
    let ids: Vec<&str> = page["jobs"].as_array().unwrap().iter().map(|j| j["job_id"].as_str().unwrap()).collect();
    assert_eq!(ids, [third.as_str(), second.as_str(), first.as_str()]);

    let done: Value = api.get("/api/jobs?state=done").json().unwrap();
    assert_eq!(done["total"], 1);
    assert_eq!(done["jobs"][0]["job_id"], first);

    let living: Value = api.get("/api/jobs?room_type=Living%20Room").json().unwrap();
    assert_eq!(living["total"], 1);
    assert_eq!(living["jobs"][0]["job_id"], second);

    let paged: Value = api.get("/api/jobs?page=2&page_size=2").json().unwrap();
    assert_eq!((paged["page"].as_u64(), paged["jobs"].as_array().unwrap().len()), (Some(2), 1));
}

#[test]
fn labels_categories_and_health() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), false, |_| {});
    let labels: Value = api.get("/api/labels").json().unwrap();
    assert!(labels["room_types"].as_array().unwrap().contains(&json!("bedroom")));
    assert!(labels["styles"].as_array().unwrap().contains(&json!("modern")));

    let cats: Value = api.get("/api/catalog/categories").json().unwrap();
    assert_eq!(cats["store"], "ikea");
    assert!(cats["categories"].as_array().unwrap().contains(&json!("wardrobe")));

    let health: Value = api.get("/api/health").json().unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["backends"][0]["status"], "healthy");
}

#[test]
fn without_catalog_submissions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), false, |c| c.catalog_path = None);
    let health: Value = api.get("/api/health").json().unwrap();
    assert_eq!(health["status"], "not_ready");
    let resp = api.http.post(api.url("/api/jobs")).json(&bedroom()).send().unwrap();
    assert_eq!(resp.status(), 503);
    assert_eq!(api.get("/api/catalog/categories").status(), 503);
}

#[test]
fn observed_states_only_move_forward() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path(), true, |c| c.backends = vec![BackendConfig::Stub { delay_ms: 300 }]);
    let id = api.submit(&bedroom());
    let mut seen = vec![JobState::Queued];
    let job = common::poll_until(&api.http, &api.base, &id, Duration::from_secs(20), |s| {
        seen.push(s);
        s.is_terminal()
    });
    assert_eq!(job.state, JobState::Done);
    assert!(seen.windows(2).all(|w| w[0] <= w[1]), "{seen:?}");
    assert!(seen.contains(&JobState::Generating));
    let stamps: Vec<_> = job.timestamps.values().collect();
    assert!(stamps.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(job.timestamps.len(), JobState::ALL.len() - 1);
    api.service.shutdown();
}

#[test]
fn ui_directory_is_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<title>decomind</title>").unwrap();
    let api = api(dir.path(), false, |c| c.ui_dir = Some(ui.clone()));
    let resp = api.get("/");
    assert_eq!(resp.status(), 200);
    assert!(resp.text().unwrap().contains("decomind"));
    assert_eq!(api.get("/api/labels").status(), 200);
}
