//! The job service behind its REST API: submit a request, poll it to done,
//! fetch the artifacts.
//!
//! ```text
//! cargo run --example job_service
//! ```

use std::time::{Duration, Instant};

use decomind::catalog::{build_catalog, persist_index, BuildOptions};
use decomind::fixtures::write_demo_catalog;
use decomind::model::DesignRequest;
use decomind::retrieval::StubEmbeddingProvider;
use decomind::service::{api, DesignJob, JobService, JobState, ServiceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (index, _) = build_catalog(
        &write_demo_catalog(&dir.path().join("images"), 3)?,
        "ikea",
        &BuildOptions::default(),
        &StubEmbeddingProvider::default(),
    )?;
    persist_index(&index, &dir.path().join("catalog.dcm"))?;

    let config = ServiceConfig {
        catalog_path: Some(dir.path().join("catalog.dcm")),
        data_dir: dir.path().join("data"),
        ..Default::default()
    };
    let service = JobService::open(config)?;
    service.start()?;

    let rt = tokio::runtime::Runtime::new()?;
    let (listener, addr) = rt.block_on(api::bind("127.0.0.1:0"))?;
    rt.spawn(api::serve(service.clone(), listener));
    let base = format!("http://{addr}/api");
    println!("serving on {base}");

    let http = reqwest::blocking::Client::new();
    let labels: serde_json::Value = http.get(format!("{base}/labels")).send()?.json()?;
    println!("labels: {labels}");

    let request = DesignRequest::new("living_room", "minimalist", 5.0, 4.0, &["sofa", "coffee_table", "tv_stand"]);
    let submitted: serde_json::Value = http.post(format!("{base}/jobs")).json(&request).send()?.json()?;
    let job_id = submitted["job_id"].as_str().unwrap_or_default().to_string();
    println!("submitted {job_id}");

    let started = Instant::now();
    let job = loop {
        let job: DesignJob = http.get(format!("{base}/jobs/{job_id}")).send()?.json()?;
        println!("  {:>6.0} ms  {}", started.elapsed().as_secs_f64() * 1e3, job.state);
        if job.state.is_terminal() {
            break job;
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    assert_eq!(job.state, JobState::Done);
    let report = job.report.expect("done jobs carry a report");
    println!("score {:.2} ({} / {})", report.final_score, report.predicted_room_type, report.predicted_style);

    for (stage, artifact) in &job.artifacts {
        let bytes = http.get(format!("{base}/jobs/{job_id}/artifacts/{stage}")).send()?.bytes()?;
        println!("  {stage:<14} {:>7} bytes  {}", bytes.len(), &artifact.digest[..16]);
    }
    let page: serde_json::Value = http.get(format!("{base}/jobs?state=done")).send()?.json()?;
    println!("done jobs: {}", page["total"]);
    service.shutdown();
    Ok(())
}
