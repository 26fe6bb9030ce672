#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use decomind::catalog::{build_catalog, persist_index, BuildOptions};
use decomind::fixtures::write_demo_catalog;
use decomind::retrieval::StubEmbeddingProvider;
use decomind::service::{DesignJob, JobState};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_decomind"))
}

/// Demo catalog tree embedded with the default stub provider, persisted to `<dir>/catalog.dcm`.
pub fn demo_catalog(dir: &Path) -> PathBuf {
    let root = write_demo_catalog(&dir.join("images"), 11).unwrap();
    let (index, _) = build_catalog(&root, "ikea", &BuildOptions::default(), &StubEmbeddingProvider::default()).unwrap();
    let path = dir.join("catalog.dcm");
    persist_index(&index, &path).unwrap();
    path
}

pub fn write_config(dir: &Path, catalog: &Path, extra: &str) -> PathBuf {
    let path = dir.join("service.toml");
    let text = format!(
        "catalog_path = {:?}\ndata_dir = {:?}\nlisten = \"127.0.0.1:0\"\n{extra}\n",
        catalog.display().to_string(),
        dir.join("data").display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

/// A `decomind serve` child process, killed on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn spawn(config: &Path) -> Server {
        let mut child = Command::new(bin())
            .args(["serve", "--config"])
            .arg(config)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn decomind serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server { child, base }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

pub fn get_job(http: &reqwest::blocking::Client, base: &str, id: &str) -> DesignJob {
    http.get(format!("{base}/api/jobs/{id}")).send().unwrap().json().unwrap()
}

/// Poll until `done(state)` or the timeout; returns the last snapshot.
pub fn poll_until(
    http: &reqwest::blocking::Client,
    base: &str,
    id: &str,
    timeout: Duration,
    mut done: impl FnMut(JobState) -> bool,
) -> DesignJob {
    let started = Instant::now();
    loop {
        let job = get_job(http, base, id);
        if done(job.state) || started.elapsed() > timeout {
            return job;
        }
        std::thread::sleep(Duration::from_millis(25));
    }
}
