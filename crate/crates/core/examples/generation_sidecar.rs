//! Serve a generation backend over HTTP and call it through `HttpBackend`.
//!
//! The sidecar here wraps the deterministic stub; a diffusion server only has
//! to speak the same two endpoints (`GET /health`, multipart `POST /generate`).
//!
//! ```text
//! cargo run --example generation_sidecar [out.png]
//! ```

use std::sync::Arc;

use decomind::generation::{
    decode_prompt_stamp, generate, probe_backend, sidecar, GenerationBackend, GenerationParams, HttpBackend,
    StubBackend, DEFAULT_TIMEOUT,
};
use decomind::layout::compose_layout;
use decomind::model::{DesignRequest, FurnitureSelection};
use decomind::promptgen::build_prompt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("decomind-design.png").display().to_string());

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let app = sidecar::router(Arc::new(StubBackend::default()));
    rt.spawn(async move { axum::serve(listener, app).await });

    let backend: Arc<dyn GenerationBackend> = Arc::new(HttpBackend::new(format!("http://{addr}")));
    let health = probe_backend(&backend);
    println!("{} -> {:?}, model {:?}, max {:?}", health.backend_id, health.status, health.model, health.max_size);

    let request = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]);
    let (prompt, _) = build_prompt(&request, &FurnitureSelection::default());
    let layout = compose_layout(&request, &[], 100)?;
    let design = generate(&prompt, &layout, &GenerationParams::with_seed(3), &backend, DEFAULT_TIMEOUT)?;
    design.image.save(&out)?;

    let record = design.record();
    println!("{}x{} in {:.3} s -> {out}", record.image_width, record.image_height, record.wall_time_s);
    println!("layout matches record: {}", record.matches_layout(&layout.png_bytes()));
    println!("prompt stamp decodes:  {}", decode_prompt_stamp(&design.image) == Some(prompt.hash()));
    Ok(())
}
