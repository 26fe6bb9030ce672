//! Every stage called directly, without the job service:
//! retrieve -> place -> render -> prompt -> generate -> score.
//!
//! ```text
//! cargo run --example run_pipeline [out_dir]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use decomind::catalog::{build_catalog, BuildOptions};
use decomind::evaluation::{score_design, PaletteKeyedClassifier};
use decomind::fixtures::write_demo_catalog;
use decomind::generation::{
    decode_prompt_stamp, generate, GenerationBackend, GenerationParams, StubBackend, DEFAULT_TIMEOUT,
};
use decomind::layout::{compose_layout, place_furniture, FootprintTable, DEFAULT_PIXELS_PER_M};
use decomind::model::{validate_request, DesignRequest, LabelSets, OpeningKind, Wall};
use decomind::promptgen::build_prompt;
use decomind::retrieval::{select_furniture, StubEmbeddingProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("decomind-pipeline"));
    std::fs::create_dir_all(&out)?;
    let labels = LabelSets::default();

    let request = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe", "nightstand"])
        .with_opening(OpeningKind::Door, Wall::North, 0.5, 0.9)
        .with_opening(OpeningKind::Window, Wall::South, 1.2, 1.0)
        .with_seed(5);
    let request = validate_request(request, &labels)?;

    let provider = StubEmbeddingProvider::default();
    let (catalog, _) =
        build_catalog(&write_demo_catalog(&out.join("images"), 1)?, "ikea", &BuildOptions::default(), &provider)?;

    let selection = select_furniture(&request, &catalog, &provider)?;
    println!("1. selected {} items", selection.total_picks());

    let placed = place_furniture(&request, &selection, &FootprintTable::default());
    let layout = compose_layout(&request, &placed.placements, DEFAULT_PIXELS_PER_M)?;
    std::fs::write(out.join("layout.png"), layout.png_bytes())?;
    println!("2. placed {} items, {} unplaceable", placed.placements.len(), placed.unplaceable.len());

    let (prompt, _) = build_prompt(&request, &selection);
    println!("3. prompt: {}", prompt.positive);

    let backend: Arc<dyn GenerationBackend> = Arc::new(StubBackend::default());
    let params = GenerationParams::with_seed(request.seed.unwrap_or(0));
    let design = generate(&prompt, &layout, &params, &backend, DEFAULT_TIMEOUT)?;
    design.image.save(out.join("design.png"))?;
    println!(
        "4. generated {:?}, stamp ok: {}",
        design.image.dimensions(),
        decode_prompt_stamp(&design.image) == Some(prompt.hash())
    );

    let room = PaletteKeyedClassifier::new("room", &labels.room_types, 0);
    let style = PaletteKeyedClassifier::new("style", &labels.styles, 0);
    let report = score_design(&request, &design, &room, &style, &labels)?;
    println!(
        "5. predicted {} / {} -> score {:.2}",
        report.predicted_room_type, report.predicted_style, report.final_score
    );
    println!("artifacts in {}", out.display());
    Ok(())
}
