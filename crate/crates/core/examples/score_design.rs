//! Half a point for the room type, half for the style.
//!
//! Replays five designs whose classifiers agree on the room type but not the
//! style (three of them) or on neither (two of them), plus a full match.
//!
//! ```text
//! cargo run --example score_design
//! ```

use std::sync::Arc;

use decomind::evaluation::{score_design, FixedClassifier, LabelClassifier};
use decomind::generation::{generate, GenerationBackend, GenerationParams, StubBackend, DEFAULT_TIMEOUT};
use decomind::layout::compose_layout;
use decomind::model::{DesignRequest, FurnitureSelection, LabelSets};
use decomind::promptgen::build_prompt;

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = LabelSets::default();
    let request = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"]);
    let (prompt, _) = build_prompt(&request, &FurnitureSelection::default());
    let layout = compose_layout(&request, &[], 100)?;
    let backend: Arc<dyn GenerationBackend> = Arc::new(StubBackend::default());

    // (predicted room type, predicted style)
    let rows = [
        ("bedroom", "classic"),
        ("bedroom", "minimalist"),
        ("bedroom", "classic"),
        ("kitchen", "classic"),
        ("living_room", "minimalist"),
        ("bedroom", "modern"),
    ];
    println!("{:<8} {:<11} {:<10} {:<6} {:<6} score", "design", "room", "style", "room?", "style?");
    for (i, (room, style)) in rows.iter().enumerate() {
        let design = generate(&prompt, &layout, &GenerationParams::with_seed(i as u64), &backend, DEFAULT_TIMEOUT)?;
        let room_clf: Box<dyn LabelClassifier> = Box::new(FixedClassifier::new("room", &labels.room_types, room));
        let style_clf: Box<dyn LabelClassifier> = Box::new(FixedClassifier::new("style", &labels.styles, style));
        let report = score_design(&request, &design, room_clf.as_ref(), style_clf.as_ref(), &labels)?;
        println!(
            "{:<8} {:<11} {:<10} {:<6} {:<6} {:.2}",
            i + 1,
            report.predicted_room_type,
            report.predicted_style,
            yes_no(report.room_type_match),
            yes_no(report.style_match),
            report.final_score
        );
    }
    Ok(())
}
