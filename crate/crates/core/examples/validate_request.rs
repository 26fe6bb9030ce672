//! Request validation reports every violation at once.
//!
//! ```text
//! cargo run --example validate_request
//! ```

use decomind::model::{validate_request, DesignRequest, LabelSets, OpeningKind, Wall};

fn main() {
    let labels = LabelSets::default();

    let ok = DesignRequest::new("Bedroom", "Modern", 4.0, 3.0, &["bed", "wardrobe"])
        .with_opening(OpeningKind::Door, Wall::North, 0.5, 0.9)
        .with_opening(OpeningKind::Window, Wall::East, 1.0, 1.2);
    let normalized = validate_request(ok, &labels).expect("valid request");
    println!("accepted: {} / {} (labels normalized)", normalized.room_type, normalized.style);

    // A door that runs off its wall, an unknown style and no furniture.
    let mut bad =
        DesignRequest::new("bedroom", "gothic", 4.0, 3.0, &[]).with_opening(OpeningKind::Door, Wall::East, 2.5, 0.9);
    bad.room_depth_m = 0.0;
    match validate_request(bad, &labels) {
        Ok(_) => unreachable!("request should be rejected"),
        Err(report) => {
            println!("rejected with {} violations:", report.violations.len());
            for v in &report.violations {
                println!("  {:<24} {}", v.field, v.message);
            }
        }
    }

    println!("\nrequest JSON accepted by `decomind run` and POST /api/jobs:");
    let example = DesignRequest::new("living_room", "minimalist", 5.0, 4.0, &["sofa", "coffee_table", "tv_stand"])
        .with_opening(OpeningKind::Door, Wall::South, 0.4, 0.9)
        .with_seed(7);
    println!("{}", serde_json::to_string_pretty(&example).unwrap());
}
