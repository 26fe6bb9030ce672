//! Prompt construction from the request and the retrieved categories.
//!
//! ```text
//! cargo run --example build_prompt
//! ```

use std::collections::BTreeMap;

use decomind::model::{DesignRequest, FurnitureSelection, Pick};
use decomind::promptgen::{build_prompt, PromptBuilder};

fn main() {
    let request = DesignRequest::new("living_room", "classic", 5.5, 4.25, &["sofa", "coffee_table", "armchair"]);
    let selection = FurnitureSelection {
        picks: BTreeMap::from([
            ("sofa".to_string(), vec![Pick { asset_id: "sofa-3".into(), similarity_score: 0.41 }]),
            ("coffee_table".to_string(), vec![Pick { asset_id: "table-9".into(), similarity_score: 0.33 }]),
            ("armchair".to_string(), vec![]),
        ]),
    };

    let (bundle, warnings) = build_prompt(&request, &selection);
    println!("positive: {}", bundle.positive);
    println!("negative: {}", bundle.negative);
    println!("metadata: {:?}", bundle.metadata);
    println!("hash:     {}", hex::encode(bundle.hash()));
    for w in &warnings {
        println!("warning [{}] {}", w.code, w.message);
    }

    // A negative term that names the requested style is dropped.
    let builder = PromptBuilder { negative: "blurry, classic, watermark".into(), ..Default::default() };
    let (bundle, warnings) = builder.build(&request, &selection);
    println!("\nnegative with a conflicting term removed: {}", bundle.negative);
    for w in &warnings {
        println!("warning [{}] {}", w.code, w.message);
    }
}
