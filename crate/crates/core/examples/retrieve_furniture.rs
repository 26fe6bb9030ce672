//! Text-to-image retrieval: one query per requested category, ranked by dot
//! product over unit-norm embeddings.
//!
//! ```text
//! cargo run --example retrieve_furniture
//! ```

use decomind::catalog::{build_catalog, BuildOptions};
use decomind::fixtures::write_demo_catalog;
use decomind::model::DesignRequest;
use decomind::retrieval::{build_query, rank_assets, select_furniture, EmbeddingProvider, StubEmbeddingProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let root = write_demo_catalog(dir.path(), 7)?;
    let provider = StubEmbeddingProvider::default();
    let (index, _) = build_catalog(&root, "ikea", &BuildOptions::default(), &provider)?;

    let mut request = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe", "nightstand", "armchair"]);
    request.items_per_category = 2;
    let selection = select_furniture(&request, &index, &provider)?;
    for (category, picks) in &selection.picks {
        println!("{category}  ({})", build_query(&request, category)?);
        if picks.is_empty() {
            println!("    (no assets in this catalog)");
        }
        for p in picks {
            println!("    {:+.4}  {}", p.similarity_score, p.asset_id);
        }
    }

    // The full ranking for one query.
    let query = provider.embed_text(&build_query(&request, "chair").unwrap_or_else(|_| "a modern chair".into()))?;
    println!("\nall chairs for \"a modern chair\":");
    for p in rank_assets(&query, &index, "chair", 10)? {
        println!("    {:+.4}  {}", p.similarity_score, p.asset_id);
    }
    Ok(())
}
