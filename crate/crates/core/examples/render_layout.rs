//! Wall-first furniture placement and the control-layout raster.
//!
//! ```text
//! cargo run --example render_layout [out.png]
//! ```

use std::collections::BTreeMap;

use decomind::layout::{compose_layout, place_furniture, FootprintTable, DEFAULT_PIXELS_PER_M};
use decomind::model::{DesignRequest, FurnitureSelection, OpeningKind, Pick, Wall};

fn pick(id: &str) -> Pick {
    Pick { asset_id: id.into(), similarity_score: 1.0 }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("decomind-layout.png").display().to_string());
    let request = DesignRequest::new("bedroom", "modern", 4.0, 3.5, &["bed", "wardrobe", "nightstand", "desk"])
        .with_opening(OpeningKind::Door, Wall::South, 0.3, 0.9)
        .with_opening(OpeningKind::Window, Wall::East, 1.0, 1.2);
    let selection = FurnitureSelection {
        picks: BTreeMap::from([
            ("bed".into(), vec![pick("bed-01")]),
            ("wardrobe".into(), vec![pick("wardrobe-07")]),
            ("nightstand".into(), vec![pick("nightstand-02"), pick("nightstand-03")]),
            ("desk".into(), vec![pick("desk-11")]),
        ]),
    };

    let report = place_furniture(&request, &selection, &FootprintTable::default());
    for p in &report.placements {
        let anchor = p.wall_anchor.map(|w| w.as_str()).unwrap_or("interior");
        println!("{:<14} at ({:.2}, {:.2}) m, {:.2} x {:.2} m, {anchor}", p.asset_id, p.x_m, p.y_m, p.w_m, p.d_m);
    }
    for u in &report.unplaceable {
        println!("{:<14} unplaceable: {}", u.asset_id, u.reason);
    }

    let layout = compose_layout(&request, &report.placements, DEFAULT_PIXELS_PER_M)?;
    std::fs::write(&out, layout.png_bytes())?;
    let sidecar = layout.sidecar();
    println!("{}x{} px at {} px/m -> {out}", sidecar.width_px, sidecar.height_px, sidecar.pixels_per_m);
    println!("layout hash {}", sidecar.layout_hash);
    Ok(())
}
