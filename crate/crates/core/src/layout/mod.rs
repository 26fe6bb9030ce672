//! Floor-plan conditioning: furniture placement and the rendered control image.

mod footprint;
mod placement;
mod render;

pub use footprint::{Footprint, FootprintTable, FALLBACK_FOOTPRINT};
pub use placement::{
    check_placements, opening_keep_out, place_furniture, Placement, PlacementReport, Rect, UnplaceableItem,
    INTERIOR_GRID_M, OPENING_CLEARANCE_M,
};
pub use render::{
    compose_layout, default_legend, effective_pixels_per_m, encode_png, footprint_pixels, ControlLayout, LayoutSidecar,
    Legend, DEFAULT_PIXELS_PER_M, MAX_SIDE_PX, WALL_THICKNESS_PX,
};

/// Legend colors.
pub mod colors {
    pub use super::render::{BACKGROUND, DOOR, FURNITURE, LABEL, OUTLINE, WALL, WINDOW};
}

#[derive(Debug, thiserror::Error)]
pub enum LayoutError {
    #[error("layout image would be {width}x{height} px")]
    ZeroArea { width: u32, height: u32 },
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
}
