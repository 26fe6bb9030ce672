//! Plan-view rasterizer for the conditioning image.

use std::collections::BTreeMap;

use font8x8::UnicodeFonts;
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::placement::{check_placements, Placement};
use super::LayoutError;
use crate::digest::sha256;
use crate::model::{spaced_label, DesignRequest, OpeningKind, Wall};

pub const DEFAULT_PIXELS_PER_M: u32 = 100;
/// Longest image side allowed; larger rooms get a lower resolution.
pub const MAX_SIDE_PX: u32 = 1024;
pub const WALL_THICKNESS_PX: u32 = 3;

pub const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
pub const WALL: Rgb<u8> = Rgb([0, 0, 0]);
pub const DOOR: Rgb<u8> = Rgb([150, 75, 0]);
pub const WINDOW: Rgb<u8> = Rgb([0, 120, 255]);
pub const FURNITURE: Rgb<u8> = Rgb([90, 90, 90]);
pub const OUTLINE: Rgb<u8> = Rgb([0, 0, 0]);
/// Category captions stay achromatic so footprints read as one gray mass.
pub const LABEL: Rgb<u8> = Rgb([200, 200, 200]);

/// Element kind -> RGB color, shared with backends and the UI.
pub type Legend = BTreeMap<String, [u8; 3]>;

pub fn default_legend() -> Legend {
    [
        ("background", BACKGROUND),
        ("wall", WALL),
        ("door", DOOR),
        ("window", WINDOW),
        ("furniture", FURNITURE),
        ("outline", OUTLINE),
        ("label", LABEL),
    ]
    .into_iter()
    .map(|(k, c)| (k.to_string(), c.0))
    .collect()
}

/// The rendered conditioning image and what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLayout {
    pub image: RgbImage,
    pub pixels_per_m: u32,
    pub placements: Vec<Placement>,
    pub legend: Legend,
}

/// JSON sidecar written next to the layout PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSidecar {
    pub width_px: u32,
    pub height_px: u32,
    pub pixels_per_m: u32,
    pub placements: Vec<Placement>,
    pub legend: Legend,
    pub layout_hash: String,
}

impl ControlLayout {
    /// PNG encoding with fixed compression and filter settings.
    pub fn png_bytes(&self) -> Vec<u8> {
        encode_png(&self.image)
    }

    pub fn layout_hash(&self) -> [u8; 32] {
        sha256(&self.png_bytes())
    }

    pub fn sidecar(&self) -> LayoutSidecar {
        LayoutSidecar {
            width_px: self.image.width(),
            height_px: self.image.height(),
            pixels_per_m: self.pixels_per_m,
            placements: self.placements.clone(),
            legend: self.legend.clone(),
            layout_hash: hex::encode(self.layout_hash()),
        }
    }

    /// Pixel bounds `[x0, x1) x [y0, y1)` of a footprint.
    pub fn footprint_pixels(&self, placement: &Placement) -> (u32, u32, u32, u32) {
        footprint_pixels(placement, self.pixels_per_m, self.image.width(), self.image.height())
    }
}

pub fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
        .write_image(image.as_raw(), image.width(), image.height(), image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    out
}

fn to_px(m: f64, ppm: u32) -> i64 {
    (m * f64::from(ppm)).round() as i64
}

fn clamp_px(v: i64, max: u32) -> u32 {
    v.clamp(0, i64::from(max)) as u32
}

pub fn footprint_pixels(p: &Placement, ppm: u32, width: u32, height: u32) -> (u32, u32, u32, u32) {
    (
        clamp_px(to_px(p.x_m, ppm), width),
        clamp_px(to_px(p.x_m + p.w_m, ppm), width),
        clamp_px(to_px(p.y_m, ppm), height),
        clamp_px(to_px(p.y_m + p.d_m, ppm), height),
    )
}

/// Resolution actually used for a room: the requested one, lowered when the
/// longest side would exceed [`MAX_SIDE_PX`].
pub fn effective_pixels_per_m(request: &DesignRequest, requested: u32) -> u32 {
    let longest = request.room_width_m.max(request.room_depth_m);
    if longest * f64::from(requested) <= f64::from(MAX_SIDE_PX) + 0.5 {
        requested
    } else {
        ((f64::from(MAX_SIDE_PX) / longest).floor() as u32).max(1)
    }
}

fn fill(img: &mut RgbImage, x0: u32, x1: u32, y0: u32, y1: u32, color: Rgb<u8>) {
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x, y, color);
        }
    }
}

/// Draw `text` with the 8x8 font, centered in the box and clipped to it.
fn draw_text(img: &mut RgbImage, text: &str, bx0: u32, bx1: u32, by0: u32, by1: u32, color: Rgb<u8>) {
    const GLYPH: u32 = 8;
    let (bw, bh) = (bx1.saturating_sub(bx0), by1.saturating_sub(by0));
    if bh < GLYPH || bw < GLYPH {
        return;
    }
    let max_chars = (bw / GLYPH) as usize;
    let chars: Vec<char> = text.chars().take(max_chars).collect();
    let text_w = chars.len() as u32 * GLYPH;
    let x_start = bx0 + (bw - text_w) / 2;
    let y_start = by0 + (bh - GLYPH) / 2;
    for (i, c) in chars.iter().enumerate() {
        let Some(rows) = font8x8::BASIC_FONTS.get(*c) else { continue };
        for (ry, row) in rows.iter().enumerate() {
            for rx in 0..8u32 {
                if row & (1 << rx) != 0 {
                    img.put_pixel(x_start + i as u32 * GLYPH + rx, y_start + ry as u32, color);
                }
            }
        }
    }
}

/// Render the room, its openings and the furniture footprints.
///
/// Drawing order: white floor, 3 px black walls, furniture (gray fill, 1 px
/// black outline, caption), then door and window bars over the walls.
/// Identical inputs produce identical pixels and PNG bytes.
pub fn compose_layout(
    request: &DesignRequest,
    placements: &[Placement],
    pixels_per_m: u32,
) -> Result<ControlLayout, LayoutError> {
    if pixels_per_m == 0 {
        return Err(LayoutError::ZeroArea { width: 0, height: 0 });
    }
    let ppm = effective_pixels_per_m(request, pixels_per_m);
    let (wpx, hpx) = (to_px(request.room_width_m, ppm), to_px(request.room_depth_m, ppm));
    if !(request.room_width_m.is_finite() && request.room_depth_m.is_finite()) || wpx <= 0 || hpx <= 0 {
        return Err(LayoutError::ZeroArea { width: wpx.max(0) as u32, height: hpx.max(0) as u32 });
    }
    check_placements(request, placements).map_err(LayoutError::InvalidPlacement)?;
    let (w, h) = (wpx as u32, hpx as u32);
    let mut img = RgbImage::from_pixel(w, h, BACKGROUND);

    let t = WALL_THICKNESS_PX.min(w).min(h);
    fill(&mut img, 0, w, 0, t, WALL);
    fill(&mut img, 0, w, h - t, h, WALL);
    fill(&mut img, 0, t, 0, h, WALL);
    fill(&mut img, w - t, w, 0, h, WALL);

    for p in placements {
        let (x0, x1, y0, y1) = footprint_pixels(p, ppm, w, h);
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        fill(&mut img, x0, x1, y0, y1, FURNITURE);
        fill(&mut img, x0, x1, y0, y0 + 1, OUTLINE);
        fill(&mut img, x0, x1, y1 - 1, y1, OUTLINE);
        fill(&mut img, x0, x0 + 1, y0, y1, OUTLINE);
        fill(&mut img, x1 - 1, x1, y0, y1, OUTLINE);
        if x1 - x0 > 4 && y1 - y0 > 4 {
            draw_text(&mut img, &spaced_label(&p.category), x0 + 2, x1 - 2, y0 + 2, y1 - 2, LABEL);
        }
    }

    for o in &request.openings {
        let color = match o.kind {
            OpeningKind::Door => DOOR,
            OpeningKind::Window => WINDOW,
        };
        let a = to_px(o.offset_m, ppm);
        let b = to_px(o.offset_m + o.width_m, ppm);
        match o.wall {
            Wall::North => fill(&mut img, clamp_px(a, w), clamp_px(b, w), 0, t, color),
            Wall::South => {
                fill(&mut img, clamp_px(i64::from(w) - b, w), clamp_px(i64::from(w) - a, w), h - t, h, color)
            }
            Wall::East => fill(&mut img, w - t, w, clamp_px(a, h), clamp_px(b, h), color),
            Wall::West => fill(&mut img, 0, t, clamp_px(i64::from(h) - b, h), clamp_px(i64::from(h) - a, h), color),
        }
    }

    Ok(ControlLayout { image: img, pixels_per_m: ppm, placements: placements.to_vec(), legend: default_legend() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bed_at_origin() -> Placement {
        Placement {
            asset_id: "b".into(),
            category: "bed".into(),
            x_m: 0.0,
            y_m: 0.0,
            w_m: 1.6,
            d_m: 2.0,
            wall_anchor: Some(Wall::North),
        }
    }

    #[test]
    fn dimensions_follow_scale() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]);
        let l = compose_layout(&req, &[], 100).unwrap();
        assert_eq!(l.image.dimensions(), (400, 300));
    }

    #[test]
    fn large_rooms_are_clamped() {
        let req = DesignRequest::new("living_room", "modern", 12.0, 5.0, &["sofa"]);
        let l = compose_layout(&req, &[], 100).unwrap();
        assert_eq!(l.pixels_per_m, 85);
        assert_eq!(l.image.dimensions(), (1020, 425));
    }

    #[test]
    fn rendering_is_byte_identical() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]).with_opening(
            OpeningKind::Window,
            Wall::South,
            0.5,
            1.0,
        );
        let a = compose_layout(&req, &[bed_at_origin()], 100).unwrap().png_bytes();
        let b = compose_layout(&req, &[bed_at_origin()], 100).unwrap().png_bytes();
        assert_eq!(a, b);
    }

    #[test]
    fn bed_footprint_is_gray() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"]);
        let l = compose_layout(&req, &[bed_at_origin()], 100).unwrap();
        let achromatic_mid = |p: &Rgb<u8>| p.0[0] == p.0[1] && p.0[1] == p.0[2] && p.0[0] > 0 && p.0[0] < 255;
        let mut gray = 0;
        for y in 0..200 {
            for x in 0..160 {
                if achromatic_mid(l.image.get_pixel(x, y)) {
                    gray += 1;
                }
            }
        }
        assert!(gray >= 158 * 198, "gray pixels: {gray}");
        assert_eq!(*l.image.get_pixel(0, 0), OUTLINE);
        assert_eq!(*l.image.get_pixel(80, 5), FURNITURE);
    }

    #[test]
    fn openings_are_colored_on_their_wall() {
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed"])
            .with_opening(OpeningKind::Door, Wall::West, 0.0, 1.0)
            .with_opening(OpeningKind::Window, Wall::East, 1.0, 1.0);
        let l = compose_layout(&req, &[], 100).unwrap();
        // West wall runs south to north: offset 0 starts at the south-west corner.
        assert_eq!(*l.image.get_pixel(1, 250), DOOR);
        assert_eq!(*l.image.get_pixel(1, 150), WALL);
        assert_eq!(*l.image.get_pixel(398, 150), WINDOW);
        assert_eq!(*l.image.get_pixel(398, 50), WALL);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let tiny = DesignRequest::new("bedroom", "modern", 0.001, 3.0, &["bed"]);
        assert!(matches!(compose_layout(&tiny, &[], 100), Err(LayoutError::ZeroArea { .. })));
        let req = DesignRequest::new("bedroom", "modern", 1.0, 1.0, &["bed"]);
        assert!(matches!(compose_layout(&req, &[bed_at_origin()], 100), Err(LayoutError::InvalidPlacement(_))));
    }
}
