//! The two catalog cleaning passes: excluding full-room scene photos and
//! producing transparent cut-outs of the remaining products.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use image::{DynamicImage, GrayImage, Luma, Rgb, RgbaImage};

use super::ingest::TRANSPARENT_DIR;
use super::{CatalogError, CatalogIndex};
use crate::model::{ExclusionReason, FurnitureAsset, Warning};

pub const DEFAULT_SCENE_THRESHOLD: f64 = 0.5;

/// Estimates the probability that an image shows a full room rather than a
/// standalone product.
pub trait SceneDetector: Send + Sync {
    fn scene_probability(&self, asset: &FurnitureAsset, image: &DynamicImage) -> Result<f64, String>;
}

impl<F> SceneDetector for F
where
    F: Fn(&FurnitureAsset, &DynamicImage) -> Result<f64, String> + Send + Sync,
{
    fn scene_probability(&self, asset: &FurnitureAsset, image: &DynamicImage) -> Result<f64, String> {
        self(asset, image)
    }
}

/// Produces a foreground coverage mask: 0 is background, 255 is foreground.
pub trait MattingBackend: Send + Sync {
    fn foreground_mask(&self, image: &DynamicImage) -> Result<GrayImage, String>;
}

impl<F> MattingBackend for F
where
    F: Fn(&DynamicImage) -> Result<GrayImage, String> + Send + Sync,
{
    fn foreground_mask(&self, image: &DynamicImage) -> Result<GrayImage, String> {
        self(image)
    }
}

/// Mark every asset the detector scores above `threshold` as a scene image.
///
/// Already-excluded assets are skipped. A detector error, an out-of-range
/// probability or an unreadable image leaves the asset untouched and records
/// a warning.
pub fn flag_scene_images(
    mut index: CatalogIndex,
    detector: &dyn SceneDetector,
    threshold: f64,
) -> (CatalogIndex, Vec<Warning>) {
    let mut warnings = Vec::new();
    let root = index.root_path.clone();
    for asset in index.assets.iter_mut().filter(|a| !a.excluded) {
        let path = root.join(&asset.image_path);
        let image = match image::open(&path) {
            Ok(img) => img,
            Err(e) => {
                warnings.push(Warning::new("scene_detector_skipped", &asset.asset_id, e.to_string()));
                continue;
            }
        };
        match detector.scene_probability(asset, &image) {
            Ok(p) if (0.0..=1.0).contains(&p) => {
                if p > threshold {
                    asset.exclude(ExclusionReason::SceneImage);
                }
            }
            Ok(p) => warnings.push(Warning::new(
                "scene_detector_failed",
                &asset.asset_id,
                format!("probability {p} outside [0, 1]"),
            )),
            Err(e) => warnings.push(Warning::new("scene_detector_failed", &asset.asset_id, e)),
        }
    }
    (index, warnings)
}

/// Combine an image with a coverage mask: the mask becomes the alpha channel
/// and RGB is carried over untouched.
pub fn apply_mask(asset_id: &str, image: &DynamicImage, mask: &GrayImage) -> Result<RgbaImage, CatalogError> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(CatalogError::MaskMismatch {
            asset_id: asset_id.to_string(),
            image_w: image.width(),
            image_h: image.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let rgb = image.to_rgb8();
    let mut out = RgbaImage::new(rgb.width(), rgb.height());
    for ((x, y, px), m) in rgb.enumerate_pixels().zip(mask.pixels()) {
        let Rgb([r, g, b]) = *px;
        out.put_pixel(x, y, image::Rgba([r, g, b, m.0[0]]));
    }
    Ok(out)
}

/// Cut the foreground out of one image using a matting backend.
pub fn remove_background(
    asset_id: &str,
    image: &DynamicImage,
    backend: &dyn MattingBackend,
) -> Result<RgbaImage, CatalogError> {
    let mask = backend
        .foreground_mask(image)
        .map_err(|message| CatalogError::Backend { asset_id: asset_id.to_string(), message })?;
    apply_mask(asset_id, image, &mask)
}

/// Run background removal over every active asset, writing transparent PNGs
/// under `<root>/_transparent/` and repointing the assets at them.
///
/// Per-asset failures are recorded as warnings and leave the asset on its
/// original image.
pub fn apply_background_removal(
    mut index: CatalogIndex,
    backend: &dyn MattingBackend,
) -> Result<(CatalogIndex, Vec<Warning>), CatalogError> {
    let root = index.root_path.clone();
    let out_dir = root.join(TRANSPARENT_DIR);
    std::fs::create_dir_all(&out_dir)?;
    let mut warnings = Vec::new();
    for asset in index.assets.iter_mut().filter(|a| !a.excluded) {
        let image = match image::open(root.join(&asset.image_path)) {
            Ok(img) => img,
            Err(e) => {
                warnings.push(Warning::new("matting_skipped", &asset.asset_id, e.to_string()));
                continue;
            }
        };
        let cut = match remove_background(&asset.asset_id, &image, backend) {
            Ok(cut) => cut,
            Err(e) => {
                warnings.push(Warning::new("matting_failed", &asset.asset_id, e.to_string()));
                continue;
            }
        };
        let file_name = format!("{}.png", sanitize_file_name(&asset.asset_id));
        let target = out_dir.join(&file_name);
        save_png_atomic(&cut, &target)?;
        asset.image_path = format!("{TRANSPARENT_DIR}/{file_name}");
        asset.has_alpha = true;
    }
    Ok((index, warnings))
}

fn sanitize_file_name(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn save_png_atomic(image: &RgbaImage, target: &Path) -> Result<(), CatalogError> {
    let tmp = target.with_extension("png.tmp");
    image
        .save_with_format(&tmp, image::ImageFormat::Png)
        .map_err(|source| CatalogError::Image { path: tmp.clone(), source })?;
    std::fs::rename(&tmp, target)?;
    Ok(())
}

fn color_distance(a: Rgb<u8>, b: Rgb<u8>) -> u32 {
    a.0.iter().zip(b.0.iter()).map(|(x, y)| u32::from(x.abs_diff(*y))).max().unwrap_or(0)
}

fn border_pixels(img: &image::RgbImage) -> Vec<(u32, u32)> {
    let (w, h) = img.dimensions();
    let mut out = Vec::new();
    if w == 0 || h == 0 {
        return out;
    }
    for x in 0..w {
        out.push((x, 0));
        if h > 1 {
            out.push((x, h - 1));
        }
    }
    for y in 1..h.saturating_sub(1) {
        out.push((0, y));
        if w > 1 {
            out.push((w - 1, y));
        }
    }
    out
}

/// Most frequent border color, quantized to 8 levels per channel; returns
/// the representative color and the fraction of border pixels within
/// `tolerance` of it.
fn dominant_border_color(img: &image::RgbImage, tolerance: u32) -> Option<(Rgb<u8>, f64)> {
    let border = border_pixels(img);
    if border.is_empty() {
        return None;
    }
    let mut counts = std::collections::BTreeMap::<[u8; 3], (usize, (u32, u32))>::new();
    for &(x, y) in &border {
        let p = img.get_pixel(x, y).0;
        let key = [p[0] / 32, p[1] / 32, p[2] / 32];
        counts.entry(key).or_insert((0, (x, y))).0 += 1;
    }
    let (_, &(_, at)) = counts.iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then_with(|| b.0.cmp(a.0)))?;
    let bg = *img.get_pixel(at.0, at.1);
    let near = border.iter().filter(|&&(x, y)| color_distance(*img.get_pixel(x, y), bg) <= tolerance).count();
    Some((bg, near as f64 / border.len() as f64))
}

/// Background removal for product shots on a plain backdrop: the backdrop
/// color is taken from the image border and flood-filled inward.
#[derive(Debug, Clone, Copy)]
pub struct BorderFloodMatting {
    /// Largest per-channel difference still treated as backdrop.
    pub tolerance: u32,
}

impl Default for BorderFloodMatting {
    fn default() -> Self {
        Self { tolerance: 24 }
    }
}

impl MattingBackend for BorderFloodMatting {
    fn foreground_mask(&self, image: &DynamicImage) -> Result<GrayImage, String> {
        let rgb = image.to_rgb8();
        let (w, h) = rgb.dimensions();
        let mut mask = GrayImage::from_pixel(w, h, Luma([255]));
        let Some((bg, _)) = dominant_border_color(&rgb, self.tolerance) else {
            return Ok(mask);
        };
        let mut queue: VecDeque<(u32, u32)> = border_pixels(&rgb)
            .into_iter()
            .filter(|&(x, y)| color_distance(*rgb.get_pixel(x, y), bg) <= self.tolerance)
            .collect();
        for &(x, y) in &queue {
            mask.put_pixel(x, y, Luma([0]));
        }
        while let Some((x, y)) = queue.pop_front() {
            let neighbors = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
            for (nx, ny) in neighbors {
                if nx < w
                    && ny < h
                    && mask.get_pixel(nx, ny).0[0] != 0
                    && color_distance(*rgb.get_pixel(nx, ny), bg) <= self.tolerance
                {
                    mask.put_pixel(nx, ny, Luma([0]));
                    queue.push_back((nx, ny));
                }
            }
        }
        Ok(mask)
    }
}

/// Scene heuristic: catalog product shots sit on a uniform backdrop, room
/// photos do not. Probability = 1 - share of border pixels matching the
/// dominant border color.
#[derive(Debug, Clone, Copy)]
pub struct BorderUniformityDetector {
    pub tolerance: u32,
}

impl Default for BorderUniformityDetector {
    fn default() -> Self {
        Self { tolerance: 24 }
    }
}

impl SceneDetector for BorderUniformityDetector {
    fn scene_probability(&self, _asset: &FurnitureAsset, image: &DynamicImage) -> Result<f64, String> {
        let rgb = image.to_rgb8();
        let (_, share) = dominant_border_color(&rgb, self.tolerance).ok_or("empty image")?;
        Ok((1.0 - share).clamp(0.0, 1.0))
    }
}

/// Manual exclusion list: listed asset ids score 1.0, everything else 0.0.
#[derive(Debug, Clone, Default)]
pub struct ExclusionListDetector {
    pub asset_ids: BTreeSet<String>,
}

impl ExclusionListDetector {
    /// One asset id per line; blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let asset_ids =
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect();
        Ok(Self { asset_ids })
    }
}

impl SceneDetector for ExclusionListDetector {
    fn scene_probability(&self, asset: &FurnitureAsset, _image: &DynamicImage) -> Result<f64, String> {
        Ok(if self.asset_ids.contains(&asset.asset_id) { 1.0 } else { 0.0 })
    }
}
