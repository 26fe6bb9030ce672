//! Synthetic catalog trees for demos and tests.
//!
//! Product shots are a colored silhouette on a white backdrop; scene shots
//! fill the whole frame with a gradient so the border heuristic flags them.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Categories and product counts in [`write_demo_catalog`].
pub const DEMO_CATEGORIES: &[(&str, usize)] = &[
    ("bed", 4),
    ("wardrobe", 3),
    ("nightstand", 3),
    ("sofa", 3),
    ("coffee_table", 2),
    ("tv_stand", 2),
    ("dining_table", 2),
    ("chair", 4),
    ("desk", 2),
];

/// Product shot: a filled rectangle of `color` on white.
pub fn product_image(size: u32, color: Rgb<u8>, inset: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
    for y in inset..size.saturating_sub(inset) {
        for x in inset..size.saturating_sub(inset) {
            img.put_pixel(x, y, color);
        }
    }
    img
}

/// Room photo stand-in: a full-frame gradient.
pub fn scene_image(size: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r0, g0): (u8, u8) = (rng.random(), rng.random());
    RgbImage::from_fn(size, size, |x, y| {
        Rgb([r0.wrapping_add((x * 3) as u8), g0.wrapping_add((y * 3) as u8), ((x + y) * 2) as u8])
    })
}

/// Write a small catalog tree under `root`:
/// `train/<category>/<category>_<i>.png` product shots plus two scene photos
/// in `test/`. Returns `root`.
pub fn write_demo_catalog(root: &Path, seed: u64) -> std::io::Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let err = |e: image::ImageError| std::io::Error::other(e.to_string());
    for (category, n) in DEMO_CATEGORIES {
        let dir = root.join("train").join(category);
        std::fs::create_dir_all(&dir)?;
        for i in 0..*n {
            let color = Rgb([rng.random_range(20..200), rng.random_range(20..200), rng.random_range(20..200)]);
            product_image(64, color, rng.random_range(6..20))
                .save(dir.join(format!("{category}_{i}.png")))
                .map_err(err)?;
        }
    }
    for (i, category) in ["bed", "sofa"].iter().enumerate() {
        let dir = root.join("test").join(category);
        std::fs::create_dir_all(&dir)?;
        scene_image(64, seed.wrapping_add(i as u64)).save(dir.join(format!("{category}_scene.png"))).map_err(err)?;
    }
    Ok(root.to_path_buf())
}
