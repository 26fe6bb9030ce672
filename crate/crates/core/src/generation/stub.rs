use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};

use super::{BackendError, BackendStatus, GenerationBackend, GenerationInput, HealthReport};

pub const STUB_BACKEND_ID: &str = "stub-v1";

/// Tint colors; a design's tint is picked by its seed.
pub const STUB_PALETTE: [Rgb<u8>; 8] = [
    Rgb([230, 57, 70]),
    Rgb([42, 157, 143]),
    Rgb([233, 196, 106]),
    Rgb([38, 70, 83]),
    Rgb([244, 162, 97]),
    Rgb([131, 56, 236]),
    Rgb([58, 134, 255]),
    Rgb([6, 214, 160]),
];

const STAMP_LEN: u32 = 32;
const STAMP_MARK: u8 = 0xA5;
const MAX_SIDE: u32 = 2048;

pub fn stub_palette_index(seed: u64) -> usize {
    (seed % STUB_PALETTE.len() as u64) as usize
}

/// 70/30 blend of a source pixel with the tint color.
pub fn tint(src: Rgb<u8>, color: Rgb<u8>) -> Rgb<u8> {
    let mix = |a: u8, b: u8| ((u16::from(a) * 7 + u16::from(b) * 3 + 5) / 10) as u8;
    Rgb([mix(src.0[0], color.0[0]), mix(src.0[1], color.0[1]), mix(src.0[2], color.0[2])])
}

/// Model-free backend. Output is the layout resampled (nearest neighbor) to
/// the requested size, tinted with the seed's palette color, with the prompt
/// bundle hash stamped into the first 32 pixels of row 0.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    delay: Duration,
}

impl StubBackend {
    /// A stub that sleeps before answering, for exercising timeouts and crashes.
    pub fn with_delay(delay: Duration) -> Self {
        Self { delay }
    }
}

impl GenerationBackend for StubBackend {
    fn backend_id(&self) -> &str {
        STUB_BACKEND_ID
    }

    fn probe(&self) -> HealthReport {
        let started = Instant::now();
        HealthReport {
            backend_id: STUB_BACKEND_ID.into(),
            model: "deterministic layout tint".into(),
            status: BackendStatus::Healthy,
            max_size: Some((MAX_SIDE, MAX_SIDE)),
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            detail: None,
        }
    }

    fn render(&self, input: &GenerationInput) -> Result<RgbImage, BackendError> {
        let (ow, oh) = input.params.output_size;
        if ow < STAMP_LEN || oh == 0 || ow > MAX_SIDE || oh > MAX_SIDE {
            return Err(BackendError::Rejected(format!(
                "stub backend renders widths {STAMP_LEN}..={MAX_SIDE} and heights 1..={MAX_SIDE}, got {ow}x{oh}"
            )));
        }
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let src = &input.layout_image;
        let (sw, sh) = src.dimensions();
        if sw == 0 || sh == 0 {
            return Err(BackendError::Rejected("empty layout image".into()));
        }
        let color = STUB_PALETTE[stub_palette_index(input.params.seed)];
        let mut out = RgbImage::from_fn(ow, oh, |x, y| {
            let sx = (u64::from(x) * u64::from(sw) / u64::from(ow)) as u32;
            let sy = (u64::from(y) * u64::from(sh) / u64::from(oh)) as u32;
            tint(*src.get_pixel(sx, sy), color)
        });
        for (i, b) in input.prompt.hash().iter().enumerate() {
            out.put_pixel(i as u32, 0, Rgb([*b, !*b, STAMP_MARK]));
        }
        Ok(out)
    }
}

/// Read back the prompt hash stamped by [`StubBackend`], if present.
pub fn decode_prompt_stamp(image: &RgbImage) -> Option<[u8; 32]> {
    if image.width() < STAMP_LEN || image.height() == 0 {
        return None;
    }
    let mut hash = [0u8; 32];
    for (i, slot) in hash.iter_mut().enumerate() {
        let Rgb([r, g, b]) = *image.get_pixel(i as u32, 0);
        if g != !r || b != STAMP_MARK {
            return None;
        }
        *slot = r;
    }
    Some(hash)
}
