//! Grayscale PNG rendering.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::spectro::Spectrogram;

/// Renders a `w x h` image: pixel `(t, k)` is time column `t`, subcarrier
/// row `k`. Values are min-max normalized; a constant spectrogram renders
/// as mid-gray.
pub fn render_gray(spec: &Spectrogram) -> GrayImage {
    let (lo, hi) = spec.min_max();
    let span = hi - lo;
    GrayImage::from_fn(spec.width() as u32, spec.height() as u32, |t, k| {
        let v = spec.get(t as usize, k as usize);
        let level = if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 128 };
        Luma([level])
    })
}

/// Stacks images horizontally; heights must match.
pub fn side_by_side(images: &[GrayImage]) -> GrayImage {
    let height = images.first().map_or(0, |i| i.height());
    let width = images.iter().map(|i| i.width()).sum();
    let mut out = GrayImage::new(width, height);
    let mut x0 = 0;
    for img in images {
        for (x, y, p) in img.enumerate_pixels() {
            out.put_pixel(x0 + x, y, *p);
        }
        x0 += img.width();
    }
    out
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<(), image::ImageError> {
    img.save_with_format(path, image::ImageFormat::Png)
}
