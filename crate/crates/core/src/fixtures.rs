//! Synthetic image/mask scenes for tests, demos and benchmarks.

use crate::augment::SamplePair;
use crate::raster::{ImagePlane, LabelMask};
use crate::stream::SampleStream;

/// A scene of axis-aligned rectangles and discs over a background class,
/// with an RGB image whose colors follow the classes plus a mild gradient.
/// Deterministic in `seed`.
pub fn synthetic_pair(width: usize, height: usize, classes: u8, seed: u64) -> SamplePair {
    assert!(classes >= 1 && width > 0 && height > 0);
    let mut rng = SampleStream::from_seed(seed);
    let mut values = vec![0u8; width * height];
    let shapes = 3 + rng.index(6);
    for _ in 0..shapes {
        let class = rng.index(classes as usize) as u8;
        let cx = rng.uniform() * width as f64;
        let cy = rng.uniform() * height as f64;
        let rx = 1.0 + rng.uniform() * width as f64 / 3.0;
        let ry = 1.0 + rng.uniform() * height as f64 / 3.0;
        let disc = rng.uniform() < 0.5;
        for y in 0..height {
            for x in 0..width {
                let (u, v) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if disc { u * u + v * v <= 1.0 } else { u.abs() <= 1.0 && v.abs() <= 1.0 };
                if inside {
                    values[y * width + x] = class;
                }
            }
        }
    }
    let mask = LabelMask::new(width, height, classes, values).expect("classes in range");

    let mut samples = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let c = mask.get(x, y) as usize;
            let grad = (x * 64 / width + y * 64 / height) as u8;
            samples.push(((c * 53) % 128) as u8 + grad);
            samples.push(((c * 97 + 40) % 128) as u8 + grad / 2);
            samples.push(((c * 31 + 90) % 128) as u8 + grad / 4);
        }
    }
    let image = ImagePlane::new(width, height, 3, samples).expect("buffer sized");
    SamplePair::new(image, mask, 0, 0).expect("same dimensions")
}

/// The 128x128, 5-class scene used for preview checks.
pub fn standard_pair() -> SamplePair {
    synthetic_pair(128, 128, 5, 2025)
}

/// Uniformly random mask values in `0..classes`.
pub fn random_mask(width: usize, height: usize, classes: u8, rng: &mut SampleStream) -> LabelMask {
    let values = (0..width * height).map(|_| rng.index(classes as usize) as u8).collect();
    LabelMask::new(width, height, classes, values).expect("classes in range")
}

/// Uniformly random image bytes.
pub fn random_image(width: usize, height: usize, channels: usize, rng: &mut SampleStream) -> ImagePlane {
    let samples = (0..width * height * channels).map(|_| rng.index(256) as u8).collect();
    ImagePlane::new(width, height, channels, samples).expect("buffer sized")
}
