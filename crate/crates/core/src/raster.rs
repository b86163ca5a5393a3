//! Label masks and 8-bit image planes.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Reserved mask value for "no class": scatter holes and excluded classes.
pub const IGNORE: u8 = 255;

/// Single-channel class-index grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    classes: u8,
    values: Vec<u8>,
}

impl LabelMask {
    /// Every value must be `< classes` or [`IGNORE`]; `classes` is in `1..=255`.
    pub fn new(width: usize, height: usize, classes: u8, values: Vec<u8>) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidParameter(
                "a label mask needs at least one class".into(),
            ));
        }
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask buffer has {} values, expected {width}x{height}",
                values.len()
            )));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v != IGNORE && v >= classes)
        {
            return Err(Error::Data(format!(
                "class index {v} at pixel ({}, {}) is outside 0..{classes}",
                i % width.max(1),
                i / width.max(1)
            )));
        }
        Ok(Self {
            width,
            height,
            classes,
            values,
        })
    }

    /// Builds a mask whose class count is one more than its largest class index.
    pub fn from_values(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        let classes = values
            .iter()
            .filter(|&&v| v != IGNORE)
            .max()
            .map_or(1, |&m| m + 1);
        Self::new(width, height, classes, values)
    }

    pub fn filled(width: usize, height: usize, classes: u8, value: u8) -> Result<Self> {
        Self::new(width, height, classes, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> u8 {
        self.classes
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// Distinct values present, `IGNORE` included when present.
    pub fn class_set(&self) -> BTreeSet<u8> {
        self.values.iter().copied().collect()
    }

    /// Number of pixels equal to `class`.
    pub fn count(&self, class: u8) -> usize {
        self.values.iter().filter(|&&v| v == class).count()
    }

    pub(crate) fn with_values(&self, width: usize, height: usize, values: Vec<u8>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            classes: self.classes,
            values,
        }
    }

    pub fn hflip(&self) -> Self {
        let mut values = self.values.clone();
        if self.width > 0 {
            values.chunks_mut(self.width).for_each(|row| row.reverse());
        }
        self.with_values(self.width, self.height, values)
    }

    /// Nearest-neighbour resize on pixel centres; class values are never mixed.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        let xs = nearest_taps(self.width, width);
        let ys = nearest_taps(self.height, height);
        let mut values = Vec::with_capacity(width * height);
        for &sy in &ys {
            let row = &self.values[sy * self.width..(sy + 1) * self.width];
            values.extend(xs.iter().map(|&sx| row[sx]));
        }
        self.with_values(width, height, values)
    }

    /// Copies the window at `(x0, y0)`; the window must lie inside the mask.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let values = crop_rows(&self.values, self.width, 1, x0, y0, width, height);
        self.with_values(width, height, values)
    }
}

/// Interleaved 8-bit image, row-major, `channels` samples per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter(
                "an image needs at least one channel".into(),
            ));
        }
        if samples.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "image buffer has {} samples, expected {width}x{height}x{channels}",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.samples[i..i + self.channels]
    }

    pub fn hflip(&self) -> Self {
        let c = self.channels;
        let mut samples = Vec::with_capacity(self.samples.len());
        if self.width > 0 {
            for row in self.samples.chunks(self.width * c) {
                for px in row.chunks(c).rev() {
                    samples.extend_from_slice(px);
                }
            }
        }
        Self {
            samples,
            ..*self
        }
    }

    /// Bilinear resize on pixel centres with edge replication.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        let xs = linear_taps(self.width, width);
        let ys = linear_taps(self.height, height);
        let c = self.channels;
        let mut samples = Vec::with_capacity(width * height * c);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                for ch in 0..c {
                    let at = |x: usize, y: usize| self.samples[(y * self.width + x) * c + ch] as f64;
                    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                    let v = top * (1.0 - fy) + bottom * fy;
                    samples.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Self {
            width,
            height,
            channels: c,
            samples,
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: self.channels,
            samples: crop_rows(&self.samples, self.width, self.channels, x0, y0, width, height),
        }
    }
}

fn nearest_taps(src: usize, dst: usize) -> Vec<usize> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| (((i as f64 + 0.5) * scale) as usize).min(src - 1))
        .collect()
}

fn linear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            (lo, (lo + 1).min(src - 1), s - lo as f64)
        })
        .collect()
}

fn crop_rows(
    data: &[u8],
    src_width: usize,
    channels: usize,
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height * channels);
    for y in y0..y0 + height {
        let start = (y * src_width + x0) * channels;
        out.extend_from_slice(&data[start..start + width * channels]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_class() {
        let err = LabelMask::new(2, 1, 3, vec![0, 3]).unwrap_err();
        assert!(err.to_string().contains("class index 3"));
        assert!(LabelMask::new(2, 1, 3, vec![0, IGNORE]).is_ok());
        assert!(LabelMask::new(2, 1, 0, vec![0, 0]).is_err());
        assert!(LabelMask::new(2, 2, 3, vec![0, 0]).is_err());
    }

    #[test]
    fn infers_class_count() {
        let m = LabelMask::from_values(3, 1, vec![0, 4, IGNORE]).unwrap();
        assert_eq!(m.classes(), 5);
        let m = LabelMask::from_values(1, 1, vec![IGNORE]).unwrap();
        assert_eq!(m.classes(), 1);
    }

    #[test]
    fn flips() {
        let m = LabelMask::from_values(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(m.hflip().values(), &[2, 1, 0, 5, 4, 3]);
        assert_eq!(m.hflip().hflip(), m);

        let img = ImagePlane::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(img.hflip().samples(), &[4, 5, 6, 1, 2, 3]);
    }

    #[test]
    fn resize_roundtrip_shapes() {
        let m = LabelMask::from_values(4, 2, vec![0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        let up = m.resize_nearest(8, 4);
        assert_eq!(up.width(), 8);
        assert_eq!(&up.values()[..8], &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(up.resize_nearest(4, 2), m);
        assert!(up.class_set().is_subset(&m.class_set()));

        let img = ImagePlane::new(2, 1, 1, vec![0, 200]).unwrap();
        let wide = img.resize_bilinear(4, 1);
        assert_eq!(wide.samples(), &[0, 50, 150, 200]);
        assert_eq!(img.resize_bilinear(2, 1), img);
        let tiny = img.resize_bilinear(1, 1);
        assert_eq!(tiny.samples(), &[100]);
    }

    #[test]
    fn crops() {
        let m = LabelMask::from_values(4, 3, (0..12).collect()).unwrap();
        let c = m.crop(1, 1, 2, 2);
        assert_eq!(c.values(), &[5, 6, 9, 10]);
        assert_eq!(c.classes(), m.classes());
    }
}
