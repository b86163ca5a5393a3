//! Applying displacement fields to masks and images.
//!
//! Forward mapping scatters each source pixel to `clamp(p + d(p))`, visiting
//! sources in row-major order so the last writer wins a collision. Backward
//! mapping gathers each output pixel from `clamp(p - d(p))` and never leaves
//! holes. Labels are always moved with nearest-neighbour semantics.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::raster::{ImagePlane, LabelMask, IGNORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    /// Source pixels are written to their displaced targets.
    #[default]
    Forward,
    /// Output pixels read from their displaced sources.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageInterp {
    #[default]
    Nearest,
    /// Only honoured by backward mapping; forward writes are always nearest.
    Bilinear,
}

/// What forward scatter leaves in target pixels no source reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// [`IGNORE`] in masks, 0 in images.
    #[default]
    IgnoreLabel,
    /// Copy the nearest written pixel (breadth-first, 4-neighbourhood).
    NearestSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WarpSpec {
    pub mapping: Mapping,
    pub image_interp: ImageInterp,
    pub fill: FillPolicy,
}

/// Rounds half away from zero, then clamps into `0..dim`.
#[inline]
pub fn clamp_index(v: f64, dim: usize) -> usize {
    debug_assert!(dim >= 1);
    let r = v.round();
    if r <= 0.0 || r.is_nan() {
        0
    } else {
        (r as usize).min(dim - 1)
    }
}

fn check_dims(what: &str, w: usize, h: usize, field: &DisplacementField) -> Result<()> {
    if w != field.width || h != field.height {
        return Err(Error::InvalidInput(format!(
            "{what} is {w}x{h} but the displacement field is {}x{}",
            field.width, field.height
        )));
    }
    Ok(())
}

/// Flat target index of every source pixel under forward mapping.
pub fn scatter_targets(field: &DisplacementField) -> Vec<usize> {
    let (w, h) = (field.width, field.height);
    let mut targets = vec![0usize; w * h];
    targets
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, t) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let tx = clamp_index(x as f64 + field.dx[i], w);
                let ty = clamp_index(y as f64 + field.dy[i], h);
                *t = ty * w + tx;
            }
        });
    targets
}

/// Scatters `channels`-sample pixels in source order. Returns the output and a
/// per-pixel written flag.
fn scatter(src: &[u8], channels: usize, targets: &[usize], hole: u8) -> (Vec<u8>, Vec<bool>) {
    let mut out = vec![hole; src.len()];
    let mut written = vec![false; targets.len()];
    for (i, &t) in targets.iter().enumerate() {
        out[t * channels..(t + 1) * channels].copy_from_slice(&src[i * channels..(i + 1) * channels]);
        written[t] = true;
    }
    (out, written)
}

/// Fills unwritten pixels from the nearest written one by multi-source BFS.
/// Seeds enter the queue in row-major order and neighbours are expanded
/// left, right, up, down, which fixes every tie.
fn fill_nearest(data: &mut [u8], written: &mut [bool], width: usize, height: usize, channels: usize) {
    let mut queue: VecDeque<usize> = written
        .iter()
        .enumerate()
        .filter_map(|(i, &w)| w.then_some(i))
        .collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let neighbours = [
            (x > 0).then(|| i - 1),
            (x + 1 < width).then(|| i + 1),
            (y > 0).then(|| i - width),
            (y + 1 < height).then(|| i + width),
        ];
        for j in neighbours.into_iter().flatten() {
            if !written[j] {
                written[j] = true;
                data.copy_within(i * channels..(i + 1) * channels, j * channels);
                queue.push_back(j);
            }
        }
    }
}

/// Flat source index each output pixel reads under backward mapping.
fn gather_sources(field: &DisplacementField) -> Vec<usize> {
    let (w, h) = (field.width, field.height);
    let mut sources = vec![0usize; w * h];
    sources
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, s) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let sx = clamp_index(x as f64 - field.dx[i], w);
                let sy = clamp_index(y as f64 - field.dy[i], h);
                *s = sy * w + sx;
            }
        });
    sources
}

/// Moves class labels along `field`. The output never contains a class
/// index absent from the input, though forward holes may add [`IGNORE`].
pub fn warp_label(mask: &LabelMask, field: &DisplacementField, spec: &WarpSpec) -> Result<LabelMask> {
    let (w, h) = (mask.width(), mask.height());
    check_dims("mask", w, h, field)?;
    let values = match spec.mapping {
        Mapping::Forward => {
            let targets = scatter_targets(field);
            let (mut out, mut written) = scatter(mask.values(), 1, &targets, IGNORE);
            if spec.fill == FillPolicy::NearestSource {
                fill_nearest(&mut out, &mut written, w, h, 1);
            }
            out
        }
        Mapping::Backward => {
            let src = mask.values();
            gather_sources(field).into_iter().map(|s| src[s]).collect()
        }
    };
    Ok(mask.with_values(w, h, values))
}

/// Moves image pixels along `field` with the same geometry as [`warp_label`].
pub fn warp_image(image: &ImagePlane, field: &DisplacementField, spec: &WarpSpec) -> Result<ImagePlane> {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    check_dims("image", w, h, field)?;
    let samples = match (spec.mapping, spec.image_interp) {
        (Mapping::Forward, _) => {
            let targets = scatter_targets(field);
            let (mut out, mut written) = scatter(image.samples(), c, &targets, 0);
            if spec.fill == FillPolicy::NearestSource {
                fill_nearest(&mut out, &mut written, w, h, c);
            }
            out
        }
        (Mapping::Backward, ImageInterp::Nearest) => {
            let src = image.samples();
            let mut out = Vec::with_capacity(src.len());
            for s in gather_sources(field) {
                out.extend_from_slice(&src[s * c..(s + 1) * c]);
            }
            out
        }
        (Mapping::Backward, ImageInterp::Bilinear) => gather_bilinear(image, field),
    };
    ImagePlane::new(w, h, c, samples)
}

fn gather_bilinear(image: &ImagePlane, field: &DisplacementField) -> Vec<u8> {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let src = image.samples();
    let mut out = vec![0u8; w * h * c];
    out.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let i = y * w + x;
            let sx = (x as f64 - field.dx[i]).clamp(0.0, (w - 1) as f64);
            let sy = (y as f64 - field.dy[i]).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for ch in 0..c {
                let at = |xx: usize, yy: usize| src[(yy * w + xx) * c + ch] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                row[x * c + ch] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    out
}
