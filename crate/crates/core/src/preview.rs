//! Panel grids showing one label under a grid of `(alpha, sigma)` settings.
//!
//! Row 0 holds the original pair; row `i + 1`, column `j` holds the label
//! deformed with `alphas[i]` and `sigmas[j]`. Every cell reuses the same
//! noise draws, so cells differ only through alpha and sigma.
//!
//! Class colors come from [`class_color`]; [`IGNORE`] is drawn as gray
//! diagonal hatching.

use crate::augment::SamplePair;
use crate::error::{Error, Result};
use crate::field::{generate_displacement_field, DeformationParams};
use crate::raster::{ImagePlane, LabelMask, IGNORE};
use crate::stream::derive_stream;
use crate::warp::{warp_label, WarpSpec};

/// Pixels between cells.
pub const GAP: usize = 4;
const BACKGROUND: [u8; 3] = [32, 32, 32];

/// Fixed class palette. Indices 0..=5 follow the usual ISPRS coloring.
pub const CLASS_COLORS: [[u8; 3]; 12] = [
    [255, 255, 255],
    [0, 0, 255],
    [0, 255, 255],
    [0, 255, 0],
    [255, 255, 0],
    [255, 0, 0],
    [255, 0, 255],
    [255, 128, 0],
    [128, 0, 255],
    [0, 128, 128],
    [128, 128, 0],
    [128, 64, 64],
];

pub fn class_color(class: u8) -> [u8; 3] {
    match CLASS_COLORS.get(class as usize) {
        Some(&c) => c,
        None => {
            // Spread the remaining indices over a cheap integer hash.
            let h = (class as u32).wrapping_mul(2_654_435_761);
            [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
        }
    }
}

fn ignore_color(x: usize, y: usize) -> [u8; 3] {
    if ((x + y) / 3) % 2 == 0 {
        [96, 96, 96]
    } else {
        [176, 176, 176]
    }
}

fn rgb_at(image: &ImagePlane, x: usize, y: usize) -> [u8; 3] {
    let px = image.pixel(x, y);
    match image.channels() {
        1 | 2 => [px[0]; 3],
        _ => [px[0], px[1], px[2]],
    }
}

/// Half-and-half blend of the image with class colors.
pub fn overlay(image: &ImagePlane, mask: &LabelMask) -> Vec<[u8; 3]> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = mask.get(x, y);
            out.push(if v == IGNORE {
                ignore_color(x, y)
            } else {
                let (a, b) = (rgb_at(image, x, y), class_color(v));
                [0, 1, 2].map(|c| ((a[c] as u16 + b[c] as u16 + 1) / 2) as u8)
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PreviewCell {
    pub params: DeformationParams,
    pub mask: LabelMask,
    /// Largest displacement component of the field used for this cell.
    pub max_displacement: f64,
}

#[derive(Debug, Clone)]
pub struct Preview {
    /// RGB panel grid.
    pub panel: ImagePlane,
    pub cells: Vec<PreviewCell>,
    pub rows: usize,
    pub cols: usize,
}

impl Preview {
    /// Original plus one cell per deformation setting.
    pub fn panel_count(&self) -> usize {
        1 + self.cells.len()
    }
}

pub fn render_preview(
    pair: &SamplePair,
    alphas: &[f64],
    sigmas: &[f64],
    seed: u64,
    spec: &WarpSpec,
) -> Result<Preview> {
    if alphas.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidParameter("preview grid needs at least one alpha and one sigma".into()));
    }
    let (w, h) = (pair.width(), pair.height());
    let mut cells = Vec::with_capacity(alphas.len() * sigmas.len());
    for &alpha in alphas {
        for &sigma in sigmas {
            let params = DeformationParams::new(alpha, sigma)?;
            let mut rng = derive_stream(seed, 0, 0);
            let field = generate_displacement_field(w, h, params, &mut rng)?;
            cells.push(PreviewCell {
                params,
                mask: warp_label(&pair.mask, &field, spec)?,
                max_displacement: field.max_abs(),
            });
        }
    }

    let (rows, cols) = (1 + alphas.len(), sigmas.len());
    let pw = cols * w + (cols + 1) * GAP;
    let ph = rows * h + (rows + 1) * GAP;
    let mut panel = vec![0u8; pw * ph * 3];
    panel.chunks_mut(3).for_each(|px| px.copy_from_slice(&BACKGROUND));

    let mut blit = |row: usize, col: usize, pixels: &[[u8; 3]]| {
        let (ox, oy) = (GAP + col * (w + GAP), GAP + row * (h + GAP));
        for y in 0..h {
            for x in 0..w {
                let i = ((oy + y) * pw + ox + x) * 3;
                panel[i..i + 3].copy_from_slice(&pixels[y * w + x]);
            }
        }
    };
    blit(0, 0, &overlay(&pair.image, &pair.mask));
    for (k, cell) in cells.iter().enumerate() {
        blit(1 + k / cols, k % cols, &overlay(&pair.image, &cell.mask));
    }

    Ok(Preview {
        panel: ImagePlane::new(pw, ph, 3, panel)?,
        cells,
        rows,
        cols,
    })
}
