//! Gaussian kernels and smoothed random displacement fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::SampleStream;

/// One `(alpha, sigma)` deformation setting, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl DeformationParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        check_sigma(sigma)?;
        Ok(Self { alpha, sigma })
    }

    pub fn radius(&self) -> usize {
        radius_unchecked(self.sigma)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and > 0, got {sigma}"
        )));
    }
    Ok(())
}

fn radius_unchecked(sigma: f64) -> usize {
    // f64::round ties away from zero.
    ((3.0 * sigma).round() as usize).max(1)
}

/// Half-width `r` of the kernel for `sigma`; the full kernel is `2r + 1` wide.
pub fn kernel_radius(sigma: f64) -> Result<usize> {
    check_sigma(sigma)?;
    Ok(radius_unchecked(sigma))
}

/// Discrete isotropic Gaussian on `[-r, r]^2`, renormalized to unit sum.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    /// Row-major `(2r+1) x (2r+1)` weights, row index is `n + r`.
    weights: Vec<f64>,
    /// Normalized 1-D profile; the 2-D weights are its outer product.
    profile: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        let radius = kernel_radius(sigma)?;
        let r = radius as i64;
        let size = 2 * radius + 1;
        let denom = 2.0 * sigma * sigma;
        let scale = 1.0 / (std::f64::consts::PI * denom);

        let mut weights = Vec::with_capacity(size * size);
        for n in -r..=r {
            for m in -r..=r {
                weights.push(scale * (-((m * m + n * n) as f64) / denom).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let mut profile: Vec<f64> = (-r..=r)
            .map(|m| (-((m * m) as f64) / denom).exp())
            .collect();
        let total: f64 = profile.iter().sum();
        profile.iter_mut().for_each(|w| *w /= total);

        Ok(Self {
            sigma,
            radius,
            weights,
            profile,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    /// Weight at signed offset `(m, n)`; `None` outside `[-r, r]^2`.
    pub fn weight(&self, m: i64, n: i64) -> Option<f64> {
        let r = self.radius as i64;
        if m.abs() > r || n.abs() > r {
            return None;
        }
        let size = self.size();
        Some(self.weights[(n + r) as usize * size + (m + r) as usize])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }
}

/// Per-pixel displacement in pixels, row-major with index `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub params: DeformationParams,
}

impl DisplacementField {
    /// A field of all-zero displacements.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
            params: DeformationParams {
                alpha: 0.0,
                sigma: 1.0,
            },
        }
    }

    /// Constant displacement everywhere; handy for hand-traced fixtures.
    pub fn constant(width: usize, height: usize, dx: f64, dy: f64) -> Self {
        Self {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
            params: DeformationParams {
                alpha: dx.abs().max(dy.abs()),
                sigma: 1.0,
            },
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.dx
            .iter()
            .chain(self.dy.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Draws `w * h` values `alpha * (2u - 1)` in row-major order.
pub fn noise_grid(width: usize, height: usize, alpha: f64, rng: &mut SampleStream) -> Vec<f64> {
    (0..width * height)
        .map(|_| alpha * (2.0 * rng.uniform() - 1.0))
        .collect()
}

/// Zero-padded same-size convolution as a horizontal then a vertical 1-D pass.
pub fn smooth(values: &[f64], width: usize, height: usize, kernel: &GaussianKernel) -> Vec<f64> {
    assert_eq!(values.len(), width * height);
    let profile = kernel.profile();
    let r = kernel.radius() as isize;

    let mut rows = vec![0.0; width * height];
    rows.par_chunks_mut(width)
        .zip(values.par_chunks(width))
        .for_each(|(out, src)| {
            for (x, o) in out.iter_mut().enumerate() {
                let lo = (x as isize - r).max(0) as usize;
                let hi = (x as isize + r).min(width as isize - 1) as usize;
                let mut acc = 0.0;
                for (sx, s) in src.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += profile[(sx as isize - x as isize + r) as usize] * s;
                }
                *o = acc;
            }
        });

    let mut out = vec![0.0; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        let lo = (y as isize - r).max(0) as usize;
        let hi = (y as isize + r).min(height as isize - 1) as usize;
        for sy in lo..=hi {
            let w = profile[(sy as isize - y as isize + r) as usize];
            let src = &rows[sy * width..(sy + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    });
    out
}

/// Generates `dx` then `dy`, each from a fresh noise grid smoothed by the
/// Gaussian for `params.sigma`.
pub fn generate_displacement_field(
    width: usize,
    height: usize,
    params: DeformationParams,
    rng: &mut SampleStream,
) -> Result<DisplacementField> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "displacement field needs a non-empty lattice, got {width}x{height}"
        )));
    }
    let params = DeformationParams::new(params.alpha, params.sigma)?;
    let kernel = GaussianKernel::new(params.sigma)?;

    // Both grids are drawn before any smoothing so the draw order is fixed.
    let noise_x = noise_grid(width, height, params.alpha, rng);
    let noise_y = noise_grid(width, height, params.alpha, rng);
    let (dx, dy) = rayon::join(
        || smooth(&noise_x, width, height, &kernel),
        || smooth(&noise_y, width, height, &kernel),
    );
    Ok(DisplacementField {
        width,
        height,
        dx,
        dy,
        params,
    })
}
