//! Brute-force reference implementations. Nothing here calls into the
//! optimized code paths it is used to check.
#![allow(dead_code)]

use nsegment::{LabelMask, SampleStream, IGNORE};

/// Unnormalized-then-renormalized 2-D Gaussian, evaluated straight from the
/// density on `[-r, r]^2` with `r = round(3 sigma)`.
pub fn gaussian_2d(sigma: f64) -> (i64, Vec<Vec<f64>>) {
    let r = ((3.0 * sigma).round() as i64).max(1);
    let mut w = vec![vec![0.0; (2 * r + 1) as usize]; (2 * r + 1) as usize];
    let mut total = 0.0;
    for n in -r..=r {
        for m in -r..=r {
            let g = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma)
                * (-((m * m + n * n) as f64) / (2.0 * sigma * sigma)).exp();
            w[(n + r) as usize][(m + r) as usize] = g;
            total += g;
        }
    }
    for row in &mut w {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    (r, w)
}

/// Direct zero-padded 2-D convolution, four nested loops.
pub fn convolve_direct(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let (r, k) = gaussian_2d(sigma);
    let mut out = vec![0.0; width * height];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for n in -r..=r {
                for m in -r..=r {
                    let (sx, sy) = (x + m, y + n);
                    if sx < 0 || sy < 0 || sx >= width as i64 || sy >= height as i64 {
                        continue;
                    }
                    acc += k[(n + r) as usize][(m + r) as usize] * values[sy as usize * width + sx as usize];
                }
            }
            out[y as usize * width + x as usize] = acc;
        }
    }
    out
}

/// Re-draws the field's noise from a fresh stream and smooths it directly.
pub fn field_oracle(width: usize, height: usize, alpha: f64, sigma: f64, rng: &mut SampleStream) -> (Vec<f64>, Vec<f64>) {
    let mut draw = || -> Vec<f64> { (0..width * height).map(|_| alpha * (2.0 * rng.uniform() - 1.0)).collect() };
    let nx = draw();
    let ny = draw();
    (convolve_direct(&nx, width, height, sigma), convolve_direct(&ny, width, height, sigma))
}

fn round_clamp(v: f64, dim: usize) -> usize {
    let r = v.round();
    if r < 0.0 {
        0
    } else if r > (dim - 1) as f64 {
        dim - 1
    } else {
        r as usize
    }
}

/// Row-major source loop, last writer wins, unwritten targets get `hole`.
pub fn scatter_naive(values: &[u8], width: usize, height: usize, dx: &[f64], dy: &[f64], hole: u8) -> Vec<u8> {
    let mut out = vec![hole; width * height];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let tx = round_clamp(x as f64 + dx[i], width);
            let ty = round_clamp(y as f64 + dy[i], height);
            out[ty * width + tx] = values[i];
        }
    }
    out
}

/// One binary layer per class, each scattered separately, remembering the
/// source position of the last write; collapsed by picking the class with
/// the latest write at each target.
pub fn scatter_one_hot(mask: &LabelMask, dx: &[f64], dy: &[f64]) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let classes = mask.classes() as usize;
    // layers[j][t] = Some(source index) of the last class-j write to t
    let mut layers: Vec<Vec<Option<usize>>> = vec![vec![None; w * h]; classes];
    for (j, layer) in layers.iter_mut().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if mask.get(x, y) as usize != j {
                    continue;
                }
                let tx = round_clamp(x as f64 + dx[i], w);
                let ty = round_clamp(y as f64 + dy[i], h);
                layer[ty * w + tx] = Some(i);
            }
        }
    }
    (0..w * h)
        .map(|t| {
            let mut best: Option<(usize, u8)> = None;
            for (j, layer) in layers.iter().enumerate() {
                if let Some(src) = layer[t] {
                    if best.map_or(true, |(b, _)| src > b) {
                        best = Some((src, j as u8));
                    }
                }
            }
            best.map_or(IGNORE, |(_, c)| c)
        })
        .collect()
}

/// Per-pixel gather from `p - d(p)`, nearest, all channels.
pub fn gather_naive(samples: &[u8], width: usize, height: usize, channels: usize, dx: &[f64], dy: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len());
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let sx = round_clamp(x as f64 - dx[i], width);
            let sy = round_clamp(y as f64 - dy[i], height);
            let s = (sy * width + sx) * channels;
            out.extend_from_slice(&samples[s..s + channels]);
        }
    }
    out
}

/// Flood fill with an explicit stack, 8-neighbourhood.
pub fn components_flood(mask: &LabelMask, class: u8) -> Vec<u64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut areas = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            let s = (sy * w + sx) as usize;
            if seen[s] || mask.values()[s] != class {
                continue;
            }
            let mut area = 0u64;
            let mut stack = vec![(sx, sy)];
            seen[s] = true;
            while let Some((x, y)) = stack.pop() {
                area += 1;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let n = (ny * w + nx) as usize;
                        if !seen[n] && mask.values()[n] == class {
                            seen[n] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            areas.push(area);
        }
    }
    areas.sort_unstable();
    areas
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
