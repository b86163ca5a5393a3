//! Reading, tiling and class remapping of image/mask pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, GrayImage, ImageBuffer};
use serde::{Deserialize, Serialize};

use crate::augment::SamplePair;
use crate::error::{Error, Result};
use crate::raster::{ImagePlane, LabelMask, IGNORE};

pub const DEFAULT_TILE: usize = 512;
pub const DEFAULT_STRIDE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    /// Add a final window flush with the far edge when the stride overshoots.
    #[default]
    Snap,
    /// Keep only the windows on the stride lattice.
    Drop,
}

impl FromStr for EdgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snap" => Ok(EdgePolicy::Snap),
            "drop" => Ok(EdgePolicy::Drop),
            other => Err(Error::InvalidParameter(format!(
                "unknown edge policy {other:?} (expected snap or drop)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingSpec {
    pub tile: usize,
    pub stride: usize,
    pub edge_policy: EdgePolicy,
}

impl Default for TilingSpec {
    fn default() -> Self {
        Self {
            tile: DEFAULT_TILE,
            stride: DEFAULT_STRIDE,
            edge_policy: EdgePolicy::Snap,
        }
    }
}

impl TilingSpec {
    pub fn new(tile: usize, stride: usize, edge_policy: EdgePolicy) -> Result<Self> {
        let spec = Self {
            tile,
            stride,
            edge_policy,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.tile {
            return Err(Error::InvalidParameter(format!(
                "stride must satisfy 1 <= stride <= tile, got stride {} tile {}",
                self.stride, self.tile
            )));
        }
        Ok(())
    }

    /// Window origins along one axis of length `dim`, ascending and unique.
    pub fn axis_origins(&self, dim: usize) -> Result<Vec<usize>> {
        self.validate()?;
        if self.tile > dim {
            return match self.edge_policy {
                EdgePolicy::Drop => Ok(Vec::new()),
                EdgePolicy::Snap => Err(Error::InvalidParameter(format!(
                    "tile {} does not fit in dimension {dim}",
                    self.tile
                ))),
            };
        }
        let span = dim - self.tile;
        let mut origins: Vec<usize> = (0..=span / self.stride).map(|i| i * self.stride).collect();
        if self.edge_policy == EdgePolicy::Snap && span % self.stride != 0 {
            origins.push(span);
        }
        Ok(origins)
    }
}

/// One window cut from a larger pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub sample: SamplePair,
}

/// Cuts `sample` into `spec.tile`-sized windows in row-major origin order.
pub fn tile_pair(sample: &SamplePair, spec: &TilingSpec) -> Result<Vec<Patch>> {
    let (w, h) = (sample.width(), sample.height());
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("cannot tile an empty sample".into()));
    }
    if spec.edge_policy == EdgePolicy::Drop && (spec.tile > w || spec.tile > h) {
        spec.validate()?;
        return Ok(Vec::new());
    }
    let xs = spec.axis_origins(w)?;
    let ys = spec.axis_origins(h)?;
    let t = spec.tile;
    let mut patches = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            patches.push(Patch {
                x,
                y,
                sample: SamplePair {
                    image: sample.image.crop(x, y, t, t),
                    mask: sample.mask.crop(x, y, t, t),
                    ..*sample
                },
            });
        }
    }
    Ok(patches)
}

/// Source class index to target index or [`IGNORE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    table: BTreeMap<u8, u8>,
    class_names: Vec<String>,
    classes: u8,
}

impl ClassMap {
    pub fn new(table: BTreeMap<u8, u8>, class_names: Vec<String>) -> Result<Self> {
        let mut targets: Vec<u8> = table.values().copied().filter(|&t| t != IGNORE).collect();
        targets.sort_unstable();
        targets.dedup();
        if targets.iter().enumerate().any(|(i, &t)| t as usize != i) {
            return Err(Error::InvalidParameter(format!(
                "class map targets must be dense from 0, got {targets:?}"
            )));
        }
        if table.contains_key(&IGNORE) {
            return Err(Error::InvalidParameter(format!(
                "source value {IGNORE} is reserved for ignore"
            )));
        }
        let classes = (targets.len() as u8).max(1);
        Ok(Self {
            table,
            class_names,
            classes,
        })
    }

    pub fn identity(classes: u8) -> Self {
        let table = (0..classes).map(|c| (c, c)).collect();
        Self::new(table, Vec::new()).expect("identity map is dense")
    }

    pub fn get(&self, source: u8) -> Option<u8> {
        self.table.get(&source).copied()
    }

    /// Number of target classes.
    pub fn classes(&self) -> u8 {
        self.classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }
}

/// Comma-separated targets indexed by source class, e.g. `"0,1,2,3,4,ignore"`.
impl FromStr for ClassMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (src, tok) in s.split(',').enumerate() {
            let tok = tok.trim();
            let target = if tok.eq_ignore_ascii_case("ignore") {
                IGNORE
            } else {
                tok.parse::<u8>()
                    .map_err(|_| Error::InvalidParameter(format!("class map entry {tok:?} is not an index")))?
            };
            let src = u8::try_from(src)
                .map_err(|_| Error::InvalidParameter("class map has more than 255 entries".into()))?;
            table.insert(src, target);
        }
        Self::new(table, Vec::new())
    }
}

/// Rewrites class indices through `map`; [`IGNORE`] passes through.
pub fn remap_classes(mask: &LabelMask, map: &ClassMap) -> Result<LabelMask> {
    remap_values(mask.width(), mask.height(), mask.values(), map)
}

fn remap_values(width: usize, height: usize, values: &[u8], map: &ClassMap) -> Result<LabelMask> {
    let mut lut = [None; 256];
    lut[IGNORE as usize] = Some(IGNORE);
    for (&s, &t) in &map.table {
        lut[s as usize] = Some(t);
    }
    let out = values
        .iter()
        .map(|&v| lut[v as usize].ok_or_else(|| Error::Data(format!("class index {v} has no entry in the class map"))))
        .collect::<Result<Vec<u8>>>()?;
    LabelMask::new(width, height, map.classes(), out)
}

/// RGB color to class index, for color-coded masks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Palette {
    colors: BTreeMap<[u8; 3], u8>,
}

impl Palette {
    pub fn new(entries: impl IntoIterator<Item = ([u8; 3], u8)>) -> Self {
        Self {
            colors: entries.into_iter().collect(),
        }
    }

    pub fn lookup(&self, rgb: [u8; 3]) -> Option<u8> {
        self.colors.get(&rgb).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = ([u8; 3], u8)> + '_ {
        self.colors.iter().map(|(&c, &i)| (c, i))
    }

    /// One entry per line: `R G B INDEX` (commas also accepted), `INDEX` may
    /// be `ignore`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut colors = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            let bad = || Error::InvalidParameter(format!("palette line {}: expected \"R G B INDEX\"", lineno + 1));
            if toks.len() != 4 {
                return Err(bad());
            }
            let mut rgb = [0u8; 3];
            for (c, t) in rgb.iter_mut().zip(&toks[..3]) {
                *c = t.parse().map_err(|_| bad())?;
            }
            let index = if toks[3].eq_ignore_ascii_case("ignore") {
                IGNORE
            } else {
                toks[3].parse().map_err(|_| bad())?
            };
            if colors.insert(rgb, index).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "palette line {}: color {rgb:?} listed twice",
                    lineno + 1
                )));
            }
        }
        Ok(Self { colors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn decode(&self, width: usize, rgb: &[u8]) -> Result<Vec<u8>> {
        rgb.chunks_exact(3)
            .enumerate()
            .map(|(i, px)| {
                let c = [px[0], px[1], px[2]];
                self.lookup(c).ok_or_else(|| {
                    Error::Data(format!(
                        "color {c:?} at pixel ({}, {}) is not in the palette",
                        i % width,
                        i / width
                    ))
                })
            })
            .collect()
    }
}

pub fn load_image(path: &Path) -> Result<ImagePlane> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, samples) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(b) => (2, b.into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(b) => (4, b.into_raw()),
        other if other.color().has_alpha() => (4, other.into_rgba8().into_raw()),
        other if other.color().channel_count() == 1 => (1, other.into_luma8().into_raw()),
        other => (3, other.into_rgb8().into_raw()),
    };
    ImagePlane::new(w, h, channels, samples)
}

/// Reads an index mask (8-bit gray) or, with a palette, a color-coded mask.
/// With a class map the decoded values are remapped and validated; without
/// one the class count is inferred from the largest index.
pub fn load_mask(path: &Path, palette: Option<&Palette>, class_map: Option<&ClassMap>) -> Result<LabelMask> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let with_path = |e: Error| Error::Data(format!("{}: {e}", path.display()));
    let values = match (img, palette) {
        (DynamicImage::ImageLuma8(b), _) => b.into_raw(),
        (DynamicImage::ImageRgb8(b), Some(pal)) => pal.decode(w, b.as_raw()).map_err(with_path)?,
        (DynamicImage::ImageRgba8(b), Some(pal)) => {
            let rgb = DynamicImage::ImageRgba8(b).into_rgb8();
            pal.decode(w, rgb.as_raw()).map_err(with_path)?
        }
        (other, None) if other.color().channel_count() >= 3 => {
            return Err(Error::Data(format!(
                "{}: color mask needs a palette",
                path.display()
            )))
        }
        (other, _) => {
            return Err(Error::Data(format!(
                "{}: mask must be 8-bit single channel, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    match class_map {
        Some(map) => remap_values(w, h, &values, map).map_err(with_path),
        None => LabelMask::from_values(w, h, values).map_err(with_path),
    }
}

pub fn load_pair(
    image_path: &Path,
    mask_path: &Path,
    palette: Option<&Palette>,
    class_map: Option<&ClassMap>,
) -> Result<SamplePair> {
    let image = load_image(image_path)?;
    let mask = load_mask(mask_path, palette, class_map)?;
    SamplePair::new(image, mask, 0, 0).map_err(|e| {
        Error::InvalidInput(format!("{} / {}: {e}", image_path.display(), mask_path.display()))
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn save_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    ensure_parent(path)?;
    let buf = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.values().to_vec())
        .expect("mask buffer matches its dimensions");
    buf.save(path).map_err(|e| Error::image(path, e))
}

pub fn save_image(path: &Path, image: &ImagePlane) -> Result<()> {
    ensure_parent(path)?;
    let (w, h) = (image.width() as u32, image.height() as u32);
    let raw = image.samples().to_vec();
    let dynamic = match image.channels() {
        1 => ImageBuffer::from_raw(w, h, raw).map(DynamicImage::ImageLuma8),
        2 => ImageBuffer::from_raw(w, h, raw).map(DynamicImage::ImageLumaA8),
        3 => ImageBuffer::from_raw(w, h, raw).map(DynamicImage::ImageRgb8),
        4 => ImageBuffer::from_raw(w, h, raw).map(DynamicImage::ImageRgba8),
        c => {
            return Err(Error::InvalidInput(format!(
                "cannot encode an image with {c} channels"
            )))
        }
    }
    .expect("image buffer matches its dimensions");
    dynamic.save(path).map_err(|e| Error::image(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" | "val" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    /// Filled in by [`DatasetManifest::probe`].
    pub width: usize,
    pub height: usize,
}

impl ManifestEntry {
    pub fn new(image: impl Into<PathBuf>, mask: impl Into<PathBuf>) -> Self {
        Self {
            image: image.into(),
            mask: mask.into(),
            width: 0,
            height: 0,
        }
    }

    /// Image file stem, used to name outputs.
    pub fn stem(&self) -> String {
        self.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub split: Split,
}

impl DatasetManifest {
    /// Parses `image<TAB>mask` lines. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, split: Split) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (image, mask) = line.split_once('\t').ok_or_else(|| {
                Error::Data(format!("manifest line {}: expected image<TAB>mask", lineno + 1))
            })?;
            entries.push(ManifestEntry::new(base.join(image.trim()), base.join(mask.trim())));
        }
        Ok(Self { entries, split })
    }

    pub fn read(path: &Path, split: Split) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, split)
    }

    /// Pairs files from two directories by file stem, sorted by stem.
    pub fn from_dirs(images: &Path, masks: &Path, split: Split) -> Result<Self> {
        let index = |dir: &Path| -> Result<BTreeMap<String, PathBuf>> {
            let mut out = BTreeMap::new();
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let path = entry.map_err(|e| Error::io(dir, e))?.path();
                if path.is_file() {
                    if let Some(stem) = path.file_stem() {
                        out.insert(stem.to_string_lossy().into_owned(), path);
                    }
                }
            }
            Ok(out)
        };
        let images = index(images)?;
        let mut masks = index(masks)?;
        let mut entries = Vec::with_capacity(images.len());
        let mut missing = Vec::new();
        for (stem, image) in images {
            match masks.remove(&stem) {
                Some(mask) => entries.push(ManifestEntry::new(image, mask)),
                None => missing.push(stem),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Data(format!("images without masks: {}", missing.join(", "))));
        }
        Ok(Self { entries, split })
    }

    /// Mask-only listing for statistics: every file in `masks`, sorted.
    pub fn masks_in(dir: &Path, split: Split) -> Result<Self> {
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_file() {
                paths.push(path);
            }
        }
        paths.sort();
        let entries = paths.into_iter().map(|p| ManifestEntry::new(PathBuf::new(), p)).collect();
        Ok(Self { entries, split })
    }

    /// Reads image headers and checks that each pair agrees on dimensions.
    pub fn probe(&mut self) -> Result<()> {
        for e in &mut self.entries {
            let (iw, ih) = image::image_dimensions(&e.image).map_err(|err| Error::image(&e.image, err))?;
            let (mw, mh) = image::image_dimensions(&e.mask).map_err(|err| Error::image(&e.mask, err))?;
            if (iw, ih) != (mw, mh) {
                return Err(Error::InvalidInput(format!(
                    "{} is {iw}x{ih} but {} is {mw}x{mh}",
                    e.image.display(),
                    e.mask.display()
                )));
            }
            e.width = iw as usize;
            e.height = ih as usize;
        }
        Ok(())
    }

    /// Writes the tab-separated form, with paths relative to the manifest's
    /// directory where possible.
    pub fn write(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut text = String::new();
        for e in &self.entries {
            text.push_str(&rel(&e.image));
            text.push('\t');
            text.push_str(&rel(&e.mask));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
