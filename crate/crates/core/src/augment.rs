//! Label-only elastic deformation and its ablation regimes.
//!
//! Per sample and epoch the deformation stream is consumed as: one gate
//! draw, one Ω draw, then `2 * w * h` noise draws if the gate passed. The
//! flip and resize companions read from their own sub-streams so toggling
//! them never shifts the deformation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{generate_displacement_field, DeformationParams, DisplacementField};
use crate::raster::{ImagePlane, LabelMask};
use crate::stream::{SampleStream, StreamKey, DEFORM_STREAM, FLIP_STREAM, RESIZE_STREAM};
use crate::warp::{warp_image, warp_label, WarpSpec};

pub const DEFAULT_ALPHAS: [f64; 5] = [1.0, 15.0, 30.0, 50.0, 100.0];
pub const DEFAULT_SIGMAS: [f64; 3] = [3.0, 5.0, 10.0];
pub const DEFAULT_P: f64 = 0.5;

/// The pool of `(alpha, sigma)` pairs one is drawn from per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DeformationParams>", into = "Vec<DeformationParams>")]
pub struct OmegaSet {
    pairs: Vec<DeformationParams>,
}

impl OmegaSet {
    pub fn new(pairs: Vec<DeformationParams>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter("omega set is empty".into()));
        }
        let pairs = pairs
            .into_iter()
            .map(|p| DeformationParams::new(p.alpha, p.sigma))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs })
    }

    /// Cartesian product, alpha-major.
    pub fn product(alphas: &[f64], sigmas: &[f64]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(alphas.len() * sigmas.len());
        for &alpha in alphas {
            for &sigma in sigmas {
                pairs.push(DeformationParams::new(alpha, sigma)?);
            }
        }
        Self::new(pairs)
    }

    pub fn single(alpha: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![DeformationParams::new(alpha, sigma)?])
    }

    pub fn pairs(&self) -> &[DeformationParams] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl Default for OmegaSet {
    fn default() -> Self {
        Self::product(&DEFAULT_ALPHAS, &DEFAULT_SIGMAS).expect("default omega is valid")
    }
}

impl TryFrom<Vec<DeformationParams>> for OmegaSet {
    type Error = Error;

    fn try_from(pairs: Vec<DeformationParams>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<OmegaSet> for Vec<DeformationParams> {
    fn from(o: OmegaSet) -> Self {
        o.pairs
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("omega {what} entry {t:?} is not a number"))
            })
        })
        .collect()
}

/// `"1,15,30x3,5"` is the product of alphas `{1, 15, 30}` and sigmas `{3, 5}`.
impl FromStr for OmegaSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (alphas, sigmas) = s
            .split_once(['x', 'X', '×'])
            .ok_or_else(|| Error::InvalidParameter(format!("omega {s:?} must look like \"a1,a2xs1,s2\"")))?;
        Self::product(&parse_list(alphas, "alpha")?, &parse_list(sigmas, "sigma")?)
    }
}

/// Writes the product encoding when the set is a full product, otherwise
/// `alpha:sigma` pairs separated by `;`.
impl fmt::Display for OmegaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut alphas: Vec<f64> = Vec::new();
        let mut sigmas: Vec<f64> = Vec::new();
        for p in &self.pairs {
            if !alphas.contains(&p.alpha) {
                alphas.push(p.alpha);
            }
            if !sigmas.contains(&p.sigma) {
                sigmas.push(p.sigma);
            }
        }
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match OmegaSet::product(&alphas, &sigmas) {
            Ok(prod) if prod == *self => write!(f, "{}x{}", join(&alphas), join(&sigmas)),
            _ => {
                let parts: Vec<String> = self
                    .pairs
                    .iter()
                    .map(|p| format!("{}:{}", p.alpha, p.sigma))
                    .collect();
                write!(f, "{}", parts.join(";"))
            }
        }
    }
}

/// Which half of the pair receives the deformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    #[serde(alias = "label")]
    LabelOnly,
    #[serde(alias = "image")]
    ImageOnly,
    /// The same field warps image and mask.
    Identical,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" | "label_only" => Ok(Mode::LabelOnly),
            "image" | "image_only" => Ok(Mode::ImageOnly),
            "identical" => Ok(Mode::Identical),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected label, image or identical)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::LabelOnly => "label",
            Mode::ImageOnly => "image",
            Mode::Identical => "identical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Probability that the deformation is applied.
    pub p: f64,
    pub omega: OmegaSet,
    pub mode: Mode,
    pub warp_spec: WarpSpec,
    pub master_seed: u64,
    pub hflip_p: f64,
    /// Scale factors `[lo, hi]` for random resize; `None` disables it.
    pub resize_range: Option<(f64, f64)>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            omega: OmegaSet::default(),
            mode: Mode::default(),
            warp_spec: WarpSpec::default(),
            master_seed: 0,
            hflip_p: 0.0,
            resize_range: None,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("p must be in [0, 1], got {}", self.p)));
        }
        if !(0.0..=1.0).contains(&self.hflip_p) {
            return Err(Error::InvalidParameter(format!(
                "hflip_p must be in [0, 1], got {}",
                self.hflip_p
            )));
        }
        if let Some((lo, hi)) = self.resize_range {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "resize range must satisfy 0 < lo <= hi, got {lo}:{hi}"
                )));
            }
        }
        if self.omega.is_empty() {
            return Err(Error::InvalidParameter("omega set is empty".into()));
        }
        Ok(())
    }
}

/// An image and its mask, tagged with where they sit in the training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub image: ImagePlane,
    pub mask: LabelMask,
    pub sample_id: u64,
    pub epoch: u64,
}

impl SamplePair {
    pub fn new(image: ImagePlane, mask: LabelMask, sample_id: u64, epoch: u64) -> Result<Self> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(Error::InvalidInput(format!(
                "image is {}x{} but mask is {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(Self {
            image,
            mask,
            sample_id,
            epoch,
        })
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn stream_key(&self, master_seed: u64) -> StreamKey {
        StreamKey::new(master_seed, self.sample_id, self.epoch)
    }

    /// Flips image and mask together.
    pub fn hflip(&self) -> Self {
        Self {
            image: self.image.hflip(),
            mask: self.mask.hflip(),
            ..*self
        }
    }
}

/// Uniform choice over the pairs of `omega`, from exactly one draw.
pub fn sample_params(omega: &OmegaSet, rng: &mut SampleStream) -> Result<DeformationParams> {
    if omega.is_empty() {
        return Err(Error::InvalidParameter("omega set is empty".into()));
    }
    Ok(omega.pairs()[rng.index(omega.len())])
}

/// Draws the gate and the Ω choice; `None` means the sample is skipped.
///
/// The gate value lies in `(0, 1]` and the sample is skipped when it exceeds
/// `p`, so `p = 0` always skips and `p = 1` never does.
pub fn draw_plan(config: &AugmentConfig, rng: &mut SampleStream) -> Result<Option<DeformationParams>> {
    let gate = 1.0 - rng.uniform();
    let params = sample_params(&config.omega, rng)?;
    Ok((gate <= config.p).then_some(params))
}

/// Deforms only the label, returning it unchanged when the gate skips.
pub fn nsegment(mask: &LabelMask, config: &AugmentConfig, rng: &mut SampleStream) -> Result<LabelMask> {
    config.validate()?;
    match draw_plan(config, rng)? {
        None => Ok(mask.clone()),
        Some(params) => {
            let field = generate_displacement_field(mask.width(), mask.height(), params, rng)?;
            warp_label(mask, &field, &config.warp_spec)
        }
    }
}

/// What happened to one sample, for provenance records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    /// `None` when the gate skipped the deformation.
    pub deformation: Option<DeformationParams>,
    pub hflip: bool,
    pub resize_scale: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub sample: SamplePair,
    pub record: AugmentRecord,
    /// Field applied to the mask, if any.
    pub mask_field: Option<Arc<DisplacementField>>,
    /// Field applied to the image, if any.
    pub image_field: Option<Arc<DisplacementField>>,
}

/// Runs the deformation for `config.mode`, then flip, then resize. The input
/// is never modified and the result depends only on the sample, its ids and
/// the config.
pub fn apply_augmentation(sample: &SamplePair, config: &AugmentConfig) -> Result<Augmented> {
    config.validate()?;
    let key = sample.stream_key(config.master_seed);
    let mut rng = key.stream(DEFORM_STREAM);
    let (w, h) = (sample.width(), sample.height());

    let plan = draw_plan(config, &mut rng)?;
    let field = match plan {
        Some(params) => Some(Arc::new(generate_displacement_field(w, h, params, &mut rng)?)),
        None => None,
    };
    let (mask_field, image_field) = match config.mode {
        Mode::LabelOnly => (field, None),
        Mode::ImageOnly => (None, field),
        Mode::Identical => (field.clone(), field),
    };

    let mask = match &mask_field {
        Some(f) => warp_label(&sample.mask, f, &config.warp_spec)?,
        None => sample.mask.clone(),
    };
    let image = match &image_field {
        Some(f) => warp_image(&sample.image, f, &config.warp_spec)?,
        None => sample.image.clone(),
    };
    let mut out = SamplePair { image, mask, ..*sample };

    let hflip = config.hflip_p > 0.0 && key.stream(FLIP_STREAM).uniform() < config.hflip_p;
    if hflip {
        out = out.hflip();
    }

    let resize_scale = config.resize_range.map(|(lo, hi)| {
        let u = key.stream(RESIZE_STREAM).uniform();
        lo + u * (hi - lo)
    });
    if let Some(scale) = resize_scale {
        let nw = scaled_dim(w, scale);
        let nh = scaled_dim(h, scale);
        out.mask = out.mask.resize_nearest(nw, nh);
        out.image = out.image.resize_bilinear(nw, nh);
    }

    Ok(Augmented {
        sample: out,
        record: AugmentRecord {
            deformation: plan,
            hflip,
            resize_scale,
        },
        mask_field,
        image_field,
    })
}

fn scaled_dim(dim: usize, scale: f64) -> usize {
    ((dim as f64 * scale).round() as usize).max(1)
}
