//! Array-level entry point for training pipelines.
//!
//! A [`Transform`] is built from a key/value mapping whose keys mirror the CLI
//! flags and is then called per sample with raw row-major buffers. Results
//! are identical to [`apply_augmentation`] and to the corpus CLI for the same
//! configuration, seed, sample id and epoch.

use serde_json::{Map, Value};

use crate::augment::{apply_augmentation, AugmentConfig, OmegaSet, SamplePair};
use crate::error::{Error, Result};
use crate::raster::{ImagePlane, LabelMask};
use crate::warp::{FillPolicy, ImageInterp, Mapping};

/// Keys accepted by [`augment_config_from_map`].
pub const CONFIG_KEYS: [&str; 9] = [
    "mode",
    "p",
    "omega",
    "seed",
    "fill",
    "mapping",
    "hflip_p",
    "resize",
    "image_interp",
];

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{key}: {msg}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| invalid(key, "not a number")),
        Value::String(s) => s.trim().parse().map_err(|_| invalid(key, format!("{s:?} is not a number"))),
        other => Err(invalid(key, format!("expected a number, got {other}"))),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| invalid(key, format!("expected a string, got {v}")))
}

fn as_list(key: &str, v: Option<&Value>) -> Result<Vec<f64>> {
    match v {
        Some(Value::Array(items)) => items.iter().map(|i| as_f64(key, i)).collect(),
        _ => Err(invalid(key, "expected a list of numbers")),
    }
}

/// Parses `"lo:hi"` scale bounds.
pub fn parse_resize(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| invalid("resize", format!("{s:?} must look like lo:hi")))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid("resize", format!("{t:?} is not a number")));
    Ok((num(lo)?, num(hi)?))
}

pub fn parse_fill(s: &str) -> Result<FillPolicy> {
    match s {
        "ignore" | "ignore_label" => Ok(FillPolicy::IgnoreLabel),
        "nearest" | "nearest_source" => Ok(FillPolicy::NearestSource),
        other => Err(invalid("fill", format!("unknown policy {other:?} (expected ignore or nearest)"))),
    }
}

pub fn parse_mapping(s: &str) -> Result<Mapping> {
    match s {
        "forward" => Ok(Mapping::Forward),
        "backward" => Ok(Mapping::Backward),
        other => Err(invalid("mapping", format!("unknown mapping {other:?} (expected forward or backward)"))),
    }
}

pub fn parse_interp(s: &str) -> Result<ImageInterp> {
    match s {
        "nearest" => Ok(ImageInterp::Nearest),
        "bilinear" => Ok(ImageInterp::Bilinear),
        other => Err(invalid("image_interp", format!("unknown interpolation {other:?}"))),
    }
}

/// Applies one key to `config`. Unknown keys are rejected by name.
pub fn apply_setting(config: &mut AugmentConfig, key: &str, value: &Value) -> Result<()> {
    match key.replace('-', "_").as_str() {
        "mode" => config.mode = as_str(key, value)?.parse()?,
        "p" => config.p = as_f64(key, value)?,
        "omega" => {
            config.omega = match value {
                Value::String(s) => s.parse()?,
                Value::Object(o) => {
                    OmegaSet::product(&as_list("omega.alphas", o.get("alphas"))?, &as_list("omega.sigmas", o.get("sigmas"))?)?
                }
                other => return Err(invalid(key, format!("expected \"a,..xs,..\" or a table, got {other}"))),
            }
        }
        "seed" => {
            config.master_seed = match value {
                Value::Number(n) => n.as_u64().ok_or_else(|| invalid(key, "must be a non-negative integer"))?,
                Value::String(s) => s.parse().map_err(|_| invalid(key, format!("{s:?} is not an integer")))?,
                other => return Err(invalid(key, format!("expected an integer, got {other}"))),
            }
        }
        "fill" => config.warp_spec.fill = parse_fill(as_str(key, value)?)?,
        "mapping" => config.warp_spec.mapping = parse_mapping(as_str(key, value)?)?,
        "image_interp" => config.warp_spec.image_interp = parse_interp(as_str(key, value)?)?,
        "hflip_p" => config.hflip_p = as_f64(key, value)?,
        "resize" => {
            config.resize_range = match value {
                Value::Null => None,
                Value::String(s) => Some(parse_resize(s)?),
                Value::Array(_) => {
                    let v = as_list(key, Some(value))?;
                    match v.as_slice() {
                        [lo, hi] => Some((*lo, *hi)),
                        _ => return Err(invalid(key, "expected [lo, hi]")),
                    }
                }
                other => return Err(invalid(key, format!("expected \"lo:hi\", got {other}"))),
            }
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown key {key:?} (accepted: {})",
                CONFIG_KEYS.join(", ")
            )))
        }
    }
    Ok(())
}

/// Defaults overlaid with `map`, validated.
pub fn augment_config_from_map(map: &Map<String, Value>) -> Result<AugmentConfig> {
    let mut config = AugmentConfig::default();
    for (k, v) in map {
        apply_setting(&mut config, k, v)?;
    }
    config.validate()?;
    Ok(config)
}

/// Immutable, shareable per-sample transform.
#[derive(Debug, Clone)]
pub struct Transform {
    config: AugmentConfig,
}

impl Transform {
    pub fn new(config: AugmentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn from_map(map: &Map<String, Value>) -> Result<Self> {
        Self::new(augment_config_from_map(map)?)
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.config
    }

    /// Transforms one sample given as row-major buffers. Returns the new
    /// image and mask with their dimensions, which differ from the input
    /// only when random resize is enabled.
    #[allow(clippy::too_many_arguments)]
    pub fn call(
        &self,
        image: &[u8],
        width: usize,
        height: usize,
        channels: usize,
        mask: &[u8],
        sample_id: u64,
        epoch: u64,
    ) -> Result<(ImagePlane, LabelMask)> {
        if mask.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} values but the image is {width}x{height}",
                mask.len()
            )));
        }
        let image = ImagePlane::new(width, height, channels, image.to_vec())?;
        let mask = LabelMask::from_values(width, height, mask.to_vec())?;
        let pair = SamplePair::new(image, mask, sample_id, epoch)?;
        let out = apply_augmentation(&pair, &self.config)?;
        Ok((out.sample.image, out.sample.mask))
    }
}
