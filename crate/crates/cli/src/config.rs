//! Config-file layer. Every flag has a key of the same name (dashes become
//! underscores); values given on the command line win over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OmegaEntry {
    Encoded(String),
    Product { alphas: Vec<f64>, sigmas: Vec<f64> },
}

impl OmegaEntry {
    pub fn to_omega(&self) -> Result<nsegment::OmegaSet> {
        Ok(match self {
            OmegaEntry::Encoded(s) => s.parse()?,
            OmegaEntry::Product { alphas, sigmas } => nsegment::OmegaSet::product(alphas, sigmas)?,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<String>,
    pub p: Option<f64>,
    pub omega: Option<OmegaEntry>,
    pub seed: Option<u64>,
    pub epochs: Option<u64>,
    pub workers: Option<usize>,
    pub fill: Option<String>,
    pub mapping: Option<String>,
    pub image_interp: Option<String>,
    pub hflip_p: Option<f64>,
    pub resize: Option<String>,
    pub tile: Option<usize>,
    pub stride: Option<usize>,
    pub edge: Option<String>,
    pub palette: Option<PathBuf>,
    pub class_map: Option<String>,
    pub report: Option<PathBuf>,
    pub bins: Option<Vec<u64>>,
    pub tiny: Option<u64>,
    pub split: Option<String>,
    pub grid: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative palette paths are relative to the config file.
        if let (Some(p), Some(base)) = (&cfg.palette, path.parent()) {
            if p.is_relative() {
                cfg.palette = Some(base.join(p));
            }
        }
        Ok(cfg)
    }
}

/// Flag, then file, then fallback.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_omega_forms() {
        let a: FileConfig = toml::from_str("omega = \"1,15x3\"\np = 0.25\n").unwrap();
        assert_eq!(a.omega.unwrap().to_omega().unwrap().len(), 2);
        assert_eq!(a.p, Some(0.25));
        let b: FileConfig = toml::from_str("[omega]\nalphas = [1, 15, 30]\nsigmas = [3, 5]\n").unwrap();
        assert_eq!(b.omega.unwrap().to_omega().unwrap().len(), 6);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("alpha = 3\n").is_err());
    }

    #[test]
    fn flag_wins() {
        assert_eq!(pick(Some(1), &Some(2)), Some(1));
        assert_eq!(pick(None, &Some(2)), Some(2));
        assert_eq!(pick::<u8>(None, &None), None);
    }
}
