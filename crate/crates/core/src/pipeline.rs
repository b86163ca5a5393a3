//! Corpus-level drivers: batch augmentation with a provenance sidecar,
//! tiling, and area statistics over a manifest.
//!
//! Every per-sample result depends only on `(master_seed, sample_id, epoch)`
//! and the input bytes, so the worker count changes wall time and nothing else.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{mask_components, AreaAccumulator, AreaReport};
use crate::augment::{apply_augmentation, AugmentConfig, Augmented, Mode, SamplePair};
use crate::dataset::{
    load_mask, load_pair, save_image, save_mask, tile_pair, ClassMap, DatasetManifest, ManifestEntry, Palette,
    TilingSpec,
};
use crate::error::{Error, Result};
use crate::field::DeformationParams;

pub const SIDECAR_NAME: &str = "provenance.json";
pub const TILE_MANIFEST_NAME: &str = "manifest.tsv";

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

/// Augments in-memory samples on `workers` threads; output order follows input.
pub fn augment_batch(samples: &[SamplePair], config: &AugmentConfig, workers: usize) -> Result<Vec<Augmented>> {
    config.validate()?;
    thread_pool(workers)?.install(|| samples.par_iter().map(|s| apply_augmentation(s, config)).collect())
}

/// Directory for one epoch's outputs.
pub fn epoch_dir(out: &Path, epoch: u64) -> PathBuf {
    out.join(format!("epoch_{epoch:03}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Applied(DeformationParams),
    /// Always the string `"skipped"`.
    Skipped(String),
}

impl Outcome {
    pub fn skipped() -> Self {
        Outcome::Skipped("skipped".into())
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self, Outcome::Skipped(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub epoch: u64,
    pub sample_id: u64,
    pub stem: String,
    pub deformation: Outcome,
    pub hflip: bool,
    pub resize_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
}

/// Everything needed to rerun a corpus augmentation bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub p: f64,
    /// Human-readable Ω; `config.omega` is authoritative.
    pub omega: String,
    pub mode: Mode,
    pub epochs: u64,
    pub config: AugmentConfig,
    pub class_map: Option<String>,
    pub palette: Option<PathBuf>,
    pub sources: Vec<SourceEntry>,
    pub samples: Vec<SampleRecord>,
}

impl Provenance {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            entries: self
                .sources
                .iter()
                .map(|s| ManifestEntry::new(&s.image, &s.mask))
                .collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusInputs {
    pub palette: Option<Palette>,
    pub palette_path: Option<PathBuf>,
    pub class_map: Option<ClassMap>,
    /// Original textual form of `class_map`, recorded in the sidecar.
    pub class_map_spec: Option<String>,
}

/// True when image files must be written for `config`.
pub fn writes_images(config: &AugmentConfig) -> bool {
    config.mode != Mode::LabelOnly || config.hflip_p > 0.0 || config.resize_range.is_some()
}

/// Augments every manifest entry for `epochs` epochs into
/// `out/epoch_NNN/{masks,images}/<stem>.png` and writes the provenance
/// sidecar. Sample ids are manifest positions. Failures are collected and
/// reported together.
pub fn augment_corpus(
    manifest: &DatasetManifest,
    config: &AugmentConfig,
    epochs: u64,
    out: &Path,
    workers: usize,
    inputs: &CorpusInputs,
) -> Result<Provenance> {
    config.validate()?;
    let pool = thread_pool(workers)?;
    let images = writes_images(config);

    let tasks: Vec<(u64, usize)> = (0..epochs)
        .flat_map(|e| (0..manifest.entries.len()).map(move |i| (e, i)))
        .collect();
    let results: Vec<std::result::Result<SampleRecord, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(epoch, idx)| {
                let entry = &manifest.entries[idx];
                augment_one(entry, idx as u64, epoch, config, out, images, inputs)
                    .map_err(|e| format!("{}: {e}", entry.mask.display()))
            })
            .collect()
    });

    let mut samples = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => samples.push(rec),
            Err(msg) => failures.push(msg),
        }
    }
    if !failures.is_empty() {
        failures.dedup();
        return Err(Error::Data(format!(
            "{} sample(s) failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        )));
    }

    let provenance = Provenance {
        seed: config.master_seed,
        p: config.p,
        omega: config.omega.to_string(),
        mode: config.mode,
        epochs,
        config: config.clone(),
        class_map: inputs.class_map_spec.clone(),
        palette: inputs.palette_path.clone(),
        sources: manifest
            .entries
            .iter()
            .map(|e| SourceEntry {
                image: e.image.clone(),
                mask: e.mask.clone(),
            })
            .collect(),
        samples,
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    provenance.write(&out.join(SIDECAR_NAME))?;
    Ok(provenance)
}

fn augment_one(
    entry: &ManifestEntry,
    sample_id: u64,
    epoch: u64,
    config: &AugmentConfig,
    out: &Path,
    write_images: bool,
    inputs: &CorpusInputs,
) -> Result<SampleRecord> {
    let mut pair = load_pair(&entry.image, &entry.mask, inputs.palette.as_ref(), inputs.class_map.as_ref())?;
    pair.sample_id = sample_id;
    pair.epoch = epoch;
    let result = apply_augmentation(&pair, config)?;

    let stem = entry.stem();
    let dir = epoch_dir(out, epoch);
    save_mask(&dir.join("masks").join(format!("{stem}.png")), &result.sample.mask)?;
    if write_images {
        save_image(&dir.join("images").join(format!("{stem}.png")), &result.sample.image)?;
    }
    Ok(SampleRecord {
        epoch,
        sample_id,
        stem,
        deformation: result.record.deformation.map_or_else(Outcome::skipped, Outcome::Applied),
        hflip: result.record.hflip,
        resize_scale: result.record.resize_scale,
    })
}

/// Reruns the augmentation recorded in a sidecar into `out`.
pub fn replay(sidecar: &Path, out: &Path, workers: usize) -> Result<Provenance> {
    let prov = Provenance::read(sidecar)?;
    let palette = prov.palette.as_deref().map(Palette::load).transpose()?;
    let class_map = prov.class_map.as_deref().map(str::parse::<ClassMap>).transpose()?;
    let inputs = CorpusInputs {
        palette,
        palette_path: prov.palette.clone(),
        class_map,
        class_map_spec: prov.class_map.clone(),
    };
    augment_corpus(&prov.manifest(), &prov.config, prov.epochs, out, workers, &inputs)
}

/// Cuts every manifest pair into patches named `<stem>_x<X>_y<Y>.png` under
/// `out/images` and `out/masks`, and writes `out/manifest.tsv`.
pub fn tile_corpus(
    manifest: &DatasetManifest,
    spec: &TilingSpec,
    out: &Path,
    workers: usize,
    inputs: &CorpusInputs,
) -> Result<DatasetManifest> {
    spec.validate()?;
    let pool = thread_pool(workers)?;
    let results: Vec<Result<Vec<ManifestEntry>>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let pair = load_pair(&entry.image, &entry.mask, inputs.palette.as_ref(), inputs.class_map.as_ref())?;
                let stem = entry.stem();
                let mut written = Vec::new();
                for patch in tile_pair(&pair, spec)? {
                    let name = format!("{stem}_x{}_y{}.png", patch.x, patch.y);
                    let image = out.join("images").join(&name);
                    let mask = out.join("masks").join(&name);
                    save_image(&image, &patch.sample.image)?;
                    save_mask(&mask, &patch.sample.mask)?;
                    written.push(ManifestEntry {
                        image,
                        mask,
                        width: spec.tile,
                        height: spec.tile,
                    });
                }
                Ok(written)
            })
            .collect()
    });
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (r, src) in results.into_iter().zip(&manifest.entries) {
        match r {
            Ok(e) => entries.extend(e),
            Err(e) => failures.push(format!("{}: {e}", src.image.display())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Data(format!("tiling failed:\n  {}", failures.join("\n  "))));
    }
    let tiled = DatasetManifest {
        entries,
        split: manifest.split,
    };
    tiled.write(&out.join(TILE_MANIFEST_NAME))?;
    Ok(tiled)
}

/// Area statistics over the mask side of a manifest.
pub fn corpus_area_report(
    manifest: &DatasetManifest,
    bin_edges: &[u64],
    tiny_threshold: u64,
    workers: usize,
    inputs: &CorpusInputs,
) -> Result<AreaReport> {
    let empty = AreaAccumulator::new(bin_edges, tiny_threshold)?;
    let pool = thread_pool(workers)?;
    let acc = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| {
                let mask = load_mask(&e.mask, inputs.palette.as_ref(), inputs.class_map.as_ref())?;
                let mut part = empty.clone();
                part.add_components(mask_components(&mask));
                Ok::<_, Error>(part)
            })
            .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))
    })?;
    Ok(acc.finish())
}
