//! Label-only elastic deformation for segmentation datasets.
//!
//! The crate builds Gaussian-smoothed random displacement fields, moves
//! class labels (and optionally images) along them, and wraps that in a
//! per-sample, per-epoch deterministic augmentation with companion flip and
//! resize transforms. Supporting modules tile large rasters, remap classes,
//! and measure connected-component area distributions.
//!
//! ```
//! use nsegment::{apply_augmentation, AugmentConfig, fixtures};
//!
//! let mut pair = fixtures::synthetic_pair(64, 64, 4, 1);
//! pair.sample_id = 17;
//! pair.epoch = 3;
//! let config = AugmentConfig { p: 1.0, master_seed: 42, ..AugmentConfig::default() };
//! let out = apply_augmentation(&pair, &config).unwrap();
//! assert_eq!(out.sample.image, pair.image);
//! ```

pub mod analysis;
pub mod augment;
pub mod dataset;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod pipeline;
pub mod preview;
pub mod raster;
pub mod stream;
pub mod transform;
pub mod warp;

pub use analysis::{area_report, connected_components, AreaAccumulator, AreaReport};
pub use augment::{
    apply_augmentation, draw_plan, nsegment, sample_params, AugmentConfig, AugmentRecord, Augmented, Mode, OmegaSet,
    SamplePair,
};
pub use dataset::{remap_classes, tile_pair, ClassMap, DatasetManifest, EdgePolicy, Palette, Patch, TilingSpec};
pub use error::{Error, Result};
pub use field::{generate_displacement_field, kernel_radius, DeformationParams, DisplacementField, GaussianKernel};
pub use raster::{ImagePlane, LabelMask, IGNORE};
pub use stream::{derive_stream, SampleStream, StreamKey};
pub use transform::Transform;
pub use warp::{clamp_index, warp_image, warp_label, FillPolicy, ImageInterp, Mapping, WarpSpec};
