//! File formats, datasets, configuration and run manifests. Every writer
//! goes through a temporary file and a rename.

mod atomic;
mod config;
mod dataset;
mod formats;
mod manifest;
mod pfm;
mod png;

pub use atomic::{read_text, write_atomic, write_text};
pub use config::{apply_overrides, parse_config, parse_config_str, CONFIG_ENV};
pub use dataset::{
    load_dataset, load_dataset_with, read_listing, write_listing, AssociationMode, AxisFlip, DatasetEntry, DatasetIndex, DatasetOptions,
    PAIR_MAX_DT,
};
pub use formats::{
    export_psf_bank, format_depth_bins, format_tum, import_psf_bank, parse_tum, read_depth_bins, read_intrinsics,
    read_mask, read_psf_bank_index, read_tum, write_depth_bins, write_intrinsics, write_mask, write_tum,
    BankIndexEntry, CameraIntrinsicsFile,
};
pub use manifest::{hash_bytes, hash_file, FileHash, RunManifest, MANIFEST_FILE};
pub use pfm::{read_pfm, read_rgb_pfm, write_pfm, write_rgb_pfm};
pub use png::{
    linear_to_srgb, read_depth_png, read_rgb_png, srgb_to_linear, write_depth_png, write_rgb_png,
    DEFAULT_DEPTH_SCALE,
};
