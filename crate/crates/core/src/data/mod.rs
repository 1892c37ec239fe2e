//! Skeleton sequences, their file formats, preprocessing, synthetic data
//! and the data-level noise injectors.

mod corrupt;
mod dataset;
mod preprocess;
mod sequence;
mod synth;

pub use corrupt::{apply_noise, corrupt_dataset, drop_joints, permute_joints, shuffle_joints};
pub use dataset::{Dataset, DatasetManifest, Split, MANIFEST_FILE, TOPOLOGY_FILE};
pub use preprocess::{compute_features, preprocess, resample_frames, PreprocessConfig};
pub use sequence::SkeletonSequence;
pub use synth::{class_motions, synth_generate, ClassMotion, SynthConfig};
