//! Dataset manifests, stratified partitioning, and batch iteration.

pub mod batch;
pub mod manifest;
pub mod partition;

pub use batch::{Batch, BatchStream, EvalSet, ImageStore, DEFAULT_BATCH_SIZE, INPUT_SIZE};
pub use manifest::{load_manifest, save_manifest, DatasetManifest, Label, ManifestEntry};
pub use partition::{
    build_partition_plan, stratified_split, Division, PartitionPlan, SplitPair, DIVISIONS,
    SPLITS_PER_DIVISION,
};
