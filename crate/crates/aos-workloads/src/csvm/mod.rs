//! Cascade SVM workload: per-block SMO training, pairwise support-vector
//! merging up a binary tree and a feedback loop, plus the direct SMO
//! solver over the full dataset that serves as the correctness oracle.

pub mod active;
pub mod cascade;
pub mod dataset;
pub mod smo;

pub use cascade::{
    cascade_train_local, merge_models, pad_to_power_of_two, partition_blocks, CascadeOutcome,
    DataBlock,
};
pub use dataset::generate_csvm_dataset;
pub use smo::{train_smo, Kernel, SmoParams, SvmError, SvmModel};
