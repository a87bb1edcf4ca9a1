//! Benchmark workloads executed as active methods on aos backends (or
//! in-process for baselines — same functions, same arithmetic).
//!
//! Two workloads:
//! - [`lstm`]: bivariate utilization forecasting with a from-scratch
//!   LSTM trained by Adam on MSE.
//! - [`csvm`]: cascade SVM training over data blocks with pairwise
//!   support-vector merging and a feedback loop, plus a direct SMO
//!   solver that doubles as the correctness oracle.
//!
//! Inner loops are data-parallel over independent output rows, so the
//! rayon path (feature `parallel`, on by default) and the sequential
//! fallback produce bit-identical results; see [`par`].

pub mod blob;
pub mod convert;
pub mod csvm;
pub mod lstm;
pub mod par;
pub mod tensor;

use aos_core::Registry;

/// Register every workload class (descriptor + implementation). Backends
/// call this at startup; stub-only clients never do.
pub fn register_all(registry: &Registry) -> Result<(), aos_core::RegistryError> {
    lstm::active::register_trainer(registry)?;
    csvm::active::register_block(registry)?;
    blob::register_blob(registry)?;
    Ok(())
}
