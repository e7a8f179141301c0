//! Experiment runner for the `merw` engine: config parsing, deterministic
//! pipelines and digest manifests.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

pub use config::{ExperimentConfig, Kind};
pub use error::{LabError, LabResult};
pub use experiments::{execute, Artifacts};
pub use manifest::{compare, run, verify, CompareReport, RunManifest, VerifyReport};

/// Caps the global rayon pool at `MERW_THREADS` when set.
pub fn init_threads() -> LabResult<()> {
    let Ok(v) = std::env::var("MERW_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| LabError::Config(format!("MERW_THREADS must be a positive integer, got `{v}`")))?;
    // A second initialization (tests, embedding) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
