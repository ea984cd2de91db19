//! Configuration, run manifests, tabular output and the run pipelines.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod tables;

pub use config::{parse_config, parse_config_str, Resolved, RunConfig};
pub use manifest::{parse_manifest_str, read_manifest, RunManifest};
pub use pipeline::{run, verify, Command, RunOutcome, VerifyReport};
