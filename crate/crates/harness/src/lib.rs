//! Batch simulation harness: loads topologies from TOML, drives them with
//! generated traffic, checks the results against a golden memory, and
//! reports per-link metrics.

pub mod config;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod presets;
pub mod run;
pub mod sweep;
pub mod topology;
pub mod traffic;

pub use config::TopologyConfig;
pub use error::HarnessError;
pub use metrics::Metrics;
pub use oracle::{golden_memory_check, Mismatch};
pub use run::{run, RunOutcome};
pub use topology::{BuildOptions, Sim};

/// Parses and builds a topology in one step.
pub fn load_topology(text: &str, opts: &BuildOptions) -> Result<Sim, HarnessError> {
    TopologyConfig::parse(text)?.build(opts)
}
