//! Configuration, orchestration and persistence: verification suites with
//! JSONL reports, experiments with CSV tables, run manifests and resume.

mod config;
mod runs;
mod suites;

pub use config::{
    AwStatsConfig, Config, GapScanConfig, ModelConfig, PotentialTableConfig, RhoConfig, RhoOverride,
    SuiteConfig,
};
pub use runs::{
    resume, run_experiment, run_suite_to_dir, Command, ExperimentKind, OutputDigest, PotentialRow, RunManifest,
    RunOptions, RunOutcome, TaskRecord, MANIFEST_VERSION,
};
pub use suites::{compare_with_table, extended_estimate, fixture_graphs, run_suite, Suite, SE_CAP};
