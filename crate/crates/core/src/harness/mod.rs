//! Experiment harness: configuration, dataset ingestion, synthetic
//! environment generation, baselines, seeded experiments and report
//! emission.

mod config;
mod experiment;
mod records;
mod report;
pub mod stats;
mod synthetic;

pub use config::{
    known_methods, ExperimentConfig, GraphSource, METHOD_FULL, METHOD_NO_S, METHOD_PREREQ_GREEDY,
    METHOD_RANDOM,
};
pub use experiment::{
    build_environment, default_exercise_bank, run_ablation, run_baseline, run_experiment,
};
pub use records::{load_records, LearnerGroup, LoadedRecords, RecordRow, RecordsSummary};
pub use report::{emit_report, Provenance, Report, ReportCell};
pub use synthetic::{generate_synthetic_graph, SyntheticGraphSpec};
