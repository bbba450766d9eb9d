//! Learning path recommendation over dual knowledge-concept structures.
//!
//! The crate has three layers:
//!
//! - **Concept structure** ([`kc_graph`], [`graph_gen`]): a prerequisite
//!   DAG plus a weighted similarity graph, either loaded from JSON or
//!   generated from concept names through an iterative explanation
//!   refinement loop and a chunk/extract/summarize/assemble pipeline
//!   against a pluggable text-model backend.
//! - **Recommender** ([`student_sim`], [`policy_core`], [`agents`]): a
//!   simulated learner with prerequisite gating and a confusion penalty
//!   between similar concepts, a clipped-surrogate policy-gradient core
//!   with analytic gradients, and the three cooperating agents —
//!   prerequisite concept selection over a candidate action space,
//!   similarity-driven discrimination sub-paths, and difficulty-matched
//!   exercise selection.
//! - **Harness** ([`harness`], [`cli`]): seeded experiments, baselines,
//!   ablations, dataset ingestion and machine-readable reports.

pub mod agents;
pub mod cli;
pub mod error;
pub mod graph_gen;
pub mod harness;
pub mod kc_graph;
pub mod policy_core;
pub mod seeding;
pub mod student_sim;

pub use error::{Error, Result};
