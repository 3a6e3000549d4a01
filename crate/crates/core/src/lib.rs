// SPDX-License-Identifier: Apache-2.0

//! Audits the timestamps recorded in Git commit histories.
//!
//! The pipeline reads commit exports ([`ingest`]), rebuilds each
//! repository's commit DAG ([`graph`]), flags old, future and out-of-order
//! commits and tool footprints ([`detect`]), applies cleaning policies
//! ([`filter`]) and aggregates the results ([`analytics`], [`report`]).
//! [`forge`] re-checks out-of-order candidates against fetched metadata.

pub mod analytics;
pub mod cli;
pub mod detect;
pub mod filter;
pub mod forge;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;

pub use detect::DetectorConfig;
pub use model::{format_utc, Anomaly, AnomalyKind, CommitRecord, DateField, Timestamp};
pub use pipeline::{run_audit, AuditOptions, AuditOutcome, Detector};
