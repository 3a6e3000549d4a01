// SPDX-License-Identifier: Apache-2.0

//! Input loading and the scan pipeline: dedup, filter, build graphs, detect.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Read};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    detect_future, detect_old, detect_out_of_order_linear, detect_out_of_order_parents,
    detect_tool_signatures, detect_verified_mismatch, DetectError, DetectorConfig,
};
use crate::filter::{apply_policies, FilterError, FilterPolicy, RemovalLedger};
use crate::graph::{build_graphs, ordered_records, CommitGraph, GraphError};
use crate::ingest::{
    deduplicate, parse_commit_stream, DedupReport, InputFormat, MalformedRecord, ParseOptions,
};
use crate::model::{sort_anomalies, Anomaly, CommitRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Old,
    Future,
    /// Both the linear walk and the parent comparison.
    Ooo,
    Signatures,
    Verified,
}

impl Detector {
    pub const ALL: [Detector; 5] = [
        Detector::Old,
        Detector::Future,
        Detector::Ooo,
        Detector::Signatures,
        Detector::Verified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Old => "old",
            Detector::Future => "future",
            Detector::Ooo => "ooo",
            Detector::Signatures => "signatures",
            Detector::Verified => "verified",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown detector `{s}` (expected old, future, ooo, signatures, verified)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditOptions {
    pub detectors: BTreeSet<Detector>,
    pub config: DetectorConfig,
    pub policies: Vec<FilterPolicy>,
    /// Threads for per-repository work; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            detectors: Detector::ALL.into_iter().collect(),
            config: DetectorConfig::default(),
            policies: Vec::new(),
            workers: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    /// Sorted by repo, hash, kind.
    pub anomalies: Vec<Anomaly>,
    pub ledgers: Vec<RemovalLedger>,
    /// Records that survived dedup and filtering, in input order.
    pub records: Vec<CommitRecord>,
    pub dedup: DedupReport,
    pub repos: usize,
    pub dangling_parents: usize,
}

fn detect_repo(graph: &CommitGraph, opts: &AuditOptions) -> Result<Vec<Anomaly>, DetectError> {
    let cfg = &opts.config;
    let mut out = Vec::new();
    for d in &opts.detectors {
        match d {
            Detector::Old => out.extend(detect_old(graph.nodes.values(), cfg)),
            Detector::Future => out.extend(detect_future(graph.nodes.values(), cfg)?),
            Detector::Ooo => {
                out.extend(detect_out_of_order_linear(ordered_records(graph), cfg));
                out.extend(detect_out_of_order_parents(graph, cfg));
            }
            Detector::Signatures => out.extend(detect_tool_signatures(graph.nodes.values())),
            Detector::Verified => out.extend(detect_verified_mismatch(graph, cfg.date_field)),
        }
    }
    Ok(out)
}

/// Dedups, applies the policies in order, then runs the enabled detectors
/// on every repository. The result does not depend on input order except
/// through which duplicate is kept.
pub fn run_audit(records: Vec<CommitRecord>, opts: &AuditOptions) -> Result<AuditOutcome, AuditError> {
    if opts.detectors.contains(&Detector::Future) && opts.config.future_cutoff.is_none() {
        return Err(DetectError::MissingSnapshotDate.into());
    }
    opts.config.validate()?;
    let (records, dedup) = deduplicate(records);
    let (records, ledgers) = apply_policies(records, &opts.policies, &opts.config)?;
    let graphs = build_graphs(records.clone())?;

    let run = || -> Result<Vec<Vec<Anomaly>>, DetectError> {
        graphs.par_iter().map(|g| detect_repo(g, opts)).collect()
    };
    let per_repo = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AuditError::Pool(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut anomalies: Vec<Anomaly> = per_repo.into_iter().flatten().collect();
    sort_anomalies(&mut anomalies);
    anomalies.dedup();

    Ok(AuditOutcome {
        anomalies,
        ledgers,
        repos: graphs.len(),
        dangling_parents: graphs.iter().map(|g| g.dangling_parents.len()).sum(),
        records,
        dedup,
    })
}

#[derive(Debug, Default, Clone)]
pub struct LoadedInput {
    pub records: Vec<CommitRecord>,
    pub malformed: Vec<MalformedRecord>,
}

impl LoadedInput {
    pub fn records_read(&self) -> usize {
        self.records.len() + self.malformed.len()
    }
}

/// Parses each path in turn (`-` is stdin). Malformed records are collected
/// with the path prefixed to the reason when there is more than one input.
pub fn load_inputs(paths: &[String], format: InputFormat, opts: &ParseOptions) -> io::Result<LoadedInput> {
    let mut out = LoadedInput::default();
    let stdin_only = [String::from("-")];
    let paths = if paths.is_empty() { &stdin_only[..] } else { paths };
    for path in paths {
        let reader: Box<dyn Read> = if path == "-" {
            Box::new(io::stdin().lock())
        } else {
            Box::new(std::fs::File::open(Path::new(path)).map_err(|e| {
                io::Error::new(e.kind(), format!("{path}: {e}"))
            })?)
        };
        let parsed = parse_commit_stream(reader, format, opts)?;
        out.records.extend(parsed.records);
        out.malformed.extend(parsed.errors.into_iter().map(|mut e| {
            if paths.len() > 1 {
                e.reason = format!("{path}: {}", e.reason);
            }
            e
        }));
    }
    Ok(out)
}
