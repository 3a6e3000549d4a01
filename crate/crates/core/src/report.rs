// SPDX-License-Identifier: Apache-2.0

//! Versioned report documents and their CSV tables.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    delta_histogram, delta_statistics, summarize, token_frequency, top_committers, top_projects,
    DeltaHistogram, DeltaStats, Summary, TokenTable, HISTOGRAM_BOUNDS,
};
use crate::detect::DetectorConfig;
use crate::filter::{FilterPolicy, RemovalLedger};
use crate::forge::{FetchStats, VerificationAccounting, VerificationOutcome};
use crate::ingest::{DedupReport, MalformedRecord, NdjsonRecord};
use crate::model::{Anomaly, AnomalyKind, CommitRecord, DatasetManifest};

/// Version of the scan report, stats and verify documents. Readers reject
/// any other value.
pub const SCHEMA_VERSION: u32 = 1;

pub const HISTOGRAM_NOTE: &str = "deltas are parent minus child in seconds; bucket bounds are \
inclusive upper limits of 30s, 1m, 5m, 30m, 1h, 6h, 1d, 1w, 30d (month = 30 days), 1y (year = 365 days), then unbounded";

/// Terms whose messages are left out of the old-commit token table; SVN
/// import footers would otherwise dominate it.
pub const OLD_TOKEN_EXCLUDES: &[&str] = &["git-svn-id"];

pub fn generated_at_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Everything needed to replay a scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: Vec<String>,
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo: Option<String>,
    pub detectors: Vec<String>,
    pub detector_config: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<DatasetManifest>,
    #[serde(default)]
    pub policies: Vec<FilterPolicy>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSummary {
    pub records_read: usize,
    pub malformed: Vec<MalformedRecord>,
    pub dedup: DedupReport,
    pub repos: usize,
    /// Commits left after dedup and filtering, i.e. the ones scanned.
    pub commits_scanned: usize,
    /// Parent references to commits absent from the input.
    pub dangling_parents: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub id: String,
    pub commits: usize,
}

fn rows(pairs: Vec<(String, usize)>) -> Vec<RankRow> {
    pairs
        .into_iter()
        .map(|(id, commits)| RankRow { id, commits })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub stats: DeltaStats,
    pub histogram: DeltaHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTables {
    pub histogram_note: String,
    /// Delta statistics for each kind that carries deltas.
    pub deltas: BTreeMap<AnomalyKind, DeltaTable>,
    pub old_tokens: TokenTable,
    pub out_of_order_tokens: TokenTable,
    pub signature_counts: BTreeMap<String, usize>,
    pub top_committers: BTreeMap<AnomalyKind, Vec<RankRow>>,
    pub top_projects: BTreeMap<AnomalyKind, Vec<RankRow>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsOptions {
    pub top_tokens: usize,
    pub top_k: usize,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            top_tokens: 50,
            top_k: 10,
        }
    }
}

fn messages_of<'a>(
    anomalies: &[Anomaly],
    by_key: &BTreeMap<(&str, &str), &'a CommitRecord>,
    keep: impl Fn(AnomalyKind) -> bool,
) -> Vec<&'a str> {
    let keys: BTreeSet<(&str, &str)> = anomalies
        .iter()
        .filter(|a| keep(a.kind))
        .map(|a| (a.repo_id.as_str(), a.commit_hash.as_str()))
        .collect();
    keys.iter()
        .filter_map(|k| by_key.get(k).map(|r| r.message.as_str()))
        .collect()
}

/// Builds every aggregate table from the anomalies and the flagged commits.
pub fn compute_stats(anomalies: &[Anomaly], commits: &[CommitRecord], opts: StatsOptions) -> StatsTables {
    let by_key: BTreeMap<(&str, &str), &CommitRecord> = commits
        .iter()
        .map(|r| ((r.repo_id.as_str(), r.hash.as_str()), r))
        .collect();

    let mut deltas = BTreeMap::new();
    for kind in AnomalyKind::ALL {
        let values: Vec<i64> = anomalies
            .iter()
            .filter(|a| a.kind == kind)
            .filter_map(|a| a.delta_seconds)
            .collect();
        if let (Ok(stats), Ok(histogram)) = (delta_statistics(&values), delta_histogram(&values)) {
            deltas.insert(kind, DeltaTable { stats, histogram });
        }
    }

    let exclude: BTreeSet<String> = OLD_TOKEN_EXCLUDES.iter().map(|s| s.to_string()).collect();
    let old_tokens =
        token_frequency(&messages_of(anomalies, &by_key, |k| k == AnomalyKind::Old), &exclude)
            .top(opts.top_tokens);
    let out_of_order_tokens = token_frequency(
        &messages_of(anomalies, &by_key, AnomalyKind::is_out_of_order),
        &BTreeSet::new(),
    )
    .top(opts.top_tokens);

    let mut signature_counts = BTreeMap::new();
    for a in anomalies.iter().filter(|a| a.kind == AnomalyKind::ToolSignature) {
        *signature_counts.entry(a.evidence.clone()).or_insert(0) += 1;
    }

    let mut top_c = BTreeMap::new();
    let mut top_p = BTreeMap::new();
    for kind in AnomalyKind::ALL {
        let of_kind: Vec<Anomaly> = anomalies.iter().filter(|a| a.kind == kind).cloned().collect();
        if of_kind.is_empty() {
            continue;
        }
        top_c.insert(kind, rows(top_committers(&of_kind, commits, opts.top_k)));
        top_p.insert(kind, rows(top_projects(&of_kind, opts.top_k)));
    }

    StatsTables {
        histogram_note: HISTOGRAM_NOTE.to_string(),
        deltas,
        old_tokens,
        out_of_order_tokens,
        signature_counts,
        top_committers: top_c,
        top_projects: top_p,
    }
}

/// The document written by `scan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    /// Wall-clock creation time; the only field that differs between reruns.
    pub generated_at: String,
    pub tool: String,
    pub run: RunConfig,
    pub input: InputSummary,
    pub summary: Summary,
    pub anomalies: Vec<Anomaly>,
    pub ledgers: Vec<RemovalLedger>,
    pub stats: StatsTables,
    /// The flagged commits, so later commands need not reread the inputs.
    pub commits: Vec<NdjsonRecord>,
}

pub fn tool_name() -> String {
    concat!("gitclock ", env!("CARGO_PKG_VERSION")).to_string()
}

/// Commits referenced by at least one anomaly, ordered by repo then hash.
pub fn flagged_commits(anomalies: &[Anomaly], records: &[CommitRecord]) -> Vec<CommitRecord> {
    let keys: HashSet<(&str, &str)> = anomalies
        .iter()
        .map(|a| (a.repo_id.as_str(), a.commit_hash.as_str()))
        .collect();
    let mut out: Vec<CommitRecord> = records
        .iter()
        .filter(|r| keys.contains(&(r.repo_id.as_str(), r.hash.as_str())))
        .cloned()
        .collect();
    out.sort_by(|a, b| (&a.repo_id, &a.hash).cmp(&(&b.repo_id, &b.hash)));
    out
}

impl AuditReport {
    pub fn new(
        run: RunConfig,
        input: InputSummary,
        mut anomalies: Vec<Anomaly>,
        ledgers: Vec<RemovalLedger>,
        records: &[CommitRecord],
    ) -> Self {
        anomalies.sort();
        anomalies.dedup();
        let flagged = flagged_commits(&anomalies, records);
        let stats = compute_stats(&anomalies, &flagged, StatsOptions::default());
        AuditReport {
            schema_version: SCHEMA_VERSION,
            generated_at: generated_at_now(),
            tool: tool_name(),
            run,
            input,
            summary: summarize(&anomalies),
            anomalies,
            ledgers,
            stats,
            commits: flagged.iter().map(NdjsonRecord::from_record).collect(),
        }
    }

    /// Flagged commits decoded back into records; undecodable ones are skipped.
    pub fn commit_records(&self) -> Vec<CommitRecord> {
        self.commits
            .iter()
            .filter_map(|c| c.clone().into_record().ok())
            .collect()
    }
}

/// The document written by `stats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub schema_version: u32,
    pub generated_at: String,
    pub tool: String,
    pub summary: Summary,
    pub stats: StatsTables,
}

/// The document written by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub generated_at: String,
    pub tool: String,
    pub accounting: VerificationAccounting,
    pub percent_on_forge: f64,
    pub percent_on_archive: f64,
    pub percent_unverifiable: f64,
    pub confirmed: Vec<Anomaly>,
    pub dropped: Vec<Anomaly>,
    pub outcomes: Vec<VerificationOutcome>,
    pub fetch: FetchStats,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("not a report document: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("unsupported schema version {found:?}, expected {SCHEMA_VERSION}")]
    SchemaMismatch { found: Option<u64> },
}

/// Parses a scan report, checking the schema version before the body.
pub fn read_audit_report(text: &str) -> Result<AuditReport, ReportError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(SCHEMA_VERSION)) {
        return Err(ReportError::SchemaMismatch { found });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

/// The document with `generated_at` removed, for byte-identity checks.
pub fn without_generated_at(text: &str) -> String {
    let mut value: serde_json::Value = serde_json::from_str(text).expect("valid JSON");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("generated_at");
    }
    to_json(&value)
}

fn csv_file(dir: &Path, name: &str, header: &[&str]) -> io::Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the summary and stats tables as CSV files into `dir`:
/// `summary.csv`, `delta_stats.csv`, `histogram.csv`, `tokens_old.csv`,
/// `tokens_out_of_order.csv`, `signatures.csv`, `top_committers.csv` and
/// `top_projects.csv`.
pub fn write_stats_csv(dir: &Path, summary: &Summary, stats: &StatsTables) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv_file(dir, "summary.csv", &["kind", "commits", "projects"])?;
    for (kind, s) in &summary.by_kind {
        w.write_record([kind.as_str(), &s.commits.to_string(), &s.projects.to_string()])?;
    }
    w.write_record(["total", &summary.total.commits.to_string(), &summary.total.projects.to_string()])?;
    w.flush()?;

    let mut w = csv_file(
        dir,
        "delta_stats.csv",
        &["kind", "n", "mean", "std", "min", "p25", "p50", "p75", "max"],
    )?;
    for (kind, t) in &stats.deltas {
        let s = &t.stats;
        let mut rec = vec![kind.as_str().to_string(), s.n.to_string()];
        rec.extend([s.mean, s.std, s.min, s.p25, s.p50, s.p75, s.max].map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "histogram.csv", &["kind", "bucket", "upper_bound_seconds", "count"])?;
    for (kind, t) in &stats.deltas {
        debug_assert_eq!(t.histogram.buckets.len(), HISTOGRAM_BOUNDS.len());
        for b in &t.histogram.buckets {
            w.write_record([
                kind.as_str(),
                &b.label,
                &opt(b.upper_bound_seconds),
                &b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;

    for (name, table) in [
        ("tokens_old.csv", &stats.old_tokens),
        ("tokens_out_of_order.csv", &stats.out_of_order_tokens),
    ] {
        let mut w = csv_file(dir, name, &["token", "count"])?;
        for (token, count) in &table.rows {
            w.write_record([token.as_str(), &count.to_string()])?;
        }
        w.flush()?;
    }

    let mut w = csv_file(dir, "signatures.csv", &["signature", "commits"])?;
    for (sig, n) in &stats.signature_counts {
        w.write_record([sig.as_str(), &n.to_string()])?;
    }
    w.flush()?;

    for (name, col, table) in [
        ("top_committers.csv", "committer", &stats.top_committers),
        ("top_projects.csv", "repo_id", &stats.top_projects),
    ] {
        let mut w = csv_file(dir, name, &["kind", "rank", col, "commits"])?;
        for (kind, ranked) in table {
            for (i, row) in ranked.iter().enumerate() {
                w.write_record([kind.as_str(), &(i + 1).to_string(), &row.id, &row.commits.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes `anomalies.csv` and `ledgers.csv` into `dir`.
pub fn write_scan_csv(dir: &Path, anomalies: &[Anomaly], ledgers: &[RemovalLedger]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv_file(dir, "anomalies.csv", &["repo_id", "commit_hash", "kind", "delta_seconds", "evidence"])?;
    for a in anomalies {
        w.write_record([
            a.repo_id.as_str(),
            &a.commit_hash,
            a.kind.as_str(),
            &opt(a.delta_seconds),
            &a.evidence,
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(
        dir,
        "ledgers.csv",
        &["step", "policy", "input_commits", "removed_commits", "retained_commits", "removed_projects"],
    )?;
    for (i, l) in ledgers.iter().enumerate() {
        let policy = serde_json::to_string(&l.policy).expect("policy serializes");
        w.write_record([
            (i + 1).to_string(),
            policy,
            l.input_commits.to_string(),
            l.removed_commits.to_string(),
            l.retained_commits.to_string(),
            l.removed_projects.to_string(),
        ])?;
    }
    w.flush()
}
