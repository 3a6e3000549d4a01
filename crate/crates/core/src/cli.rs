// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Every command returns an exit code: 0 clean,
//! 1 anomalies found (or confirmed), 2 input or configuration error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detect::DetectorConfig;
use crate::filter::{apply_policies, FilterPolicy, PolicyFile, RemovalLedger};
use crate::forge::{verify_anomalies, MetadataClient, SourcesConfig};
use crate::ingest::{deduplicate, DedupReport, InputFormat, MalformedRecord, NdjsonRecord, ParseOptions};
use crate::model::{parse_iso8601, AnomalyKind, DatasetManifest, DateField, Timestamp};
use crate::pipeline::{load_inputs, run_audit, AuditOptions, Detector};
use crate::report::{
    compute_stats, generated_at_now, read_audit_report, to_json, tool_name, write_scan_csv,
    write_stats_csv, AuditReport, InputSummary, RunConfig, StatsDocument, StatsOptions,
    VerifyReport, SCHEMA_VERSION,
};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FOUND: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gitclock", version, about = "Audit the timestamps in Git commit histories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect suspicious timestamps and write an audit report.
    Scan(ScanArgs),
    /// Apply cleaning policies and write the surviving commits as NDJSON.
    Filter(FilterArgs),
    /// Recompute the aggregate tables of an audit report.
    Stats(StatsArgs),
    /// Re-check linear out-of-order candidates against fetched parent metadata.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Ndjson,
    Gitlog,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ndjson => InputFormat::Ndjson,
            FormatArg::Gitlog => InputFormat::Gitlog,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DateFieldArg {
    Committer,
    Author,
}

impl From<DateFieldArg> for DateField {
    fn from(f: DateFieldArg) -> Self {
        match f {
            DateFieldArg::Committer => DateField::Committer,
            DateFieldArg::Author => DateField::Author,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Commit exports to read; `-` or nothing reads stdin.
    pub inputs: Vec<String>,
    #[arg(long, value_enum, default_value = "ndjson")]
    pub format: FormatArg,
    /// Repository id for `gitlog` input.
    #[arg(long)]
    pub repo: Option<String>,
    /// Do not fail on malformed records (they are still reported).
    #[arg(long)]
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    #[arg(long, value_enum, default_value = "committer")]
    pub date_field: DateFieldArg,
    /// Compare pairs even when a message mentions "merge".
    #[arg(long)]
    pub include_merges: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Dataset snapshot date; commits after it are flagged as future.
    #[arg(long)]
    pub snapshot_date: Option<String>,
    /// Commits strictly before this date are flagged as old.
    #[arg(long, default_value = "1990-11-19T00:00:00Z")]
    pub old_cutoff: String,
    /// Comma-separated subset of old,future,ooo,signatures,verified.
    /// Defaults to all, leaving out `future` when no snapshot date is known.
    #[arg(long, value_delimiter = ',')]
    pub detectors: Option<Vec<Detector>>,
    /// Policies applied before detection.
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    /// JSON dataset manifest supplying the snapshot date.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write anomalies and ledgers as CSV files into this directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Worker threads for per-repository detection.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// TOML file of `[[policy]]` tables, applied in order.
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    /// Write the surviving commits here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the removal ledgers here.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Report written by `scan`.
    pub report: PathBuf,
    /// Write the statistics here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write every table as a CSV file into this directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Number of most frequent message tokens to list.
    #[arg(long, default_value_t = 50)]
    pub top_tokens: usize,
    /// Number of top committers and projects to list.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Report written by `scan` with the `ooo` detector.
    pub report: PathBuf,
    /// TOML file listing metadata sources.
    #[arg(long)]
    pub sources: PathBuf,
    /// Concurrent lookups; overrides `workers` in the sources file.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the verification report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Commit exports supplying parent dates the sources lack.
    #[arg(long = "input")]
    pub inputs: Vec<String>,
    #[arg(long, value_enum, default_value = "ndjson")]
    pub format: FormatArg,
}

/// Terminal failure of a command: message for stderr, exit code 2.
#[derive(Debug)]
pub struct Failure(pub String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Scan(a) => cmd_scan(a, out, err),
        Command::Filter(a) => cmd_filter(a, out, err),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(Failure::from),
    }
}

fn load_policies(path: Option<&Path>) -> Result<Vec<FilterPolicy>, Failure> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => PolicyFile::from_toml(&read_text(p)?)
            .map(|f| f.policies)
            .map_err(|e| Failure(format!("{}: {e}", p.display()))),
    }
}

fn parse_date(flag: &str, text: &str) -> Result<Timestamp, Failure> {
    parse_iso8601(text).ok_or_else(|| Failure(format!("{flag}: cannot parse date `{text}`")))
}

fn report_malformed(malformed: &[MalformedRecord], err: &mut dyn Write) {
    for m in malformed {
        let _ = writeln!(err, "malformed: {m}");
    }
}

struct Loaded {
    records: Vec<crate::model::CommitRecord>,
    malformed: Vec<MalformedRecord>,
    records_read: usize,
}

fn load(input: &InputArgs, err: &mut dyn Write) -> Result<Loaded, Failure> {
    let opts = ParseOptions {
        repo_id: input.repo.clone(),
    };
    let loaded = load_inputs(&input.inputs, input.format.into(), &opts)?;
    report_malformed(&loaded.malformed, err);
    let records_read = loaded.records_read();
    Ok(Loaded {
        records: loaded.records,
        malformed: loaded.malformed,
        records_read,
    })
}

fn detector_config(args: &DetectorArgs) -> DetectorConfig {
    DetectorConfig {
        exclude_merges: !args.include_merges,
        date_field: args.date_field.into(),
        ..Default::default()
    }
}

pub fn cmd_scan(args: &ScanArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let manifest: Option<DatasetManifest> = match &args.manifest {
        None => None,
        Some(p) => {
            let m: DatasetManifest = serde_json::from_str(&read_text(p)?)
                .map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            m.validate()?;
            Some(m)
        }
    };
    let snapshot = match (&args.snapshot_date, &manifest) {
        (Some(s), _) => Some(parse_date("--snapshot-date", s)?),
        (None, Some(m)) => Some(m.snapshot_date),
        (None, None) => None,
    };
    let mut config = detector_config(&args.detector);
    config.old_cutoff = parse_date("--old-cutoff", &args.old_cutoff)?;
    config.future_cutoff = snapshot;

    let detectors: BTreeSet<Detector> = match &args.detectors {
        Some(list) => list.iter().copied().collect(),
        None => Detector::ALL
            .into_iter()
            .filter(|d| *d != Detector::Future || snapshot.is_some())
            .collect(),
    };
    let policies = load_policies(args.policy_file.as_deref())?;
    let loaded = load(&args.input, err)?;

    let opts = AuditOptions {
        detectors: detectors.clone(),
        config: config.clone(),
        policies: policies.clone(),
        workers: args.workers,
    };
    let records_read = loaded.records_read;
    let malformed = loaded.malformed;
    let outcome = run_audit(loaded.records, &opts)?;

    let run = RunConfig {
        inputs: args.input.inputs.clone(),
        format: match args.input.format {
            FormatArg::Ndjson => "ndjson".into(),
            FormatArg::Gitlog => "gitlog".into(),
        },
        repo: args.input.repo.clone(),
        detectors: detectors.iter().map(|d| d.name().to_string()).collect(),
        detector_config: config,
        manifest,
        policies,
    };
    let input = InputSummary {
        records_read,
        malformed: malformed.clone(),
        dedup: outcome.dedup.clone(),
        repos: outcome.repos,
        commits_scanned: outcome.records.len(),
        dangling_parents: outcome.dangling_parents,
    };
    let report = AuditReport::new(run, input, outcome.anomalies, outcome.ledgers, &outcome.records);
    emit(args.report.as_deref(), &to_json(&report), out)?;
    if let Some(dir) = &args.csv_dir {
        write_scan_csv(dir, &report.anomalies, &report.ledgers)?;
        write_stats_csv(dir, &report.summary, &report.stats)?;
    }

    let _ = writeln!(
        err,
        "scanned {} commits in {} repositories: {} flagged commits",
        report.input.commits_scanned, report.input.repos, report.summary.total.commits
    );
    if !malformed.is_empty() && !args.input.skip_malformed {
        return Err(Failure(format!(
            "{} malformed records (use --skip-malformed to accept)",
            malformed.len()
        )));
    }
    Ok(if report.anomalies.is_empty() { EXIT_CLEAN } else { EXIT_FOUND })
}

#[derive(Debug, Serialize)]
struct FilterLedgerDocument {
    schema_version: u32,
    generated_at: String,
    tool: String,
    records_read: usize,
    malformed: Vec<MalformedRecord>,
    dedup: DedupReport,
    ledgers: Vec<RemovalLedger>,
}

pub fn cmd_filter(args: &FilterArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let policies = load_policies(args.policy_file.as_deref())?;
    let loaded = load(&args.input, err)?;
    let config = detector_config(&args.detector);
    let (records, dedup) = deduplicate(loaded.records);
    let (kept, ledgers) = apply_policies(records, &policies, &config)?;

    let mut text = String::new();
    for r in &kept {
        text.push_str(&serde_json::to_string(&NdjsonRecord::from_record(r))?);
        text.push('\n');
    }
    emit(args.output.as_deref(), &text, out)?;

    for l in &ledgers {
        let _ = writeln!(
            err,
            "{}: removed {} of {} commits, {} projects emptied",
            serde_json::to_string(&l.policy)?,
            l.removed_commits,
            l.input_commits,
            l.removed_projects
        );
    }
    if let Some(path) = &args.ledger {
        let doc = FilterLedgerDocument {
            schema_version: SCHEMA_VERSION,
            generated_at: generated_at_now(),
            tool: tool_name(),
            records_read: loaded.records_read,
            malformed: loaded.malformed.clone(),
            dedup,
            ledgers,
        };
        emit(Some(path), &to_json(&doc), out)?;
    }
    if !loaded.malformed.is_empty() && !args.input.skip_malformed {
        return Err(Failure(format!(
            "{} malformed records (use --skip-malformed to accept)",
            loaded.malformed.len()
        )));
    }
    Ok(EXIT_CLEAN)
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> CmdResult {
    let report = read_audit_report(&read_text(&args.report)?)
        .map_err(|e| Failure(format!("{}: {e}", args.report.display())))?;
    let opts = StatsOptions {
        top_tokens: args.top_tokens,
        top_k: args.top_k,
    };
    let stats = compute_stats(&report.anomalies, &report.commit_records(), opts);
    let doc = StatsDocument {
        schema_version: SCHEMA_VERSION,
        generated_at: generated_at_now(),
        tool: tool_name(),
        summary: report.summary.clone(),
        stats,
    };
    emit(args.output.as_deref(), &to_json(&doc), out)?;
    if let Some(dir) = &args.csv_dir {
        write_stats_csv(dir, &doc.summary, &doc.stats)?;
    }
    Ok(EXIT_CLEAN)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let report = read_audit_report(&read_text(&args.report)?)
        .map_err(|e| Failure(format!("{}: {e}", args.report.display())))?;
    let mut sources = SourcesConfig::from_toml(&read_text(&args.sources)?)
        .map_err(|e| Failure(format!("{}: {e}", args.sources.display())))?;
    if let Some(base) = args.sources.parent() {
        sources.resolve_paths(base);
    }
    let client = MetadataClient::from_config(&sources)?;

    let mut records = report.commit_records();
    if !args.inputs.is_empty() {
        let loaded = load_inputs(&args.inputs, args.format.into(), &ParseOptions::default())?;
        report_malformed(&loaded.malformed, err);
        records.extend(loaded.records);
    }
    let candidates: Vec<_> = report
        .anomalies
        .iter()
        .filter(|a| a.kind == AnomalyKind::OutOfOrderLinear)
        .cloned()
        .collect();
    let workers = args.workers.unwrap_or(sources.workers);
    let result = verify_anomalies(
        &candidates,
        &records,
        &client,
        &report.run.detector_config,
        workers,
    );
    if !client.any_source_reachable() {
        return Err(Failure("no metadata source was reachable".into()));
    }

    let (forge, archive, unverifiable) = result.accounting.percentages();
    let acc = result.accounting;
    let _ = writeln!(
        err,
        "{} candidates: {} on forge ({forge:.2}%), {} on archive ({archive:.2}%), {} unverifiable ({unverifiable:.2}%); {} confirmed, {} in order",
        acc.total,
        acc.confirmed_on_forge,
        acc.confirmed_on_archive,
        acc.unverifiable,
        acc.confirmed_out_of_order,
        acc.rejected_in_order
    );
    let doc = VerifyReport {
        schema_version: SCHEMA_VERSION,
        generated_at: generated_at_now(),
        tool: tool_name(),
        accounting: acc,
        percent_on_forge: forge,
        percent_on_archive: archive,
        percent_unverifiable: unverifiable,
        fetch: client.stats(),
        confirmed: result.confirmed,
        dropped: result.dropped,
        outcomes: result.outcomes,
    };
    emit(args.output.as_deref(), &to_json(&doc), out)?;
    Ok(if doc.confirmed.is_empty() { EXIT_CLEAN } else { EXIT_FOUND })
}
